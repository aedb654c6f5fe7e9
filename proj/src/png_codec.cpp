// Baseline PNG codec: 8-bit RGB, non-interlaced, zlib-compressed. Reading
// rejects anything else with an explicit unsupported-format error; writing
// emits filter-0 rows.

#include <zlib.h>

#include <cstring>
#include <fstream>

#include "dualx/error.hpp"
#include "dualx/image_io.hpp"

namespace dualx {

namespace {

constexpr std::uint8_t kSignature[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};

std::uint32_t be32(const std::uint8_t* p) {
  return (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) |
         (std::uint32_t(p[2]) << 8) | std::uint32_t(p[3]);
}

void put_be32(std::vector<std::uint8_t>& v, std::uint32_t x) {
  v.push_back(static_cast<std::uint8_t>(x >> 24));
  v.push_back(static_cast<std::uint8_t>(x >> 16));
  v.push_back(static_cast<std::uint8_t>(x >> 8));
  v.push_back(static_cast<std::uint8_t>(x));
}

std::vector<std::uint8_t> zlib_inflate(const std::vector<std::uint8_t>& in, size_t expected) {
  std::vector<std::uint8_t> out(expected);
  uLongf out_len = static_cast<uLongf>(expected);
  int rc = uncompress(out.data(), &out_len, in.data(), static_cast<uLong>(in.size()));
  if (rc != Z_OK || out_len != expected) throw IoError("png: zlib inflate failed");
  return out;
}

std::vector<std::uint8_t> zlib_deflate(const std::vector<std::uint8_t>& in) {
  uLongf bound = compressBound(static_cast<uLong>(in.size()));
  std::vector<std::uint8_t> out(bound);
  int rc = compress2(out.data(), &bound, in.data(), static_cast<uLong>(in.size()), 6);
  if (rc != Z_OK) throw IoError("png: zlib deflate failed");
  out.resize(bound);
  return out;
}

int paeth(int a, int b, int c) {
  int p = a + b - c;
  int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  if (pb <= pc) return b;
  return c;
}

}  // namespace

Image8 read_png(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path);
  std::uint8_t sig[8];
  f.read(reinterpret_cast<char*>(sig), 8);
  if (!f || std::memcmp(sig, kSignature, 8) != 0)
    throw IoError("unsupported format: " + path + " is not a PNG file");

  Image8 img;
  int bit_depth = 0, color_type = -1, interlace = 0;
  std::vector<std::uint8_t> idat;
  bool saw_ihdr = false, saw_iend = false;
  while (!saw_iend) {
    std::uint8_t head[8];
    f.read(reinterpret_cast<char*>(head), 8);
    if (!f) throw IoError("png: truncated chunk in " + path);
    std::uint32_t len = be32(head);
    char type[5] = {static_cast<char>(head[4]), static_cast<char>(head[5]),
                    static_cast<char>(head[6]), static_cast<char>(head[7]), 0};
    std::vector<std::uint8_t> payload(len);
    f.read(reinterpret_cast<char*>(payload.data()), len);
    std::uint8_t crc_buf[4];
    f.read(reinterpret_cast<char*>(crc_buf), 4);
    if (!f) throw IoError("png: truncated chunk in " + path);
    uLong crc = crc32(0L, Z_NULL, 0);
    crc = crc32(crc, head + 4, 4);
    if (len > 0) crc = crc32(crc, payload.data(), len);  // zlib resets on null input
    if (crc != be32(crc_buf)) throw IoError("png: chunk crc mismatch in " + path);

    if (std::strcmp(type, "IHDR") == 0) {
      if (len != 13) throw IoError("png: bad IHDR in " + path);
      img.width = be32(payload.data());
      img.height = be32(payload.data() + 4);
      bit_depth = payload[8];
      color_type = payload[9];
      interlace = payload[12];
      saw_ihdr = true;
      if (bit_depth == 16)
        throw IoError("unsupported bit depth: " + path + " is 16-bit (only 8-bit supported)");
      if (bit_depth != 8 || color_type != 2)
        throw IoError("unsupported format: " + path +
                      " must be 8-bit RGB (color type 2), got depth " +
                      std::to_string(bit_depth) + " type " + std::to_string(color_type));
      if (interlace != 0)
        throw IoError("unsupported format: interlaced PNG " + path);
    } else if (std::strcmp(type, "IDAT") == 0) {
      idat.insert(idat.end(), payload.begin(), payload.end());
    } else if (std::strcmp(type, "IEND") == 0) {
      saw_iend = true;
    }
    // ancillary chunks are skipped
  }
  if (!saw_ihdr) throw IoError("png: missing IHDR in " + path);
  if (img.width < 1 || img.height < 1) throw IoError("png: bad extents in " + path);

  size_t stride = static_cast<size_t>(img.width) * 3;
  std::vector<std::uint8_t> raw =
      zlib_inflate(idat, (stride + 1) * static_cast<size_t>(img.height));
  img.rgb.resize(stride * static_cast<size_t>(img.height));
  std::vector<std::uint8_t> prev(stride, 0);
  for (std::int64_t y = 0; y < img.height; ++y) {
    const std::uint8_t* src = raw.data() + static_cast<size_t>(y) * (stride + 1);
    std::uint8_t filter = src[0];
    std::uint8_t* dst = img.rgb.data() + static_cast<size_t>(y) * stride;
    for (size_t x = 0; x < stride; ++x) {
      int a = x >= 3 ? dst[x - 3] : 0;
      int b = prev[x];
      int c = x >= 3 ? prev[x - 3] : 0;
      int v = src[1 + x];
      switch (filter) {
        case 0: break;
        case 1: v += a; break;
        case 2: v += b; break;
        case 3: v += (a + b) / 2; break;
        case 4: v += paeth(a, b, c); break;
        default: throw IoError("png: unknown filter type in " + path);
      }
      dst[x] = static_cast<std::uint8_t>(v & 0xff);
    }
    std::memcpy(prev.data(), dst, stride);
  }
  return img;
}

void write_png(const std::string& path, const Image8& img) {
  size_t stride = static_cast<size_t>(img.width) * 3;
  std::vector<std::uint8_t> raw((stride + 1) * static_cast<size_t>(img.height));
  for (std::int64_t y = 0; y < img.height; ++y) {
    std::uint8_t* dst = raw.data() + static_cast<size_t>(y) * (stride + 1);
    dst[0] = 0;  // no filter
    std::memcpy(dst + 1, img.rgb.data() + static_cast<size_t>(y) * stride, stride);
  }
  std::vector<std::uint8_t> compressed = zlib_deflate(raw);

  std::vector<std::uint8_t> out(kSignature, kSignature + 8);
  auto chunk = [&](const char* type, const std::vector<std::uint8_t>& payload) {
    put_be32(out, static_cast<std::uint32_t>(payload.size()));
    size_t start = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), payload.begin(), payload.end());
    uLong crc = crc32(0L, Z_NULL, 0);
    crc = crc32(crc, out.data() + start, static_cast<uInt>(4 + payload.size()));
    put_be32(out, static_cast<std::uint32_t>(crc));
  };

  std::vector<std::uint8_t> ihdr;
  put_be32(ihdr, static_cast<std::uint32_t>(img.width));
  put_be32(ihdr, static_cast<std::uint32_t>(img.height));
  ihdr.push_back(8);   // bit depth
  ihdr.push_back(2);   // RGB
  ihdr.push_back(0);   // compression
  ihdr.push_back(0);   // filter
  ihdr.push_back(0);   // no interlace
  chunk("IHDR", ihdr);
  chunk("IDAT", compressed);
  chunk("IEND", {});

  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path + " for writing");
  f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError("png: write failed for " + path);
}

}  // namespace dualx
