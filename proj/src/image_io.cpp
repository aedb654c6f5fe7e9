#include "dualx/image_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "dualx/error.hpp"

namespace fs = std::filesystem;

namespace dualx {

namespace {

int next_ppm_token(std::istream& in) {
  // skips whitespace and '#' comments, returns the next integer
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {
      }
      continue;
    }
    if (!std::isspace(c)) break;
  }
  if (c == EOF) throw IoError("ppm: truncated header");
  int value = 0;
  bool any = false;
  while (c != EOF && std::isdigit(c)) {
    value = value * 10 + (c - '0');
    any = true;
    c = in.get();
  }
  if (!any) throw IoError("ppm: malformed header");
  return value;
}

std::string lower_ext(const std::string& path) {
  std::string e = fs::path(path).extension().string();
  std::transform(e.begin(), e.end(), e.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return e;
}

}  // namespace

Image8 read_ppm(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path);
  char m0 = 0, m1 = 0;
  f.get(m0);
  f.get(m1);
  if (m0 != 'P' || m1 != '6') throw IoError("unsupported format: " + path + " is not binary PPM (P6)");
  Image8 img;
  img.width = next_ppm_token(f);
  img.height = next_ppm_token(f);
  int maxval = next_ppm_token(f);
  if (maxval != 255)
    throw IoError("unsupported bit depth: ppm maxval " + std::to_string(maxval) +
                  " (only 8-bit supported)");
  if (img.width < 1 || img.height < 1) throw IoError("ppm: bad extents in " + path);
  img.rgb.resize(static_cast<size_t>(img.width * img.height * 3));
  f.read(reinterpret_cast<char*>(img.rgb.data()),
         static_cast<std::streamsize>(img.rgb.size()));
  if (!f) throw IoError("ppm: truncated pixel data in " + path);
  return img;
}

void write_ppm(const std::string& path, const Image8& img) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path + " for writing");
  f << "P6\n" << img.width << " " << img.height << "\n255\n";
  f.write(reinterpret_cast<const char*>(img.rgb.data()),
          static_cast<std::streamsize>(img.rgb.size()));
  if (!f) throw IoError("ppm: write failed for " + path);
}

Image8 read_image(const std::string& path) {
  std::string e = lower_ext(path);
  if (e == ".ppm") return read_ppm(path);
  if (e == ".png") return read_png(path);
  throw IoError("unsupported format: " + path);
}

void write_image(const std::string& path, const Image8& img) {
  std::string e = lower_ext(path);
  if (e == ".ppm") return write_ppm(path, img);
  if (e == ".png") return write_png(path, img);
  throw IoError("unsupported format: " + path);
}

Tensor image_to_frame(const Image8& img) {
  Tensor frame(Shape{3, img.height, img.width});
  float* dst = frame.values_mut().data();
  std::int64_t plane = img.height * img.width;
  for (std::int64_t i = 0; i < plane; ++i)
    for (std::int64_t c = 0; c < 3; ++c)
      dst[c * plane + i] = static_cast<float>(img.rgb[static_cast<size_t>(i * 3 + c)]) / 255.0f;
  return frame;
}

Image8 frame_to_image(const Tensor& frame) {
  if (frame.ndim() != 3 || frame.dim(0) != 3) throw ShapeError("frame must be [3,H,W]");
  Image8 img;
  img.height = frame.dim(1);
  img.width = frame.dim(2);
  img.rgb.resize(static_cast<size_t>(img.height * img.width * 3));
  const float* src = frame.data();
  std::int64_t plane = img.height * img.width;
  for (std::int64_t i = 0; i < plane; ++i)
    for (std::int64_t c = 0; c < 3; ++c) {
      float v = std::min(1.0f, std::max(0.0f, src[c * plane + i]));
      img.rgb[static_cast<size_t>(i * 3 + c)] =
          static_cast<std::uint8_t>(std::lround(v * 255.0f));
    }
  return img;
}

Tensor read_clip_dir(const std::string& dir) {
  if (!fs::is_directory(dir)) throw IoError(dir + " is not a directory");
  std::vector<std::string> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    std::string ext = lower_ext(e.path().string());
    if (ext == ".ppm" || ext == ".png") files.push_back(e.path().string());
  }
  if (files.empty()) throw IoError("no frame files (.ppm/.png) in " + dir);
  std::sort(files.begin(), files.end());
  std::vector<Image8> frames;
  frames.reserve(files.size());
  for (const auto& f : files) {
    frames.push_back(read_image(f));
    if (frames.back().width != frames.front().width ||
        frames.back().height != frames.front().height)
      throw IoError("mixed frame extents in clip " + dir);
  }
  std::int64_t N = static_cast<std::int64_t>(frames.size());
  std::int64_t H = frames.front().height, W = frames.front().width;
  Tensor clip(Shape{1, 3, N, H, W});
  float* dst = clip.values_mut().data();
  for (std::int64_t n = 0; n < N; ++n) {
    const auto& rgb = frames[static_cast<size_t>(n)].rgb;
    for (std::int64_t i = 0; i < H * W; ++i)
      for (std::int64_t c = 0; c < 3; ++c)
        dst[(c * N + n) * H * W + i] =
            static_cast<float>(rgb[static_cast<size_t>(i * 3 + c)]) / 255.0f;
  }
  return clip;
}

void write_clip_dir(const std::string& dir, const Tensor& clip, const std::string& format) {
  if (clip.ndim() != 5 || clip.dim(0) != 1 || clip.dim(1) != 3)
    throw ShapeError("write_clip_dir expects a [1,3,N,H,W] clip");
  if (format != "ppm" && format != "png") throw ConfigError("clip format must be ppm or png");
  fs::create_directories(dir);
  std::int64_t N = clip.dim(2), H = clip.dim(3), W = clip.dim(4);
  for (std::int64_t n = 0; n < N; ++n) {
    Tensor frame(Shape{3, H, W});
    for (std::int64_t c = 0; c < 3; ++c)
      std::copy(clip.data() + (c * N + n) * H * W, clip.data() + (c * N + n + 1) * H * W,
                frame.values_mut().data() + c * H * W);
    char name[32];
    std::snprintf(name, sizeof name, "%08lld.%s", static_cast<long long>(n), format.c_str());
    write_image((fs::path(dir) / name).string(), frame_to_image(frame));
  }
}

std::vector<std::string> list_clip_dirs(const std::string& root) {
  if (!fs::is_directory(root)) throw IoError(root + " is not a directory");
  bool has_frames = false;
  for (const auto& e : fs::directory_iterator(root)) {
    if (e.is_regular_file()) {
      std::string ext = lower_ext(e.path().string());
      if (ext == ".ppm" || ext == ".png") {
        has_frames = true;
        break;
      }
    }
  }
  if (has_frames) return {root};
  std::vector<std::string> dirs;
  for (const auto& e : fs::directory_iterator(root))
    if (e.is_directory()) dirs.push_back(e.path().string());
  std::sort(dirs.begin(), dirs.end());
  if (dirs.empty()) throw IoError("no clips found under " + root);
  return dirs;
}

}  // namespace dualx
