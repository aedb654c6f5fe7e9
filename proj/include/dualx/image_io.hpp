#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dualx/tensor.hpp"

// Frame and clip I/O. Clips are directories of zero-padded numbered frame
// files; binary PPM (P6, 8-bit) is native and baseline PNG (8-bit RGB,
// non-interlaced) is read/written through zlib. 8-bit values map to [0,1] by
// /255, so a write-then-read round trip is bit-exact for 8-bit data.

namespace dualx {

struct Image8 {
  std::int64_t width = 0, height = 0;
  std::vector<std::uint8_t> rgb;  // interleaved, 3 bytes per pixel
};

Image8 read_ppm(const std::string& path);
void write_ppm(const std::string& path, const Image8& img);

Image8 read_png(const std::string& path);
void write_png(const std::string& path, const Image8& img);

// Dispatch by extension (.ppm, .png).
Image8 read_image(const std::string& path);
void write_image(const std::string& path, const Image8& img);

// Frame tensor [3,H,W] in [0,1] <-> 8-bit image. to_image8 clamps and rounds.
Tensor image_to_frame(const Image8& img);
Image8 frame_to_image(const Tensor& frame);

// Clip directory -> [1,3,N,H,W]. Frames are the sorted image files in the
// directory; mixed extents are an error.
Tensor read_clip_dir(const std::string& dir);

// Writes frames as <prefix><%08d>.<format> into dir (created if missing).
void write_clip_dir(const std::string& dir, const Tensor& clip,
                    const std::string& format = "ppm");

// Lists clip directories of a dataset root: the root itself if it directly
// holds frames, otherwise every subdirectory that does.
std::vector<std::string> list_clip_dirs(const std::string& root);

}  // namespace dualx
