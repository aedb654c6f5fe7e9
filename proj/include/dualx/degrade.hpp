#pragma once

#include <string>
#include <vector>

#include "dualx/image_ops.hpp"
#include "dualx/rng.hpp"

// First-order degradation synthesis: blur -> resize(random scale) -> noise ->
// compression proxy -> resize to exactly (H/4, W/4). One parameter draw per
// clip; all frames share it. Fully determined by (clip, seed).

namespace dualx {

struct DegradationConfig {
  double blur_sigma_lo = 0.2, blur_sigma_hi = 3.0;
  int blur_kernel = 21;
  double resize_lo = 0.25, resize_hi = 1.0;
  std::vector<ResizeMode> resize_modes = {ResizeMode::Bicubic, ResizeMode::Bilinear,
                                          ResizeMode::Nearest};
  double noise_lo = 0.0, noise_hi = 0.1;
  int jpeg_q_lo = 30, jpeg_q_hi = 95;
  std::uint64_t seed = 0;

  void validate() const {
    if (blur_sigma_lo > blur_sigma_hi || resize_lo > resize_hi || noise_lo > noise_hi ||
        jpeg_q_lo > jpeg_q_hi)
      throw ConfigError("degradation range bounds must satisfy lo <= hi");
    if (blur_sigma_lo < 0 || noise_lo < 0) throw ConfigError("negative degradation bound");
    if (jpeg_q_lo < 1 || jpeg_q_hi > 100) throw ConfigError("jpeg quality outside [1,100]");
    if (resize_lo <= 0) throw ConfigError("resize scale must be positive");
    if (resize_modes.empty()) throw ConfigError("at least one resize mode required");
    if (blur_kernel < 1 || blur_kernel % 2 == 0)
      throw ConfigError("blur kernel size must be odd");
  }
};

// The parameters actually drawn for one clip, kept for exact replay.
struct DegradationDraw {
  double blur_sigma = 0.0;
  double resize_scale = 1.0;
  ResizeMode resize_mode = ResizeMode::Bicubic;
  double noise_sigma = 0.0;
  int jpeg_quality = 100;
  std::uint64_t seed = 0;
};

// i.i.d. N(0, sigma^2) per sample, row-major draw order.
template <class T>
TensorT<T> add_gaussian_noise(const TensorT<T>& frame, double sigma, Rng& rng) {
  if (sigma < 0) throw ConfigError("noise sigma must be >= 0");
  TensorT<T> out = frame.clone();
  if (sigma == 0.0) return out;
  for (auto& v : out.values_mut()) v += static_cast<T>(rng.next_normal(0.0, sigma));
  return out;
}

namespace detail {

// Standard luminance quantization table.
inline const int* jpeg_base_table() {
  static const int q[64] = {16, 11, 10, 16, 24,  40,  51,  61,  12, 12, 14, 19, 26,  58,  60,  55,
                            14, 13, 16, 24, 40,  57,  69,  56,  14, 17, 22, 29, 51,  87,  80,  62,
                            18, 22, 37, 56, 68,  109, 103, 77,  24, 35, 55, 64, 81,  104, 113, 92,
                            49, 64, 78, 87, 103, 121, 120, 101, 72, 92, 95, 98, 112, 100, 103, 99};
  return q;
}

inline void jpeg_quant_table(int quality, double out[64]) {
  int scale = (quality < 50) ? 5000 / quality : 200 - 2 * quality;
  const int* base = jpeg_base_table();
  for (int i = 0; i < 64; ++i) {
    int v = (base[i] * scale + 50) / 100;
    out[i] = static_cast<double>(std::min(255, std::max(1, v)));
  }
}

}  // namespace detail

// Block-DCT quantization proxy for video compression. Per channel: values are
// scaled to [0,255] and centered, 8x8 blocks (zero-padded past the frame
// border after centering) are transformed, quantized with the standard
// luminance table scaled by `quality`, dequantized and transformed back.
// Applying the proxy twice at the same quality is a fixed point up to
// rounding at padded-edge blocks.
template <class T>
TensorT<T> jpeg_proxy(const TensorT<T>& frame, int quality) {
  if (frame.ndim() != 3) throw ShapeError("jpeg_proxy expects [C,H,W]");
  if (quality < 1 || quality > 100)
    throw ConfigError("jpeg quality " + std::to_string(quality) + " outside [1,100]");
  double q[64];
  detail::jpeg_quant_table(quality, q);
  std::int64_t C = frame.dim(0), H = frame.dim(1), W = frame.dim(2);
  std::int64_t bh = (H + 7) / 8, bw = (W + 7) / 8;
  TensorT<T> out(frame.shape());
  const T* src = frame.data();
  T* dst = out.values_mut().data();
  parallel_for(C * bh * bw, [&](std::int64_t idx) {
    std::int64_t bx = idx % bw, by = (idx / bw) % bh, c = idx / (bw * bh);
    double block[64], coef[64], rec[64];
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < 8; ++x) {
        std::int64_t sy = by * 8 + y, sx = bx * 8 + x;
        block[y * 8 + x] =
            (sy < H && sx < W)
                ? static_cast<double>(src[(c * H + sy) * W + sx]) * 255.0 - 128.0
                : 0.0;
      }
    kernels::dct8x8(block, coef);
    for (int i = 0; i < 64; ++i) coef[i] = std::round(coef[i] / q[i]) * q[i];
    kernels::idct8x8(coef, rec);
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < 8; ++x) {
        std::int64_t sy = by * 8 + y, sx = bx * 8 + x;
        if (sy < H && sx < W)
          dst[(c * H + sy) * W + sx] = static_cast<T>((rec[y * 8 + x] + 128.0) / 255.0);
      }
  }, /*grain=*/4);
  return out;
}

// Plain bicubic x4 downsampling (antialiased), the stage-1 pretraining pair
// source.
template <class T>
TensorT<T> bicubic_down4(const TensorT<T>& clip) {
  if (clip.ndim() != 5) throw ShapeError("bicubic_down4 expects [B,C,N,H,W]");
  if (clip.dim(3) % 4 != 0 || clip.dim(4) % 4 != 0)
    throw ShapeError("bicubic_down4 requires extents divisible by 4");
  return resize_clip(clip, clip.dim(3) / 4, clip.dim(4) / 4, ResizeMode::Bicubic);
}

// Degrades one clip. The parameter draw consumes the rng stream in a fixed
// order (blur sigma, scale, mode, noise sigma, quality) before any pixels.
template <class T>
std::pair<TensorT<T>, DegradationDraw> degrade_clip(const TensorT<T>& clip,
                                                    const DegradationConfig& cfg,
                                                    std::uint64_t stream = 0) {
  cfg.validate();
  if (clip.ndim() != 5) throw ShapeError("degrade_clip expects [B,C,N,H,W]");
  std::int64_t B = clip.dim(0), C = clip.dim(1), N = clip.dim(2), H = clip.dim(3),
               W = clip.dim(4);
  if (H % 4 != 0 || W % 4 != 0)
    throw ShapeError("degrade_clip requires frame extents divisible by 4");

  Rng rng = Rng(cfg.seed).fork(stream);
  DegradationDraw draw;
  draw.seed = cfg.seed;
  draw.blur_sigma = rng.next_uniform(cfg.blur_sigma_lo, cfg.blur_sigma_hi);
  draw.resize_scale = rng.next_uniform(cfg.resize_lo, cfg.resize_hi);
  draw.resize_mode =
      cfg.resize_modes[static_cast<size_t>(rng.next_index(cfg.resize_modes.size()))];
  draw.noise_sigma = rng.next_uniform(cfg.noise_lo, cfg.noise_hi);
  draw.jpeg_quality =
      cfg.jpeg_q_lo + static_cast<int>(rng.next_index(
                          static_cast<std::uint64_t>(cfg.jpeg_q_hi - cfg.jpeg_q_lo + 1)));

  auto mid_extent = [&](std::int64_t e) {
    std::int64_t v = static_cast<std::int64_t>(std::llround(e * draw.resize_scale));
    return std::max<std::int64_t>(1, v);
  };
  std::int64_t mh = mid_extent(H), mw = mid_extent(W);

  TensorT<T> lq(Shape{B, C, N, H / 4, W / 4});
  for (std::int64_t b = 0; b < B; ++b)
    for (std::int64_t n = 0; n < N; ++n) {
      // gather frame [C,H,W]
      TensorT<T> fr(Shape{C, H, W});
      for (std::int64_t c = 0; c < C; ++c)
        std::copy(clip.data() + ((b * C + c) * N + n) * H * W,
                  clip.data() + ((b * C + c) * N + n + 1) * H * W,
                  fr.values_mut().data() + c * H * W);
      fr = gaussian_blur(fr, draw.blur_sigma, cfg.blur_kernel);
      fr = resize_frame(fr, mh, mw, draw.resize_mode);
      fr = add_gaussian_noise(fr, draw.noise_sigma, rng);
      fr = jpeg_proxy(fr, draw.jpeg_quality);
      fr = resize_frame(fr, H / 4, W / 4, ResizeMode::Bicubic);
      for (std::int64_t c = 0; c < C; ++c)
        std::copy(fr.data() + c * (H / 4) * (W / 4), fr.data() + (c + 1) * (H / 4) * (W / 4),
                  lq.values_mut().data() + ((b * C + c) * N + n) * (H / 4) * (W / 4));
    }
  return {std::move(lq), draw};
}

// Structured-text record of a draw, stored next to each degraded clip.
inline std::string draw_record(const DegradationDraw& d, const std::string& clip_name,
                               const std::string& config_hash) {
  std::string s = "# dualx degrade-params v1\n";
  s += "config_hash " + config_hash + "\n";
  s += "clip " + clip_name + "\n";
  s += "seed " + std::to_string(d.seed) + "\n";
  char buf[128];
  std::snprintf(buf, sizeof buf, "blur_sigma %.17g\n", d.blur_sigma);
  s += buf;
  std::snprintf(buf, sizeof buf, "resize_scale %.17g\n", d.resize_scale);
  s += buf;
  s += std::string("resize_mode ") + resize_mode_name(d.resize_mode) + "\n";
  std::snprintf(buf, sizeof buf, "noise_sigma %.17g\n", d.noise_sigma);
  s += buf;
  s += "jpeg_quality " + std::to_string(d.jpeg_quality) + "\n";
  return s;
}

}  // namespace dualx
