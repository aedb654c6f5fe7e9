#pragma once

#include <cmath>

#include "dualx/kernels.hpp"
#include "dualx/tensor.hpp"

// Plane/frame/clip resampling and filtering. Frames are [C,H,W], clips are
// [B,C,N,H,W]. Everything here is pure and accumulates in double.

namespace dualx {

enum class ResizeMode { Bicubic, Bilinear, Nearest };

inline const char* resize_mode_name(ResizeMode m) {
  switch (m) {
    case ResizeMode::Bicubic: return "bicubic";
    case ResizeMode::Bilinear: return "bilinear";
    case ResizeMode::Nearest: return "nearest";
  }
  return "?";
}

namespace detail {

// Catmull-Rom-family cubic, a = -0.5.
inline double cubic_kernel(double x) {
  constexpr double a = -0.5;
  x = std::abs(x);
  if (x < 1.0) return ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0;
  if (x < 2.0) return ((a * x - 5.0 * a) * x + 8.0 * a) * x - 4.0 * a;
  return 0.0;
}

// Output position i samples the source at (i + 0.5) * in/out - 0.5.
inline kernels::ResampleTable make_resample_table(std::int64_t in_len, std::int64_t out_len,
                                                  ResizeMode mode) {
  kernels::ResampleTable tb;
  double ratio = static_cast<double>(in_len) / static_cast<double>(out_len);
  switch (mode) {
    case ResizeMode::Bicubic: tb.taps = 4; break;
    case ResizeMode::Bilinear: tb.taps = 2; break;
    case ResizeMode::Nearest: tb.taps = 1; break;
  }
  tb.start.resize(static_cast<size_t>(out_len));
  tb.weights.resize(static_cast<size_t>(out_len * tb.taps));
  for (std::int64_t i = 0; i < out_len; ++i) {
    double src = (static_cast<double>(i) + 0.5) * ratio - 0.5;
    double* w = tb.weights.data() + i * tb.taps;
    if (mode == ResizeMode::Nearest) {
      tb.start[static_cast<size_t>(i)] =
          static_cast<std::int64_t>(std::floor(src + 0.5));
      w[0] = 1.0;
      continue;
    }
    std::int64_t s = static_cast<std::int64_t>(std::floor(src)) -
                     (mode == ResizeMode::Bicubic ? 1 : 0);
    tb.start[static_cast<size_t>(i)] = s;
    double total = 0.0;
    for (std::int64_t t = 0; t < tb.taps; ++t) {
      double d = src - static_cast<double>(s + t);
      w[t] = (mode == ResizeMode::Bicubic) ? cubic_kernel(d) : std::max(0.0, 1.0 - std::abs(d));
      total += w[t];
    }
    for (std::int64_t t = 0; t < tb.taps; ++t) w[t] /= total;  // exact partition of unity
  }
  return tb;
}

}  // namespace detail

// Resizes one [H,W] plane. Downscaling with bicubic or bilinear first runs a
// box prefilter of width round(in/out) per axis as antialiasing; nearest
// stays raw.
template <class T>
void resize_plane(const T* in, std::int64_t h_in, std::int64_t w_in, T* out, std::int64_t h_out,
                  std::int64_t w_out, ResizeMode mode) {
  if (h_out == h_in && w_out == w_in) {
    std::copy(in, in + h_in * w_in, out);
    return;
  }
  std::vector<T> tmp_a, tmp_b;
  const T* src = in;
  std::int64_t H = h_in, W = w_in;
  if (mode != ResizeMode::Nearest) {
    std::int64_t bw = (w_out < w_in) ? (w_in + w_out / 2) / w_out : 1;
    std::int64_t bh = (h_out < h_in) ? (h_in + h_out / 2) / h_out : 1;
    if (bw > 1) {
      tmp_a.resize(static_cast<size_t>(H * W));
      kernels::box_rows(src, tmp_a.data(), H, W, (bw - 1) / 2, bw / 2);
      src = tmp_a.data();
    }
    if (bh > 1) {
      tmp_b.resize(static_cast<size_t>(H * W));
      kernels::box_cols(src, tmp_b.data(), H, W, (bh - 1) / 2, bh / 2);
      src = tmp_b.data();
    }
  }
  kernels::ResampleTable rt = detail::make_resample_table(w_in, w_out, mode);
  kernels::ResampleTable ct = detail::make_resample_table(h_in, h_out, mode);
  std::vector<T> mid(static_cast<size_t>(H * w_out));
  kernels::resample_rows(src, mid.data(), H, w_in, w_out, rt);
  kernels::resample_cols(mid.data(), out, h_in, h_out, w_out, ct);
}

// frame: [C,H,W]
template <class T>
TensorT<T> resize_frame(const TensorT<T>& frame, std::int64_t out_h, std::int64_t out_w,
                        ResizeMode mode) {
  if (frame.ndim() != 3) throw ShapeError("resize_frame expects [C,H,W]");
  if (out_h < 1 || out_w < 1) throw ConfigError("resize target extent below 1");
  std::int64_t C = frame.dim(0), H = frame.dim(1), W = frame.dim(2);
  TensorT<T> out(Shape{C, out_h, out_w});
  for (std::int64_t c = 0; c < C; ++c)
    resize_plane(frame.data() + c * H * W, H, W, out.values_mut().data() + c * out_h * out_w,
                 out_h, out_w, mode);
  return out;
}

template <class T>
TensorT<T> resize_frame_scale(const TensorT<T>& frame, double scl, ResizeMode mode) {
  if (!(scl > 0.0)) throw ConfigError("resize scale must be positive");
  auto round_extent = [&](std::int64_t e) {
    return static_cast<std::int64_t>(std::llround(static_cast<double>(e) * scl));
  };
  std::int64_t oh = round_extent(frame.dim(1)), ow = round_extent(frame.dim(2));
  if (oh < 1 || ow < 1) throw ConfigError("resize scale yields empty output");
  return resize_frame(frame, oh, ow, mode);
}

// clip: [B,C,N,H,W], resized frame by frame
template <class T>
TensorT<T> resize_clip(const TensorT<T>& clip, std::int64_t out_h, std::int64_t out_w,
                       ResizeMode mode) {
  if (clip.ndim() != 5) throw ShapeError("resize_clip expects [B,C,N,H,W]");
  std::int64_t B = clip.dim(0), C = clip.dim(1), N = clip.dim(2), H = clip.dim(3),
               W = clip.dim(4);
  TensorT<T> out(Shape{B, C, N, out_h, out_w});
  for (std::int64_t b = 0; b < B; ++b)
    for (std::int64_t c = 0; c < C; ++c)
      for (std::int64_t n = 0; n < N; ++n) {
        const T* src = clip.data() + ((b * C + c) * N + n) * H * W;
        T* dst = out.values_mut().data() + ((b * C + c) * N + n) * out_h * out_w;
        resize_plane(src, H, W, dst, out_h, out_w, mode);
      }
  return out;
}

// Isotropic Gaussian blur, separable, reflect-padded, kernel normalized to
// sum 1. sigma = 0 is the identity.
template <class T>
TensorT<T> gaussian_blur(const TensorT<T>& frame, double sigma, int kernel_size = 21) {
  if (frame.ndim() != 3) throw ShapeError("gaussian_blur expects [C,H,W]");
  if (sigma < 0.0) throw ConfigError("blur sigma must be >= 0");
  if (kernel_size < 1 || kernel_size % 2 == 0)
    throw ConfigError("blur kernel size must be odd and positive");
  if (sigma == 0.0) return frame.clone();
  std::int64_t radius = kernel_size / 2;
  std::vector<double> k(static_cast<size_t>(kernel_size));
  double total = 0.0;
  for (std::int64_t i = -radius; i <= radius; ++i) {
    double v = std::exp(-0.5 * static_cast<double>(i * i) / (sigma * sigma));
    k[static_cast<size_t>(i + radius)] = v;
    total += v;
  }
  for (auto& v : k) v /= total;
  std::int64_t C = frame.dim(0), H = frame.dim(1), W = frame.dim(2);
  TensorT<T> out(frame.shape());
  std::vector<T> mid(static_cast<size_t>(H * W));
  for (std::int64_t c = 0; c < C; ++c) {
    kernels::filter_rows(frame.data() + c * H * W, mid.data(), H, W, k.data(), radius);
    kernels::filter_cols(mid.data(), out.values_mut().data() + c * H * W, H, W, k.data(),
                         radius);
  }
  return out;
}

// ITU-R 601 luma of an RGB frame [3,H,W] -> [H,W] doubles.
template <class T>
std::vector<double> luma_plane(const T* rgb, std::int64_t H, std::int64_t W) {
  std::vector<double> y(static_cast<size_t>(H * W));
  const T* r = rgb;
  const T* g = rgb + H * W;
  const T* b = rgb + 2 * H * W;
  for (std::int64_t i = 0; i < H * W; ++i)
    y[static_cast<size_t>(i)] = 0.299 * static_cast<double>(r[i]) +
                                0.587 * static_cast<double>(g[i]) +
                                0.114 * static_cast<double>(b[i]);
  return y;
}

template <class T>
void clamp01(TensorT<T>& t) {
  for (auto& v : t.values_mut()) v = std::min(T(1), std::max(T(0), v));
}

}  // namespace dualx
