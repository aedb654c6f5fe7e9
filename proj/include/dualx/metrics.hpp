#pragma once

#include <algorithm>
#include <cstdio>
#include <string>
#include <vector>

#include "dualx/image_ops.hpp"
#include "dualx/ops.hpp"

// Full-reference quality metrics on [0,1] data. PSNR and SSIM are computed on
// the ITU-R 601 luma of RGB inputs; single-channel inputs are used directly.
// The motion diagnostic estimates per-frame displacement with exhaustive
// block matching.

namespace dualx {

namespace detail {

// Frames of a clip [B,C,N,H,W] or a frame [C,H,W] as luma planes.
template <class T>
std::vector<std::vector<double>> luma_frames(const TensorT<T>& t, std::int64_t& H,
                                             std::int64_t& W) {
  std::vector<std::vector<double>> frames;
  if (t.ndim() == 5 && t.dim(1) == 3) {
    std::int64_t B = t.dim(0), N = t.dim(2);
    H = t.dim(3);
    W = t.dim(4);
    for (std::int64_t b = 0; b < B; ++b)
      for (std::int64_t n = 0; n < N; ++n) {
        std::vector<double> y(static_cast<size_t>(H * W));
        for (std::int64_t c = 0; c < 3; ++c) {
          const double k = c == 0 ? 0.299 : (c == 1 ? 0.587 : 0.114);
          const T* p = t.data() + ((b * 3 + c) * N + n) * H * W;
          for (std::int64_t i = 0; i < H * W; ++i)
            y[static_cast<size_t>(i)] += k * static_cast<double>(p[i]);
        }
        frames.push_back(std::move(y));
      }
    return frames;
  }
  if (t.ndim() == 3 && t.dim(0) == 3) {
    H = t.dim(1);
    W = t.dim(2);
    frames.push_back(luma_plane(t.data(), H, W));
    return frames;
  }
  // anything else: one flat plane per tensor
  H = 1;
  W = t.numel();
  std::vector<double> y(static_cast<size_t>(t.numel()));
  for (std::int64_t i = 0; i < t.numel(); ++i) y[static_cast<size_t>(i)] = t.values()[static_cast<size_t>(i)];
  frames.push_back(std::move(y));
  return frames;
}

}  // namespace detail

constexpr double kPsnrCap = 100.0;  // reported for an exact match (MSE = 0)

// Per-frame PSNR values in dB on [0,1] dynamic range.
template <class T>
std::vector<double> psnr_frames(const TensorT<T>& x, const TensorT<T>& y) {
  if (x.shape() != y.shape())
    throw ShapeError("psnr shape mismatch " + shape_str(x.shape()) + " vs " +
                     shape_str(y.shape()));
  std::int64_t H = 0, W = 0;
  auto fx = detail::luma_frames(x, H, W);
  auto fy = detail::luma_frames(y, H, W);
  std::vector<double> out;
  for (size_t f = 0; f < fx.size(); ++f) {
    double mse = 0.0;
    for (size_t i = 0; i < fx[f].size(); ++i) {
      double d = fx[f][i] - fy[f][i];
      mse += d * d;
    }
    mse /= static_cast<double>(fx[f].size());
    out.push_back(mse == 0.0 ? kPsnrCap : std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse)));
  }
  return out;
}

template <class T>
double psnr(const TensorT<T>& x, const TensorT<T>& y) {
  auto v = psnr_frames(x, y);
  double acc = 0.0;
  for (double d : v) acc += d;
  return acc / static_cast<double>(v.size());
}

namespace detail {

inline const std::vector<double>& ssim_window() {
  // 11x11 Gaussian, sigma 1.5, normalized
  static const std::vector<double> w = [] {
    std::vector<double> k(121);
    double total = 0.0;
    for (int y = -5; y <= 5; ++y)
      for (int x = -5; x <= 5; ++x) {
        double v = std::exp(-(x * x + y * y) / (2.0 * 1.5 * 1.5));
        k[static_cast<size_t>((y + 5) * 11 + (x + 5))] = v;
        total += v;
      }
    for (auto& v : k) v /= total;
    return k;
  }();
  return w;
}

inline double ssim_plane(const std::vector<double>& x, const std::vector<double>& y,
                         std::int64_t H, std::int64_t W) {
  if (H < 11 || W < 11)
    throw ShapeError("ssim needs frames of at least 11x11, got " + std::to_string(H) + "x" +
                     std::to_string(W));
  const auto& win = ssim_window();
  constexpr double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  double total = 0.0;
  std::int64_t count = (H - 10) * (W - 10);
  std::vector<double> map(static_cast<size_t>(count));
  parallel_for(H - 10, [&](std::int64_t oy) {
    for (std::int64_t ox = 0; ox <= W - 11; ++ox) {
      double mx = 0, my = 0;
      for (int wy = 0; wy < 11; ++wy)
        for (int wx = 0; wx < 11; ++wx) {
          double wv = win[static_cast<size_t>(wy * 11 + wx)];
          mx += wv * x[static_cast<size_t>((oy + wy) * W + ox + wx)];
          my += wv * y[static_cast<size_t>((oy + wy) * W + ox + wx)];
        }
      double sxx = 0, syy = 0, sxy = 0;
      for (int wy = 0; wy < 11; ++wy)
        for (int wx = 0; wx < 11; ++wx) {
          double wv = win[static_cast<size_t>(wy * 11 + wx)];
          double dx = x[static_cast<size_t>((oy + wy) * W + ox + wx)] - mx;
          double dy = y[static_cast<size_t>((oy + wy) * W + ox + wx)] - my;
          sxx += wv * (dx * dx);
          syy += wv * (dy * dy);
          sxy += wv * (dx * dy);  // grouped so swapping x and y is bit-exact
        }
      map[static_cast<size_t>(oy * (W - 10) + ox)] =
          ((2 * (mx * my) + c1) * (2 * sxy + c2)) /
          ((mx * mx + my * my + c1) * (sxx + syy + c2));
    }
  });
  for (double v : map) total += v;
  return total / static_cast<double>(count);
}

}  // namespace detail

template <class T>
std::vector<double> ssim_frames(const TensorT<T>& x, const TensorT<T>& y) {
  if (x.shape() != y.shape())
    throw ShapeError("ssim shape mismatch");
  std::int64_t H = 0, W = 0;
  auto fx = detail::luma_frames(x, H, W);
  auto fy = detail::luma_frames(y, H, W);
  std::vector<double> out;
  for (size_t f = 0; f < fx.size(); ++f) out.push_back(detail::ssim_plane(fx[f], fy[f], H, W));
  return out;
}

template <class T>
double ssim(const TensorT<T>& x, const TensorT<T>& y) {
  auto v = ssim_frames(x, y);
  double acc = 0.0;
  for (double d : v) acc += d;
  return acc / static_cast<double>(v.size());
}

// Metric-only charbonnier (no tape).
template <class T>
double charbonnier(const TensorT<T>& x, const TensorT<T>& y, double eps = 1e-6) {
  return static_cast<double>(
      charbonnier_loss<T>(nullptr, x, y, static_cast<T>(eps)).item());
}

// Mean absolute horizontal and vertical displacement per frame pair via
// exhaustive SAD block matching on luma. Blocks whose full search window
// leaves the frame are skipped; if no block qualifies the search range is
// clamped per candidate instead.
template <class T>
std::pair<double, double> motion_amplitude(const TensorT<T>& clip, int block = 16,
                                           int search = 8) {
  if (clip.ndim() != 5) throw ShapeError("motion_amplitude expects [B,C,N,H,W]");
  if (clip.dim(2) < 2) throw ShapeError("motion_amplitude needs at least 2 frames");
  std::int64_t H = 0, W = 0;
  auto frames = detail::luma_frames(clip, H, W);
  if (H < block || W < block)
    throw ShapeError("frames smaller than the matching block");

  std::vector<std::pair<std::int64_t, std::int64_t>> origins;
  bool interior_only = (H >= block + 2 * search) && (W >= block + 2 * search);
  for (std::int64_t by = 0; by + block <= H; by += block)
    for (std::int64_t bx = 0; bx + block <= W; bx += block) {
      if (interior_only &&
          (by < search || bx < search || by + block + search > H || bx + block + search > W))
        continue;
      origins.emplace_back(by, bx);
    }
  if (origins.empty()) {
    for (std::int64_t by = 0; by + block <= H; by += block)
      for (std::int64_t bx = 0; bx + block <= W; bx += block) origins.emplace_back(by, bx);
  }

  double sum_u = 0.0, sum_v = 0.0;
  std::int64_t pairs = static_cast<std::int64_t>(frames.size()) - 1;
  for (std::int64_t f = 0; f < pairs; ++f) {
    const auto& prev = frames[static_cast<size_t>(f)];
    const auto& cur = frames[static_cast<size_t>(f + 1)];
    std::vector<int> dys(origins.size()), dxs(origins.size());
    parallel_for(static_cast<std::int64_t>(origins.size()), [&](std::int64_t i) {
      kernels::block_match(prev.data(), cur.data(), H, W, origins[static_cast<size_t>(i)].first,
                           origins[static_cast<size_t>(i)].second, block, search,
                           &dys[static_cast<size_t>(i)], &dxs[static_cast<size_t>(i)]);
    }, /*grain=*/1);
    double au = 0.0, av = 0.0;
    for (size_t i = 0; i < origins.size(); ++i) {
      au += std::abs(static_cast<double>(dxs[i]));
      av += std::abs(static_cast<double>(dys[i]));
    }
    sum_u += au / static_cast<double>(origins.size());
    sum_v += av / static_cast<double>(origins.size());
  }
  return {sum_u / static_cast<double>(pairs), sum_v / static_cast<double>(pairs)};
}

// One evaluation record per clip, serialized as structured text.
struct MetricsReport {
  std::string clip_name;
  std::string config_hash;
  std::vector<double> psnr_per_frame;
  std::vector<double> ssim_per_frame;
  double psnr_mean = 0.0;
  double ssim_mean = 0.0;
  bool has_motion = false;
  double motion_u = 0.0, motion_v = 0.0;

  std::string to_text() const {
    std::string s;
    char buf[160];
    s += "clip " + (clip_name.empty() ? std::string("-") : clip_name) + "\n";
    if (!config_hash.empty()) s += "config_hash " + config_hash + "\n";
    for (size_t i = 0; i < psnr_per_frame.size(); ++i) {
      std::snprintf(buf, sizeof buf, "frame %zu psnr %.6f ssim %.6f\n", i, psnr_per_frame[i],
                    ssim_per_frame[i]);
      s += buf;
    }
    std::snprintf(buf, sizeof buf, "mean psnr %.6f ssim %.6f\n", psnr_mean, ssim_mean);
    s += buf;
    if (has_motion) {
      std::snprintf(buf, sizeof buf, "motion u %.4f v %.4f\n", motion_u, motion_v);
      s += buf;
    }
    return s;
  }
};

template <class T>
MetricsReport evaluate_clip(const TensorT<T>& test, const TensorT<T>& ref,
                            const std::string& name = "", bool with_motion = false) {
  MetricsReport r;
  r.clip_name = name;
  r.psnr_per_frame = psnr_frames(test, ref);
  r.ssim_per_frame = ssim_frames(test, ref);
  for (double v : r.psnr_per_frame) r.psnr_mean += v;
  r.psnr_mean /= static_cast<double>(r.psnr_per_frame.size());
  for (double v : r.ssim_per_frame) r.ssim_mean += v;
  r.ssim_mean /= static_cast<double>(r.ssim_per_frame.size());
  if (with_motion && test.ndim() == 5 && test.dim(2) >= 2) {
    auto [u, v] = motion_amplitude(test);
    r.has_motion = true;
    r.motion_u = u;
    r.motion_v = v;
  }
  return r;
}

}  // namespace dualx
