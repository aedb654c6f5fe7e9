#pragma once

#include <cstdio>
#include <string>
#include <vector>

#include "dualx/model.hpp"

// Overlapped spatial tiles and temporal windows for full-frame inference.
// Tiles are planned on the LQ grid; each tile is evaluated with a small
// context margin (cropped away after upscaling) and blended with separable
// raised-cosine spatial ramps and triangular temporal ramps, renormalized to
// a partition of unity. A ramp is only applied on sides that actually meet a
// neighboring tile, so a single-tile plan reproduces direct forward exactly.

namespace dualx {

struct TilingConfig {
  int tile = 112;
  int overlap = 16;
  int t_window = 16;
  int t_overlap = 4;
  int context = 8;  // LQ pixels of extra model input around each tile

  void validate() const {
    if (tile < 1 || t_window < 1) throw ConfigError("tile and window must be >= 1");
    if (overlap < 0 || t_overlap < 0 || context < 0)
      throw ConfigError("overlaps and context must be >= 0");
    if (tile < 2 * overlap) throw ConfigError("tile size must be at least twice the overlap");
    if (t_window <= t_overlap && t_overlap > 0)
      throw ConfigError("temporal window must exceed the temporal overlap");
  }
};

struct TileRect {
  std::int64_t y = 0, x = 0, h = 0, w = 0;
};

struct TimeWindow {
  std::int64_t start = 0, len = 0;
};

struct TilePlan {
  std::int64_t frame_h = 0, frame_w = 0, frames = 0;
  TilingConfig cfg;
  std::vector<TileRect> tiles;
  std::vector<TimeWindow> windows;
};

namespace detail {

inline std::vector<std::int64_t> tile_starts(std::int64_t extent, std::int64_t tile,
                                             std::int64_t stride) {
  std::vector<std::int64_t> starts;
  if (extent <= tile) {
    starts.push_back(0);
    return starts;
  }
  for (std::int64_t s = 0;; s += stride) {
    if (s + tile >= extent) {
      starts.push_back(extent - tile);  // clamp the last tile to the border
      break;
    }
    starts.push_back(s);
  }
  return starts;
}

}  // namespace detail

inline TilePlan plan_tiles(std::int64_t H, std::int64_t W, std::int64_t N,
                           const TilingConfig& cfg) {
  cfg.validate();
  TilePlan plan;
  plan.frame_h = H;
  plan.frame_w = W;
  plan.frames = N;
  plan.cfg = cfg;
  std::int64_t stride = std::max<std::int64_t>(1, cfg.tile - cfg.overlap);
  auto ys = detail::tile_starts(H, cfg.tile, stride);
  auto xs = detail::tile_starts(W, cfg.tile, stride);
  for (auto y : ys)
    for (auto x : xs)
      plan.tiles.push_back({y, x, std::min<std::int64_t>(cfg.tile, H),
                            std::min<std::int64_t>(cfg.tile, W)});
  std::int64_t tstride = std::max<std::int64_t>(1, cfg.t_window - cfg.t_overlap);
  for (auto s : detail::tile_starts(N, cfg.t_window, tstride))
    plan.windows.push_back({s, std::min<std::int64_t>(cfg.t_window, N)});
  return plan;
}

// Raised-cosine ramp of one tile along one axis at output resolution `scale`.
// The band covers overlap*scale samples on each side that meets a neighbor.
inline std::vector<double> tile_ramp(const TilePlan& plan, const TileRect& t, bool vertical,
                                     std::int64_t scale) {
  std::int64_t lo = vertical ? t.y : t.x;
  std::int64_t len = (vertical ? t.h : t.w) * scale;
  std::int64_t extent = (vertical ? plan.frame_h : plan.frame_w);
  std::int64_t band = static_cast<std::int64_t>(plan.cfg.overlap) * scale;
  bool ramp_lo = lo > 0, ramp_hi = lo + (vertical ? t.h : t.w) < extent;
  std::vector<double> w(static_cast<size_t>(len), 1.0);
  constexpr double pi = 3.14159265358979323846;
  for (std::int64_t i = 0; i < band && i < len; ++i) {
    double r = 0.5 - 0.5 * std::cos(pi * (static_cast<double>(i) + 0.5) / static_cast<double>(band));
    if (ramp_lo) w[static_cast<size_t>(i)] = std::min(w[static_cast<size_t>(i)], r);
    if (ramp_hi) w[static_cast<size_t>(len - 1 - i)] = std::min(w[static_cast<size_t>(len - 1 - i)], r);
  }
  return w;
}

// Triangular temporal ramp of one window.
inline std::vector<double> window_ramp(const TilePlan& plan, const TimeWindow& win) {
  std::int64_t band = plan.cfg.t_overlap;
  bool ramp_lo = win.start > 0, ramp_hi = win.start + win.len < plan.frames;
  std::vector<double> w(static_cast<size_t>(win.len), 1.0);
  for (std::int64_t i = 0; i < band && i < win.len; ++i) {
    double r = (static_cast<double>(i) + 1.0) / (static_cast<double>(band) + 1.0);
    if (ramp_lo) w[static_cast<size_t>(i)] = std::min(w[static_cast<size_t>(i)], r);
    if (ramp_hi)
      w[static_cast<size_t>(win.len - 1 - i)] = std::min(w[static_cast<size_t>(win.len - 1 - i)], r);
  }
  return w;
}

// Raw (pre-normalization) blend-weight sum at LQ resolution, for coverage
// checks and the plan dump: [frames, H, W].
inline std::vector<double> coverage_map(const TilePlan& plan) {
  std::vector<double> cov(
      static_cast<size_t>(plan.frames * plan.frame_h * plan.frame_w), 0.0);
  for (const auto& win : plan.windows) {
    auto wt = window_ramp(plan, win);
    for (const auto& t : plan.tiles) {
      auto wy = tile_ramp(plan, t, true, 1);
      auto wx = tile_ramp(plan, t, false, 1);
      for (std::int64_t f = 0; f < win.len; ++f)
        for (std::int64_t y = 0; y < t.h; ++y)
          for (std::int64_t x = 0; x < t.w; ++x)
            cov[static_cast<size_t>(((win.start + f) * plan.frame_h + t.y + y) * plan.frame_w +
                                    t.x + x)] +=
                wt[static_cast<size_t>(f)] * wy[static_cast<size_t>(y)] *
                wx[static_cast<size_t>(x)];
    }
  }
  return cov;
}

inline std::string plan_text(const TilePlan& plan) {
  std::string s = "# dualx tile-plan v1\n";
  char buf[160];
  std::snprintf(buf, sizeof buf, "frame %lld x %lld frames %lld\n",
                static_cast<long long>(plan.frame_h), static_cast<long long>(plan.frame_w),
                static_cast<long long>(plan.frames));
  s += buf;
  std::snprintf(buf, sizeof buf, "tile %d overlap %d t_window %d t_overlap %d context %d\n",
                plan.cfg.tile, plan.cfg.overlap, plan.cfg.t_window, plan.cfg.t_overlap,
                plan.cfg.context);
  s += buf;
  for (const auto& t : plan.tiles) {
    std::snprintf(buf, sizeof buf, "tile y %lld x %lld h %lld w %lld\n",
                  static_cast<long long>(t.y), static_cast<long long>(t.x),
                  static_cast<long long>(t.h), static_cast<long long>(t.w));
    s += buf;
  }
  for (const auto& w : plan.windows) {
    std::snprintf(buf, sizeof buf, "window start %lld len %lld\n",
                  static_cast<long long>(w.start), static_cast<long long>(w.len));
    s += buf;
  }
  return s;
}

namespace detail {

// Crops [window x rect] out of the clip and reflect-pads to the requested
// extents (pad >= 0 on the trailing side of each axis).
template <class T>
TensorT<T> crop_pad_clip(const TensorT<T>& clip, std::int64_t n0, std::int64_t n_len,
                         std::int64_t y0, std::int64_t h, std::int64_t x0, std::int64_t w,
                         std::int64_t n_out, std::int64_t h_out, std::int64_t w_out) {
  std::int64_t B = clip.dim(0), C = clip.dim(1), N = clip.dim(2), H = clip.dim(3),
               W = clip.dim(4);
  (void)N;
  TensorT<T> out(Shape{B, C, n_out, h_out, w_out});
  const T* src = clip.data();
  T* dst = out.values_mut().data();
  for (std::int64_t b = 0; b < B; ++b)
    for (std::int64_t c = 0; c < C; ++c)
      for (std::int64_t n = 0; n < n_out; ++n) {
        std::int64_t sn = n0 + kernels::reflect_index(n, n_len);
        for (std::int64_t y = 0; y < h_out; ++y) {
          std::int64_t sy = y0 + kernels::reflect_index(y, h);
          for (std::int64_t x = 0; x < w_out; ++x) {
            std::int64_t sx = x0 + kernels::reflect_index(x, w);
            dst[(((b * C + c) * n_out + n) * h_out + y) * w_out + x] =
                src[(((b * C + c) * clip.dim(2) + sn) * H + sy) * W + sx];
          }
        }
      }
  return out;
}

}  // namespace detail

// Runs the model tile-by-tile and window-by-window over the LQ clip and
// blends the upscaled outputs. Deterministic: tiles accumulate in plan order.
template <class T>
TensorT<T> tiled_forward(const TensorT<T>& lq, const ModelWeightsT<T>& weights,
                         const TilePlan& plan) {
  const ModelConfig& cfg = weights.cfg;
  std::int64_t B = lq.dim(0), N = lq.dim(2), H = lq.dim(3), W = lq.dim(4);
  if (H != plan.frame_h || W != plan.frame_w || N != plan.frames)
    throw ShapeError("tile plan geometry does not match the clip");
  std::int64_t s = cfg.upscale;
  TensorT<T> accum(Shape{B, 3, N, H * s, W * s});
  std::vector<double> wsum(static_cast<size_t>(N * H * s * W * s), 0.0);

  auto round_up = [](std::int64_t v, std::int64_t m) { return ((v + m - 1) / m) * m; };

  for (const auto& win : plan.windows) {
    auto wt = window_ramp(plan, win);
    for (const auto& tile : plan.tiles) {
      // context-expanded input rect, clamped to the frame
      std::int64_t iy = std::max<std::int64_t>(0, tile.y - plan.cfg.context);
      std::int64_t ix = std::max<std::int64_t>(0, tile.x - plan.cfg.context);
      std::int64_t ih = std::min<std::int64_t>(H, tile.y + tile.h + plan.cfg.context) - iy;
      std::int64_t iw = std::min<std::int64_t>(W, tile.x + tile.w + plan.cfg.context) - ix;
      std::int64_t ph = round_up(ih, cfg.patch_h);
      std::int64_t pw = round_up(iw, cfg.patch_w);
      std::int64_t pn = round_up(win.len, cfg.patch_n);
      TensorT<T> sub =
          detail::crop_pad_clip(lq, win.start, win.len, iy, ih, ix, iw, pn, ph, pw);
      TensorT<T> y = forward(static_cast<TapeT<T>*>(nullptr), sub, weights);

      auto wy = tile_ramp(plan, tile, true, s);
      auto wx = tile_ramp(plan, tile, false, s);
      std::int64_t oy = (tile.y - iy) * s, ox = (tile.x - ix) * s;
      const T* yp = y.data();
      T* ap = accum.values_mut().data();
      std::int64_t th = tile.h * s, tw = tile.w * s;
      for (std::int64_t f = 0; f < win.len; ++f) {
        double tf = wt[static_cast<size_t>(f)];
        std::int64_t of = win.start + f;
        parallel_for(th, [&](std::int64_t yy) {
          double wyv = tf * wy[static_cast<size_t>(yy)];
          for (std::int64_t b = 0; b < B; ++b)
            for (std::int64_t c = 0; c < 3; ++c) {
              const T* row =
                  yp + (((b * 3 + c) * pn + f) * ph * s + oy + yy) * pw * s + ox;
              T* orow =
                  ap + (((b * 3 + c) * N + of) * H * s + tile.y * s + yy) * W * s + tile.x * s;
              for (std::int64_t xx = 0; xx < tw; ++xx)
                orow[xx] += static_cast<T>(wyv * wx[static_cast<size_t>(xx)] *
                                           static_cast<double>(row[xx]));
            }
        }, /*grain=*/8);
        parallel_for(th, [&](std::int64_t yy) {
          double wyv = tf * wy[static_cast<size_t>(yy)];
          double* wrow =
              wsum.data() + (of * H * s + tile.y * s + yy) * W * s + tile.x * s;
          for (std::int64_t xx = 0; xx < tw; ++xx)
            wrow[xx] += wyv * wx[static_cast<size_t>(xx)];
        }, /*grain=*/8);
      }
    }
  }

  // renormalize to a partition of unity
  for (double wv : wsum)
    if (wv <= 0.0) throw NumericError("tile plan leaves uncovered output pixels");
  T* ap = accum.values_mut().data();
  std::int64_t plane = N * H * s * W * s;
  parallel_for(plane, [&](std::int64_t i) {
    double wv = wsum[static_cast<size_t>(i)];
    for (std::int64_t b = 0; b < B; ++b)
      for (std::int64_t c = 0; c < 3; ++c)
        ap[(b * 3 + c) * plane + i] =
            static_cast<T>(static_cast<double>(ap[(b * 3 + c) * plane + i]) / wv);
  });
  return accum;
}

}  // namespace dualx
