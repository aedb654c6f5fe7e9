#pragma once

#include "dualx/rng.hpp"
#include "dualx/tensor.hpp"

// Procedural test clips: a sum of random sinusoid gratings and Gaussian blobs
// translating at a constant velocity. Smooth, textured, and periodic in
// space, so block matching and SR training both have signal to work with.
// Integer velocities shift the sample grid exactly.

namespace dualx {

template <class T = float>
TensorT<T> make_moving_clip(std::int64_t frames, std::int64_t H, std::int64_t W, double vx,
                            double vy, std::uint64_t seed) {
  Rng rng(seed);
  constexpr int kWaves = 6, kBlobs = 3;
  struct Wave {
    double fx, fy, phase, amp;
  };
  struct Blob {
    double cx, cy, r, amp;
  };
  std::vector<Wave> waves;
  std::vector<Blob> blobs;
  for (int i = 0; i < kWaves; ++i) {
    double fx = rng.next_uniform(1.0, 6.0) * (rng.next_uniform() < 0.5 ? -1.0 : 1.0);
    double fy = rng.next_uniform(1.0, 6.0) * (rng.next_uniform() < 0.5 ? -1.0 : 1.0);
    waves.push_back({fx, fy, rng.next_uniform(0.0, 6.283185307179586),
                     rng.next_uniform(0.05, 0.18)});
  }
  for (int i = 0; i < kBlobs; ++i)
    blobs.push_back({rng.next_uniform(0.0, 1.0), rng.next_uniform(0.0, 1.0),
                     rng.next_uniform(0.08, 0.2), rng.next_uniform(0.1, 0.25)});

  constexpr double two_pi = 6.283185307179586;
  TensorT<T> clip(Shape{1, 3, frames, H, W});
  T* data = clip.values_mut().data();
  for (std::int64_t c = 0; c < 3; ++c) {
    double cshift = 0.15 * static_cast<double>(c);
    for (std::int64_t n = 0; n < frames; ++n) {
      double ox = vx * static_cast<double>(n), oy = vy * static_cast<double>(n);
      for (std::int64_t y = 0; y < H; ++y)
        for (std::int64_t x = 0; x < W; ++x) {
          double u = (static_cast<double>(x) - ox) / static_cast<double>(W);
          double v = (static_cast<double>(y) - oy) / static_cast<double>(H);
          double val = 0.5;
          for (const auto& wv : waves)
            val += wv.amp * std::sin(two_pi * (wv.fx * u + wv.fy * v) + wv.phase + cshift);
          for (const auto& bl : blobs) {
            double du = u - bl.cx - std::floor(u - bl.cx + 0.5);  // periodic distance
            double dv = v - bl.cy - std::floor(v - bl.cy + 0.5);
            val += bl.amp * std::exp(-(du * du + dv * dv) / (2.0 * bl.r * bl.r));
          }
          val = std::min(1.0, std::max(0.0, 0.15 + 0.7 * (val - 0.5) + 0.5 * 0.7));
          data[((c * frames + n) * H + y) * W + x] = static_cast<T>(val);
        }
    }
  }
  return clip;
}

}  // namespace dualx
