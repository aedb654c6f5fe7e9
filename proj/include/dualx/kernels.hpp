#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "dualx/parallel.hpp"

// Hot inner loops. Every kernel exists twice: the OpenMP version used by the
// library, and a plain-loop reference under kernels::serial used by tests and
// the benchmark. The parallel versions partition work by output element and
// keep the per-element accumulation order of the reference, so the two are
// bit-identical at any thread count.

namespace dualx::kernels {

using std::int64_t;

// ---- batched matrix multiply ----------------------------------------------
// C[bt] = op(A)[m,k] * op(B)[k,n], with per-batch base offsets so callers can
// express broadcast batches (offset stride 0). trans flags read the operand
// as its transpose without materializing it.

namespace serial {

template <class T>
void matmul(const T* a, const T* b, T* c, int64_t batch, int64_t m, int64_t k, int64_t n,
            const int64_t* a_off, const int64_t* b_off, bool trans_a = false,
            bool trans_b = false) {
  for (int64_t bt = 0; bt < batch; ++bt) {
    const T* A = a + a_off[bt];
    const T* B = b + b_off[bt];
    T* C = c + bt * m * n;
    for (int64_t i = 0; i < m; ++i)
      for (int64_t j = 0; j < n; ++j) {
        T acc = T(0);
        for (int64_t p = 0; p < k; ++p) {
          T av = trans_a ? A[p * m + i] : A[i * k + p];
          T bv = trans_b ? B[j * k + p] : B[p * n + j];
          acc += av * bv;
        }
        C[i * n + j] = acc;
      }
  }
}

}  // namespace serial

template <class T>
void matmul(const T* a, const T* b, T* c, int64_t batch, int64_t m, int64_t k, int64_t n,
            const int64_t* a_off, const int64_t* b_off, bool trans_a = false,
            bool trans_b = false) {
  parallel_for(batch * m, [&](int64_t r) {
    int64_t bt = r / m, i = r % m;
    const T* A = a + a_off[bt];
    const T* B = b + b_off[bt];
    T* C = c + bt * m * n;
    for (int64_t j = 0; j < n; ++j) {
      T acc = T(0);
      for (int64_t p = 0; p < k; ++p) {
        T av = trans_a ? A[p * m + i] : A[i * k + p];
        T bv = trans_b ? B[j * k + p] : B[p * n + j];
        acc += av * bv;
      }
      C[i * n + j] = acc;
    }
  }, /*grain=*/4);
}

// ---- 2D convolution, 3x3, stride 1, zero padding ---------------------------
// x: [B,Cin,H,W], w: [Cout,Cin,3,3], y: [B,Cout,H,W]

namespace serial {

template <class T>
void conv2d_3x3(const T* x, const T* w, const T* bias, T* y, int64_t B, int64_t cin,
                int64_t cout, int64_t H, int64_t W) {
  for (int64_t b = 0; b < B; ++b)
    for (int64_t co = 0; co < cout; ++co)
      for (int64_t yy = 0; yy < H; ++yy)
        for (int64_t xx = 0; xx < W; ++xx) {
          T acc = bias ? bias[co] : T(0);
          for (int64_t ci = 0; ci < cin; ++ci)
            for (int64_t u = -1; u <= 1; ++u)
              for (int64_t v = -1; v <= 1; ++v) {
                int64_t sy = yy + u, sx = xx + v;
                if (sy < 0 || sy >= H || sx < 0 || sx >= W) continue;
                acc += x[((b * cin + ci) * H + sy) * W + sx] *
                       w[((co * cin + ci) * 3 + (u + 1)) * 3 + (v + 1)];
              }
          y[((b * cout + co) * H + yy) * W + xx] = acc;
        }
}

}  // namespace serial

template <class T>
void conv2d_3x3(const T* x, const T* w, const T* bias, T* y, int64_t B, int64_t cin,
                int64_t cout, int64_t H, int64_t W) {
  parallel_for(B * cout * H, [&](int64_t r) {
    int64_t yy = r % H, co = (r / H) % cout, b = r / (H * cout);
    for (int64_t xx = 0; xx < W; ++xx) {
      T acc = bias ? bias[co] : T(0);
      for (int64_t ci = 0; ci < cin; ++ci)
        for (int64_t u = -1; u <= 1; ++u)
          for (int64_t v = -1; v <= 1; ++v) {
            int64_t sy = yy + u, sx = xx + v;
            if (sy < 0 || sy >= H || sx < 0 || sx >= W) continue;
            acc += x[((b * cin + ci) * H + sy) * W + sx] *
                   w[((co * cin + ci) * 3 + (u + 1)) * 3 + (v + 1)];
          }
      y[((b * cout + co) * H + yy) * W + xx] = acc;
    }
  }, /*grain=*/2);
}

// Gradients. dx/dw/db accumulate (+=) into caller-provided buffers; each
// parallel iteration owns a disjoint slice of the output it writes.

template <class T>
void conv2d_3x3_dx(const T* gy, const T* w, T* gx, int64_t B, int64_t cin, int64_t cout,
                   int64_t H, int64_t W) {
  parallel_for(B * cin * H, [&](int64_t r) {
    int64_t yy = r % H, ci = (r / H) % cin, b = r / (H * cin);
    for (int64_t xx = 0; xx < W; ++xx) {
      T acc = T(0);
      for (int64_t co = 0; co < cout; ++co)
        for (int64_t u = -1; u <= 1; ++u)
          for (int64_t v = -1; v <= 1; ++v) {
            int64_t oy = yy - u, ox = xx - v;
            if (oy < 0 || oy >= H || ox < 0 || ox >= W) continue;
            acc += gy[((b * cout + co) * H + oy) * W + ox] *
                   w[((co * cin + ci) * 3 + (u + 1)) * 3 + (v + 1)];
          }
      gx[((b * cin + ci) * H + yy) * W + xx] += acc;
    }
  }, /*grain=*/2);
}

template <class T>
void conv2d_3x3_dw(const T* gy, const T* x, T* gw, int64_t B, int64_t cin, int64_t cout,
                   int64_t H, int64_t W) {
  parallel_for(cout * cin, [&](int64_t r) {
    int64_t ci = r % cin, co = r / cin;
    for (int64_t u = -1; u <= 1; ++u)
      for (int64_t v = -1; v <= 1; ++v) {
        T acc = T(0);
        for (int64_t b = 0; b < B; ++b)
          for (int64_t yy = 0; yy < H; ++yy)
            for (int64_t xx = 0; xx < W; ++xx) {
              int64_t sy = yy + u, sx = xx + v;
              if (sy < 0 || sy >= H || sx < 0 || sx >= W) continue;
              acc += gy[((b * cout + co) * H + yy) * W + xx] *
                     x[((b * cin + ci) * H + sy) * W + sx];
            }
        gw[((co * cin + ci) * 3 + (u + 1)) * 3 + (v + 1)] += acc;
      }
  }, /*grain=*/1);
}

template <class T>
void conv2d_3x3_db(const T* gy, T* gb, int64_t B, int64_t cout, int64_t H, int64_t W) {
  for (int64_t co = 0; co < cout; ++co) {
    T acc = T(0);
    for (int64_t b = 0; b < B; ++b) {
      const T* p = gy + (b * cout + co) * H * W;
      for (int64_t i = 0; i < H * W; ++i) acc += p[i];
    }
    gb[co] += acc;
  }
}

// ---- 3D convolution, 3x3x3, stride 1, zero padding --------------------------
// x: [B,Cin,N,H,W], w: [Cout,Cin,3,3,3], y: [B,Cout,N,H,W]

namespace serial {

template <class T>
void conv3d_3x3(const T* x, const T* w, const T* bias, T* y, int64_t B, int64_t cin,
                int64_t cout, int64_t N, int64_t H, int64_t W) {
  for (int64_t b = 0; b < B; ++b)
    for (int64_t co = 0; co < cout; ++co)
      for (int64_t t = 0; t < N; ++t)
        for (int64_t yy = 0; yy < H; ++yy)
          for (int64_t xx = 0; xx < W; ++xx) {
            T acc = bias ? bias[co] : T(0);
            for (int64_t ci = 0; ci < cin; ++ci)
              for (int64_t s = -1; s <= 1; ++s)
                for (int64_t u = -1; u <= 1; ++u)
                  for (int64_t v = -1; v <= 1; ++v) {
                    int64_t st = t + s, sy = yy + u, sx = xx + v;
                    if (st < 0 || st >= N || sy < 0 || sy >= H || sx < 0 || sx >= W) continue;
                    acc += x[(((b * cin + ci) * N + st) * H + sy) * W + sx] *
                           w[(((co * cin + ci) * 3 + (s + 1)) * 3 + (u + 1)) * 3 + (v + 1)];
                  }
            y[(((b * cout + co) * N + t) * H + yy) * W + xx] = acc;
          }
}

}  // namespace serial

template <class T>
void conv3d_3x3(const T* x, const T* w, const T* bias, T* y, int64_t B, int64_t cin,
                int64_t cout, int64_t N, int64_t H, int64_t W) {
  parallel_for(B * cout * N * H, [&](int64_t r) {
    int64_t yy = r % H, t = (r / H) % N, co = (r / (H * N)) % cout, b = r / (H * N * cout);
    for (int64_t xx = 0; xx < W; ++xx) {
      T acc = bias ? bias[co] : T(0);
      for (int64_t ci = 0; ci < cin; ++ci)
        for (int64_t s = -1; s <= 1; ++s)
          for (int64_t u = -1; u <= 1; ++u)
            for (int64_t v = -1; v <= 1; ++v) {
              int64_t st = t + s, sy = yy + u, sx = xx + v;
              if (st < 0 || st >= N || sy < 0 || sy >= H || sx < 0 || sx >= W) continue;
              acc += x[(((b * cin + ci) * N + st) * H + sy) * W + sx] *
                     w[(((co * cin + ci) * 3 + (s + 1)) * 3 + (u + 1)) * 3 + (v + 1)];
            }
      y[(((b * cout + co) * N + t) * H + yy) * W + xx] = acc;
    }
  }, /*grain=*/2);
}

template <class T>
void conv3d_3x3_dx(const T* gy, const T* w, T* gx, int64_t B, int64_t cin, int64_t cout,
                   int64_t N, int64_t H, int64_t W) {
  parallel_for(B * cin * N * H, [&](int64_t r) {
    int64_t yy = r % H, t = (r / H) % N, ci = (r / (H * N)) % cin, b = r / (H * N * cin);
    for (int64_t xx = 0; xx < W; ++xx) {
      T acc = T(0);
      for (int64_t co = 0; co < cout; ++co)
        for (int64_t s = -1; s <= 1; ++s)
          for (int64_t u = -1; u <= 1; ++u)
            for (int64_t v = -1; v <= 1; ++v) {
              int64_t ot = t - s, oy = yy - u, ox = xx - v;
              if (ot < 0 || ot >= N || oy < 0 || oy >= H || ox < 0 || ox >= W) continue;
              acc += gy[(((b * cout + co) * N + ot) * H + oy) * W + ox] *
                     w[(((co * cin + ci) * 3 + (s + 1)) * 3 + (u + 1)) * 3 + (v + 1)];
            }
      gx[(((b * cin + ci) * N + t) * H + yy) * W + xx] += acc;
    }
  }, /*grain=*/2);
}

template <class T>
void conv3d_3x3_dw(const T* gy, const T* x, T* gw, int64_t B, int64_t cin, int64_t cout,
                   int64_t N, int64_t H, int64_t W) {
  parallel_for(cout * cin, [&](int64_t r) {
    int64_t ci = r % cin, co = r / cin;
    for (int64_t s = -1; s <= 1; ++s)
      for (int64_t u = -1; u <= 1; ++u)
        for (int64_t v = -1; v <= 1; ++v) {
          T acc = T(0);
          for (int64_t b = 0; b < B; ++b)
            for (int64_t t = 0; t < N; ++t)
              for (int64_t yy = 0; yy < H; ++yy)
                for (int64_t xx = 0; xx < W; ++xx) {
                  int64_t st = t + s, sy = yy + u, sx = xx + v;
                  if (st < 0 || st >= N || sy < 0 || sy >= H || sx < 0 || sx >= W) continue;
                  acc += gy[(((b * cout + co) * N + t) * H + yy) * W + xx] *
                         x[(((b * cin + ci) * N + st) * H + sy) * W + sx];
                }
          gw[(((co * cin + ci) * 3 + (s + 1)) * 3 + (u + 1)) * 3 + (v + 1)] += acc;
        }
  }, /*grain=*/1);
}

template <class T>
void conv3d_3x3_db(const T* gy, T* gb, int64_t B, int64_t cout, int64_t plane) {
  for (int64_t co = 0; co < cout; ++co) {
    T acc = T(0);
    for (int64_t b = 0; b < B; ++b) {
      const T* p = gy + (b * cout + co) * plane;
      for (int64_t i = 0; i < plane; ++i) acc += p[i];
    }
    gb[co] += acc;
  }
}

// ---- separable FIR filter on a plane, reflected borders --------------------

inline int64_t reflect_index(int64_t i, int64_t n) {
  if (n == 1) return 0;
  while (i < 0 || i >= n) {
    if (i < 0) i = -i - 1;
    if (i >= n) i = 2 * n - 1 - i;
  }
  return i;
}

namespace serial {

template <class T>
void filter_rows(const T* in, T* out, int64_t H, int64_t W, const double* k, int64_t radius) {
  for (int64_t y = 0; y < H; ++y)
    for (int64_t x = 0; x < W; ++x) {
      double acc = 0.0;
      for (int64_t d = -radius; d <= radius; ++d)
        acc += k[d + radius] * static_cast<double>(in[y * W + reflect_index(x + d, W)]);
      out[y * W + x] = static_cast<T>(acc);
    }
}

template <class T>
void filter_cols(const T* in, T* out, int64_t H, int64_t W, const double* k, int64_t radius) {
  for (int64_t y = 0; y < H; ++y)
    for (int64_t x = 0; x < W; ++x) {
      double acc = 0.0;
      for (int64_t d = -radius; d <= radius; ++d)
        acc += k[d + radius] * static_cast<double>(in[reflect_index(y + d, H) * W + x]);
      out[y * W + x] = static_cast<T>(acc);
    }
}

}  // namespace serial

template <class T>
void filter_rows(const T* in, T* out, int64_t H, int64_t W, const double* k, int64_t radius) {
  parallel_for(H, [&](int64_t y) {
    for (int64_t x = 0; x < W; ++x) {
      double acc = 0.0;
      for (int64_t d = -radius; d <= radius; ++d)
        acc += k[d + radius] * static_cast<double>(in[y * W + reflect_index(x + d, W)]);
      out[y * W + x] = static_cast<T>(acc);
    }
  }, /*grain=*/8);
}

template <class T>
void filter_cols(const T* in, T* out, int64_t H, int64_t W, const double* k, int64_t radius) {
  parallel_for(H, [&](int64_t y) {
    for (int64_t x = 0; x < W; ++x) {
      double acc = 0.0;
      for (int64_t d = -radius; d <= radius; ++d)
        acc += k[d + radius] * static_cast<double>(in[reflect_index(y + d, H) * W + x]);
      out[y * W + x] = static_cast<T>(acc);
    }
  }, /*grain=*/8);
}

// ---- box mean over [x-left, x+right], reflected borders ---------------------
// Used as the antialias prefilter ahead of downscale resampling; an even box
// width splits as left=(w-1)/2, right=w/2.

namespace serial {

template <class T>
void box_rows(const T* in, T* out, int64_t H, int64_t W, int64_t left, int64_t right) {
  double inv = 1.0 / static_cast<double>(left + right + 1);
  for (int64_t y = 0; y < H; ++y)
    for (int64_t x = 0; x < W; ++x) {
      double acc = 0.0;
      for (int64_t d = -left; d <= right; ++d)
        acc += static_cast<double>(in[y * W + reflect_index(x + d, W)]);
      out[y * W + x] = static_cast<T>(acc * inv);
    }
}

template <class T>
void box_cols(const T* in, T* out, int64_t H, int64_t W, int64_t left, int64_t right) {
  double inv = 1.0 / static_cast<double>(left + right + 1);
  for (int64_t y = 0; y < H; ++y)
    for (int64_t x = 0; x < W; ++x) {
      double acc = 0.0;
      for (int64_t d = -left; d <= right; ++d)
        acc += static_cast<double>(in[reflect_index(y + d, H) * W + x]);
      out[y * W + x] = static_cast<T>(acc * inv);
    }
}

}  // namespace serial

template <class T>
void box_rows(const T* in, T* out, int64_t H, int64_t W, int64_t left, int64_t right) {
  double inv = 1.0 / static_cast<double>(left + right + 1);
  parallel_for(H, [&](int64_t y) {
    for (int64_t x = 0; x < W; ++x) {
      double acc = 0.0;
      for (int64_t d = -left; d <= right; ++d)
        acc += static_cast<double>(in[y * W + reflect_index(x + d, W)]);
      out[y * W + x] = static_cast<T>(acc * inv);
    }
  }, /*grain=*/8);
}

template <class T>
void box_cols(const T* in, T* out, int64_t H, int64_t W, int64_t left, int64_t right) {
  double inv = 1.0 / static_cast<double>(left + right + 1);
  parallel_for(H, [&](int64_t y) {
    for (int64_t x = 0; x < W; ++x) {
      double acc = 0.0;
      for (int64_t d = -left; d <= right; ++d)
        acc += static_cast<double>(in[reflect_index(y + d, H) * W + x]);
      out[y * W + x] = static_cast<T>(acc * inv);
    }
  }, /*grain=*/8);
}

// ---- 1D resampling with a precomputed weight table --------------------------
// Each output position i reads `taps` source samples starting at idx[i].

struct ResampleTable {
  int64_t taps = 0;
  std::vector<int64_t> start;   // per output position
  std::vector<double> weights;  // taps per output position
};

namespace serial {

template <class T>
void resample_rows(const T* in, T* out, int64_t H, int64_t w_in, int64_t w_out,
                   const ResampleTable& tb) {
  for (int64_t y = 0; y < H; ++y)
    for (int64_t x = 0; x < w_out; ++x) {
      double acc = 0.0;
      const double* wp = tb.weights.data() + x * tb.taps;
      for (int64_t t = 0; t < tb.taps; ++t)
        acc += wp[t] * static_cast<double>(in[y * w_in + reflect_index(tb.start[x] + t, w_in)]);
      out[y * w_out + x] = static_cast<T>(acc);
    }
}

template <class T>
void resample_cols(const T* in, T* out, int64_t h_in, int64_t h_out, int64_t W,
                   const ResampleTable& tb) {
  for (int64_t y = 0; y < h_out; ++y)
    for (int64_t x = 0; x < W; ++x) {
      double acc = 0.0;
      const double* wp = tb.weights.data() + y * tb.taps;
      for (int64_t t = 0; t < tb.taps; ++t)
        acc += wp[t] * static_cast<double>(in[reflect_index(tb.start[y] + t, h_in) * W + x]);
      out[y * W + x] = static_cast<T>(acc);
    }
}

}  // namespace serial

template <class T>
void resample_rows(const T* in, T* out, int64_t H, int64_t w_in, int64_t w_out,
                   const ResampleTable& tb) {
  parallel_for(H, [&](int64_t y) {
    for (int64_t x = 0; x < w_out; ++x) {
      double acc = 0.0;
      const double* wp = tb.weights.data() + x * tb.taps;
      for (int64_t t = 0; t < tb.taps; ++t)
        acc += wp[t] * static_cast<double>(in[y * w_in + reflect_index(tb.start[x] + t, w_in)]);
      out[y * w_out + x] = static_cast<T>(acc);
    }
  }, /*grain=*/8);
}

template <class T>
void resample_cols(const T* in, T* out, int64_t h_in, int64_t h_out, int64_t W,
                   const ResampleTable& tb) {
  parallel_for(h_out, [&](int64_t y) {
    for (int64_t x = 0; x < W; ++x) {
      double acc = 0.0;
      const double* wp = tb.weights.data() + y * tb.taps;
      for (int64_t t = 0; t < tb.taps; ++t)
        acc += wp[t] * static_cast<double>(in[reflect_index(tb.start[y] + t, h_in) * W + x]);
      out[y * W + x] = static_cast<T>(acc);
    }
  }, /*grain=*/8);
}

// ---- 8x8 type-II DCT (orthonormal) ------------------------------------------
// Computed in double regardless of the surrounding precision so that
// requantization of already-quantized blocks is an exact fixed point.

namespace detail {

struct Dct8Basis {
  double c[8][8];  // c[u][x] = C(u) * cos((2x+1) u pi / 16)
  Dct8Basis() {
    constexpr double pi = 3.14159265358979323846;
    for (int u = 0; u < 8; ++u) {
      double cu = (u == 0) ? std::sqrt(1.0 / 8.0) : std::sqrt(2.0 / 8.0);
      for (int x = 0; x < 8; ++x) c[u][x] = cu * std::cos((2 * x + 1) * u * pi / 16.0);
    }
  }
};

inline const Dct8Basis& dct8_basis() {
  static const Dct8Basis b;
  return b;
}

}  // namespace detail

inline void dct8x8(const double in[64], double out[64]) {
  const auto& B = detail::dct8_basis();
  double tmp[64];
  for (int y = 0; y < 8; ++y)
    for (int u = 0; u < 8; ++u) {
      double acc = 0.0;
      for (int x = 0; x < 8; ++x) acc += in[y * 8 + x] * B.c[u][x];
      tmp[y * 8 + u] = acc;
    }
  for (int u = 0; u < 8; ++u)
    for (int v = 0; v < 8; ++v) {
      double acc = 0.0;
      for (int y = 0; y < 8; ++y) acc += tmp[y * 8 + u] * B.c[v][y];
      out[v * 8 + u] = acc;
    }
}

inline void idct8x8(const double in[64], double out[64]) {
  const auto& B = detail::dct8_basis();
  double tmp[64];
  for (int v = 0; v < 8; ++v)
    for (int x = 0; x < 8; ++x) {
      double acc = 0.0;
      for (int u = 0; u < 8; ++u) acc += in[v * 8 + u] * B.c[u][x];
      tmp[v * 8 + x] = acc;
    }
  for (int x = 0; x < 8; ++x)
    for (int y = 0; y < 8; ++y) {
      double acc = 0.0;
      for (int v = 0; v < 8; ++v) acc += tmp[v * 8 + x] * B.c[v][y];
      out[y * 8 + x] = acc;
    }
}

// ---- exhaustive block matching ----------------------------------------------
// Best displacement (dy,dx) within +-search minimizing SAD of the `block`-sized
// patch at (by,bx) of `cur` against `prev`. Candidates leaving the frame are
// skipped; (0,0) is evaluated first so flat regions report zero motion.

namespace serial {

template <class T>
void block_match(const T* prev, const T* cur, int64_t H, int64_t W, int64_t by, int64_t bx,
                 int64_t block, int64_t search, int* best_dy, int* best_dx) {
  auto sad = [&](int64_t dy, int64_t dx) {
    double s = 0.0;
    for (int64_t y = 0; y < block; ++y)
      for (int64_t x = 0; x < block; ++x)
        s += std::abs(static_cast<double>(cur[(by + y) * W + bx + x]) -
                      static_cast<double>(prev[(by + dy + y) * W + bx + dx + x]));
    return s;
  };
  double best = sad(0, 0);
  *best_dy = 0;
  *best_dx = 0;
  for (int64_t dy = -search; dy <= search; ++dy)
    for (int64_t dx = -search; dx <= search; ++dx) {
      if (dy == 0 && dx == 0) continue;
      if (by + dy < 0 || by + dy + block > H || bx + dx < 0 || bx + dx + block > W) continue;
      double s = sad(dy, dx);
      if (s < best) {
        best = s;
        *best_dy = static_cast<int>(dy);
        *best_dx = static_cast<int>(dx);
      }
    }
}

}  // namespace serial

// The search for a single block is inherently serial (argmin over an ordered
// scan); parallelism lives at the caller, one block per task.
template <class T>
void block_match(const T* prev, const T* cur, int64_t H, int64_t W, int64_t by, int64_t bx,
                 int64_t block, int64_t search, int* best_dy, int* best_dx) {
  serial::block_match(prev, cur, H, W, by, bx, block, search, best_dy, best_dx);
}

}  // namespace dualx::kernels
