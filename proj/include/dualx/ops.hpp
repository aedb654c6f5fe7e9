#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>

#include "dualx/autograd.hpp"
#include "dualx/kernels.hpp"
#include "dualx/parallel.hpp"
#include "dualx/tensor.hpp"

// Differentiable primitives. Each op computes its value, and when a tape is
// supplied and any input is tracked, records a closure that accumulates into
// the input gradients. Broadcasting follows the trailing-dimension rule: a
// missing or size-1 leading axis repeats. Reductions and normalizers
// accumulate in double so float results stay within the stated tolerances.

namespace dualx {

inline Shape broadcast_shape(const Shape& a, const Shape& b) {
  size_t n = std::max(a.size(), b.size());
  Shape out(n);
  for (size_t i = 0; i < n; ++i) {
    std::int64_t ea = (i < n - a.size()) ? 1 : a[i - (n - a.size())];
    std::int64_t eb = (i < n - b.size()) ? 1 : b[i - (n - b.size())];
    if (ea != eb && ea != 1 && eb != 1)
      throw ShapeError("cannot broadcast " + shape_str(a) + " with " + shape_str(b));
    out[i] = std::max(ea, eb);
  }
  return out;
}

namespace detail {

// Right-aligned strides of `s` inside broadcast shape `os`; 0 marks repeats.
inline Shape broadcast_strides(const Shape& s, const Shape& os) {
  Shape st(os.size(), 0);
  Shape own = row_major_strides(s);
  size_t shift = os.size() - s.size();
  for (size_t i = 0; i < s.size(); ++i)
    st[shift + i] = (s[i] == 1 && os[shift + i] != 1) ? 0 : own[i];
  return st;
}

inline bool is_suffix(const Shape& s, const Shape& os) {
  if (s.size() > os.size()) return false;
  for (size_t i = 0; i < s.size(); ++i)
    if (s[i] != os[os.size() - s.size() + i]) return false;
  return true;
}

template <class T, class F>
void broadcast_apply(const T* a, const Shape& sa, const T* b, const Shape& sb, T* out,
                     const Shape& so, F&& f) {
  std::int64_t n = numel(so);
  if (sa == so && sb == so) {
    parallel_for(n, [&](std::int64_t i) { out[i] = f(a[i], b[i]); });
    return;
  }
  if (sa == so && is_suffix(sb, so)) {
    std::int64_t nb = numel(sb);
    parallel_for(n, [&](std::int64_t i) { out[i] = f(a[i], b[i % nb]); });
    return;
  }
  if (sb == so && is_suffix(sa, so)) {
    std::int64_t na = numel(sa);
    parallel_for(n, [&](std::int64_t i) { out[i] = f(a[i % na], b[i]); });
    return;
  }
  Shape sta = broadcast_strides(sa, so), stb = broadcast_strides(sb, so);
  Shape sto = row_major_strides(so);
  parallel_for(n, [&](std::int64_t i) {
    std::int64_t oa = 0, ob = 0, rem = i;
    for (size_t d = 0; d < so.size(); ++d) {
      std::int64_t id = rem / sto[d];
      rem -= id * sto[d];
      oa += id * sta[d];
      ob += id * stb[d];
    }
    out[i] = f(a[oa], b[ob]);
  });
}

// target_grad[reduce(i)] += g[i], summing over broadcast axes in increasing
// linear order (deterministic).
template <class T>
void reduce_accumulate(const T* g, const Shape& gs, std::vector<T>& target,
                       const Shape& ts) {
  std::int64_t n = numel(gs);
  if (ts == gs) {
    for (std::int64_t i = 0; i < n; ++i) target[static_cast<size_t>(i)] += g[i];
    return;
  }
  if (is_suffix(ts, gs)) {
    std::int64_t nt = numel(ts);
    for (std::int64_t i = 0; i < n; ++i) target[static_cast<size_t>(i % nt)] += g[i];
    return;
  }
  Shape stt = broadcast_strides(ts, gs);
  Shape stg = row_major_strides(gs);
  for (std::int64_t i = 0; i < n; ++i) {
    std::int64_t ot = 0, rem = i;
    for (size_t d = 0; d < gs.size(); ++d) {
      std::int64_t id = rem / stg[d];
      rem -= id * stg[d];
      ot += id * stt[d];
    }
    target[static_cast<size_t>(ot)] += g[i];
  }
}

template <class T>
bool track(TapeT<T>* tape, std::initializer_list<const TensorT<T>*> ins) {
  if (!tape) return false;
  for (auto* t : ins)
    if (t->requires_grad()) return true;
  return false;
}

// Batched matmul bookkeeping: per-broadcast-batch base offsets into a and b.
struct BatchMap {
  std::int64_t batch = 1;
  Shape batch_shape;
  std::vector<std::int64_t> a_off, b_off;
};

inline BatchMap make_batch_map(const Shape& sa, const Shape& sb) {
  Shape la(sa.begin(), sa.end() - 2), lb(sb.begin(), sb.end() - 2);
  BatchMap m;
  m.batch_shape = broadcast_shape(la, lb);
  m.batch = numel(m.batch_shape);
  Shape sta = broadcast_strides(la, m.batch_shape);
  Shape stb = broadcast_strides(lb, m.batch_shape);
  Shape sto = row_major_strides(m.batch_shape);
  std::int64_t mat_a = sa[sa.size() - 2] * sa[sa.size() - 1];
  std::int64_t mat_b = sb[sb.size() - 2] * sb[sb.size() - 1];
  m.a_off.resize(static_cast<size_t>(m.batch));
  m.b_off.resize(static_cast<size_t>(m.batch));
  for (std::int64_t i = 0; i < m.batch; ++i) {
    std::int64_t oa = 0, ob = 0, rem = i;
    for (size_t d = 0; d < m.batch_shape.size(); ++d) {
      std::int64_t id = rem / sto[d];
      rem -= id * sto[d];
      oa += id * sta[d];
      ob += id * stb[d];
    }
    m.a_off[static_cast<size_t>(i)] = oa * mat_a;
    m.b_off[static_cast<size_t>(i)] = ob * mat_b;
  }
  return m;
}

}  // namespace detail

// ---- elementwise -----------------------------------------------------------

template <class T>
TensorT<T> add(TapeT<T>* tape, const TensorT<T>& a, const TensorT<T>& b) {
  Shape os = broadcast_shape(a.shape(), b.shape());
  TensorT<T> out(os);
  detail::broadcast_apply(a.data(), a.shape(), b.data(), b.shape(), out.values_mut().data(),
                          os, [](T x, T y) { return x + y; });
  if (detail::track(tape, {&a, &b})) {
    out.set_requires_grad(true);
    TensorT<T> ta = a, tb = b, to = out;
    tape->record([ta, tb, to]() mutable {
      if (ta.requires_grad())
        detail::reduce_accumulate(to.grad().data(), to.shape(), ta.grad_mut(), ta.shape());
      if (tb.requires_grad())
        detail::reduce_accumulate(to.grad().data(), to.shape(), tb.grad_mut(), tb.shape());
    });
  }
  return out;
}

template <class T>
TensorT<T> sub(TapeT<T>* tape, const TensorT<T>& a, const TensorT<T>& b) {
  Shape os = broadcast_shape(a.shape(), b.shape());
  TensorT<T> out(os);
  detail::broadcast_apply(a.data(), a.shape(), b.data(), b.shape(), out.values_mut().data(),
                          os, [](T x, T y) { return x - y; });
  if (detail::track(tape, {&a, &b})) {
    out.set_requires_grad(true);
    TensorT<T> ta = a, tb = b, to = out;
    tape->record([ta, tb, to]() mutable {
      if (ta.requires_grad())
        detail::reduce_accumulate(to.grad().data(), to.shape(), ta.grad_mut(), ta.shape());
      if (tb.requires_grad()) {
        std::vector<T> neg(to.grad().size());
        for (size_t i = 0; i < neg.size(); ++i) neg[i] = -to.grad()[i];
        detail::reduce_accumulate(neg.data(), to.shape(), tb.grad_mut(), tb.shape());
      }
    });
  }
  return out;
}

template <class T>
TensorT<T> mul(TapeT<T>* tape, const TensorT<T>& a, const TensorT<T>& b) {
  Shape os = broadcast_shape(a.shape(), b.shape());
  TensorT<T> out(os);
  detail::broadcast_apply(a.data(), a.shape(), b.data(), b.shape(), out.values_mut().data(),
                          os, [](T x, T y) { return x * y; });
  if (detail::track(tape, {&a, &b})) {
    out.set_requires_grad(true);
    TensorT<T> ta = a, tb = b, to = out;
    Shape osc = os;
    tape->record([ta, tb, to, osc]() mutable {
      std::vector<T> tmp(static_cast<size_t>(numel(osc)));
      if (ta.requires_grad()) {
        detail::broadcast_apply(to.grad().data(), osc, tb.data(), tb.shape(), tmp.data(), osc,
                                [](T g, T y) { return g * y; });
        detail::reduce_accumulate(tmp.data(), osc, ta.grad_mut(), ta.shape());
      }
      if (tb.requires_grad()) {
        detail::broadcast_apply(to.grad().data(), osc, ta.data(), ta.shape(), tmp.data(), osc,
                                [](T g, T x) { return g * x; });
        detail::reduce_accumulate(tmp.data(), osc, tb.grad_mut(), tb.shape());
      }
    });
  }
  return out;
}

template <class T>
TensorT<T> scale(TapeT<T>* tape, const TensorT<T>& a, T c) {
  TensorT<T> out(a.shape());
  const auto& av = a.values();
  auto& ov = out.values_mut();
  parallel_for(a.numel(), [&](std::int64_t i) { ov[static_cast<size_t>(i)] = c * av[static_cast<size_t>(i)]; });
  if (detail::track(tape, {&a})) {
    out.set_requires_grad(true);
    TensorT<T> ta = a, to = out;
    tape->record([ta, to, c]() mutable {
      auto& g = ta.grad_mut();
      const auto& og = to.grad();
      for (size_t i = 0; i < g.size(); ++i) g[i] += c * og[i];
    });
  }
  return out;
}

template <class T>
TensorT<T> add_scalar(TapeT<T>* tape, const TensorT<T>& a, T c) {
  TensorT<T> out(a.shape());
  const auto& av = a.values();
  auto& ov = out.values_mut();
  for (size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] + c;
  if (detail::track(tape, {&a})) {
    out.set_requires_grad(true);
    TensorT<T> ta = a, to = out;
    tape->record([ta, to]() mutable {
      auto& g = ta.grad_mut();
      const auto& og = to.grad();
      for (size_t i = 0; i < g.size(); ++i) g[i] += og[i];
    });
  }
  return out;
}

// ---- structure -------------------------------------------------------------

template <class T>
TensorT<T> reshape(TapeT<T>* tape, const TensorT<T>& t, Shape ns) {
  if (numel(ns) != t.numel())
    throw ShapeError("reshape " + shape_str(t.shape()) + " -> " + shape_str(ns) +
                     " changes element count");
  TensorT<T> out(std::move(ns));
  out.values_mut() = t.values();
  if (detail::track(tape, {&t})) {
    out.set_requires_grad(true);
    TensorT<T> tt = t, to = out;
    tape->record([tt, to]() mutable {
      auto& g = tt.grad_mut();
      const auto& og = to.grad();
      for (size_t i = 0; i < g.size(); ++i) g[i] += og[i];
    });
  }
  return out;
}

namespace detail {

template <class T>
void permute_copy(const T* src, const Shape& src_shape, T* dst,
                  const std::vector<int>& order) {
  Shape src_st = row_major_strides(src_shape);
  Shape out_shape(order.size());
  for (size_t i = 0; i < order.size(); ++i) out_shape[i] = src_shape[static_cast<size_t>(order[i])];
  Shape out_st = row_major_strides(out_shape);
  std::int64_t n = numel(out_shape);
  parallel_for(n, [&](std::int64_t i) {
    std::int64_t off = 0, rem = i;
    for (size_t d = 0; d < order.size(); ++d) {
      std::int64_t id = rem / out_st[d];
      rem -= id * out_st[d];
      off += id * src_st[static_cast<size_t>(order[d])];
    }
    dst[i] = src[off];
  });
}

}  // namespace detail

template <class T>
TensorT<T> permute(TapeT<T>* tape, const TensorT<T>& t, const std::vector<int>& order) {
  if (static_cast<std::int64_t>(order.size()) != t.ndim())
    throw ShapeError("permute order rank mismatch");
  std::vector<bool> seen(order.size(), false);
  for (int o : order) {
    if (o < 0 || o >= static_cast<int>(order.size()) || seen[static_cast<size_t>(o)])
      throw ShapeError("permute order is not a permutation");
    seen[static_cast<size_t>(o)] = true;
  }
  Shape ns(order.size());
  for (size_t i = 0; i < order.size(); ++i) ns[i] = t.dim(order[i]);
  TensorT<T> out(ns);
  detail::permute_copy(t.data(), t.shape(), out.values_mut().data(), order);
  if (detail::track(tape, {&t})) {
    out.set_requires_grad(true);
    std::vector<int> inverse(order.size());
    for (size_t i = 0; i < order.size(); ++i) inverse[static_cast<size_t>(order[i])] = static_cast<int>(i);
    TensorT<T> tt = t, to = out;
    tape->record([tt, to, inverse]() mutable {
      std::vector<T> tmp(tt.grad().size());
      detail::permute_copy(to.grad().data(), to.shape(), tmp.data(), inverse);
      auto& g = tt.grad_mut();
      for (size_t i = 0; i < g.size(); ++i) g[i] += tmp[i];
    });
  }
  return out;
}

// ---- matmul ----------------------------------------------------------------

template <class T>
TensorT<T> matmul(TapeT<T>* tape, const TensorT<T>& a, const TensorT<T>& b) {
  if (a.ndim() < 2 || b.ndim() < 2)
    throw ShapeError("matmul operands need at least 2 dims");
  std::int64_t m = a.dim(static_cast<int>(a.ndim()) - 2);
  std::int64_t k = a.dim(static_cast<int>(a.ndim()) - 1);
  std::int64_t k2 = b.dim(static_cast<int>(b.ndim()) - 2);
  std::int64_t n = b.dim(static_cast<int>(b.ndim()) - 1);
  if (k != k2)
    throw ShapeError("matmul inner dimensions " + shape_str(a.shape()) + " x " +
                     shape_str(b.shape()));
  detail::BatchMap bm = detail::make_batch_map(a.shape(), b.shape());
  Shape os = bm.batch_shape;
  os.push_back(m);
  os.push_back(n);
  TensorT<T> out(os);
  kernels::matmul(a.data(), b.data(), out.values_mut().data(), bm.batch, m, k, n,
                  bm.a_off.data(), bm.b_off.data());
  if (detail::track(tape, {&a, &b})) {
    out.set_requires_grad(true);
    TensorT<T> ta = a, tb = b, to = out;
    tape->record([ta, tb, to, bm, m, k, n]() mutable {
      std::vector<std::int64_t> go_off(static_cast<size_t>(bm.batch));
      for (std::int64_t i = 0; i < bm.batch; ++i) go_off[static_cast<size_t>(i)] = i * m * n;
      Shape full_a = bm.batch_shape, full_b = bm.batch_shape;
      full_a.push_back(m);
      full_a.push_back(k);
      full_b.push_back(k);
      full_b.push_back(n);
      if (ta.requires_grad()) {
        std::vector<T> tmp(static_cast<size_t>(bm.batch * m * k));
        kernels::matmul(to.grad().data(), tb.data(), tmp.data(), bm.batch, m, n, k,
                        go_off.data(), bm.b_off.data(), false, true);
        detail::reduce_accumulate(tmp.data(), full_a, ta.grad_mut(), ta.shape());
      }
      if (tb.requires_grad()) {
        std::vector<T> tmp(static_cast<size_t>(bm.batch * k * n));
        kernels::matmul(ta.data(), to.grad().data(), tmp.data(), bm.batch, k, m, n,
                        bm.a_off.data(), go_off.data(), true, false);
        detail::reduce_accumulate(tmp.data(), full_b, tb.grad_mut(), tb.shape());
      }
    });
  }
  return out;
}

// x[..., Din] * w[Din, Dout] + b[Dout]
template <class T>
TensorT<T> linear(TapeT<T>* tape, const TensorT<T>& x, const TensorT<T>& w,
                  const TensorT<T>& b) {
  return add(tape, matmul(tape, x, w), b);
}

// ---- softmax ---------------------------------------------------------------

template <class T>
TensorT<T> softmax(TapeT<T>* tape, const TensorT<T>& t, int axis) {
  if (axis < 0) axis += static_cast<int>(t.ndim());
  if (axis < 0 || axis >= t.ndim()) throw ShapeError("softmax axis out of range");
  std::int64_t len = t.dim(axis);
  std::int64_t inner = 1, outer = 1;
  for (int i = axis + 1; i < t.ndim(); ++i) inner *= t.dim(i);
  for (int i = 0; i < axis; ++i) outer *= t.dim(i);
  TensorT<T> out(t.shape());
  const T* src = t.data();
  T* dst = out.values_mut().data();
  parallel_for(outer * inner, [&](std::int64_t s) {
    std::int64_t o = s / inner, in = s % inner;
    const T* p = src + (o * len) * inner + in;
    T* q = dst + (o * len) * inner + in;
    T mx = p[0];
    for (std::int64_t j = 1; j < len; ++j) mx = std::max(mx, p[j * inner]);
    double denom = 0.0;
    for (std::int64_t j = 0; j < len; ++j) {
      T e = std::exp(p[j * inner] - mx);
      q[j * inner] = e;
      denom += static_cast<double>(e);
    }
    T inv = static_cast<T>(1.0 / denom);
    for (std::int64_t j = 0; j < len; ++j) q[j * inner] *= inv;
  });
  if (detail::track(tape, {&t})) {
    out.set_requires_grad(true);
    TensorT<T> tt = t, to = out;
    tape->record([tt, to, len, inner, outer]() mutable {
      const T* y = to.data();
      const T* go = to.grad().data();
      T* g = tt.grad_mut().data();
      parallel_for(outer * inner, [&](std::int64_t s) {
        std::int64_t o = s / inner, in = s % inner;
        std::int64_t base = (o * len) * inner + in;
        double dot = 0.0;
        for (std::int64_t j = 0; j < len; ++j)
          dot += static_cast<double>(go[base + j * inner]) * static_cast<double>(y[base + j * inner]);
        for (std::int64_t j = 0; j < len; ++j)
          g[base + j * inner] +=
              y[base + j * inner] * (go[base + j * inner] - static_cast<T>(dot));
      });
    });
  }
  return out;
}

// ---- GELU (exact erf form) ---------------------------------------------------

template <class T>
TensorT<T> gelu(TapeT<T>* tape, const TensorT<T>& t) {
  TensorT<T> out(t.shape());
  const T* src = t.data();
  T* dst = out.values_mut().data();
  parallel_for(t.numel(), [&](std::int64_t i) {
    double x = static_cast<double>(src[i]);
    dst[i] = static_cast<T>(0.5 * x * (1.0 + std::erf(x * 0.7071067811865475)));
  });
  if (detail::track(tape, {&t})) {
    out.set_requires_grad(true);
    TensorT<T> tt = t, to = out;
    tape->record([tt, to]() mutable {
      const T* x = tt.data();
      const T* go = to.grad().data();
      T* g = tt.grad_mut().data();
      std::int64_t n = tt.numel();
      parallel_for(n, [&](std::int64_t i) {
        double v = static_cast<double>(x[i]);
        double cdf = 0.5 * (1.0 + std::erf(v * 0.7071067811865475));
        double pdf = 0.3989422804014327 * std::exp(-0.5 * v * v);
        g[i] += static_cast<T>((cdf + v * pdf)) * go[i];
      });
    });
  }
  return out;
}

// ---- layer norm over the last axis ------------------------------------------

template <class T>
TensorT<T> layer_norm(TapeT<T>* tape, const TensorT<T>& x, const TensorT<T>& gamma,
                      const TensorT<T>& beta, T eps = T(1e-5)) {
  if (x.ndim() < 1) throw ShapeError("layer_norm needs at least 1 dim");
  std::int64_t d = x.dim(static_cast<int>(x.ndim()) - 1);
  if (gamma.numel() != d || beta.numel() != d)
    throw ShapeError("layer_norm parameter length mismatch");
  std::int64_t rows = x.numel() / d;
  TensorT<T> out(x.shape());
  auto norm = std::make_shared<std::vector<T>>(static_cast<size_t>(x.numel()));
  auto inv_sigma = std::make_shared<std::vector<T>>(static_cast<size_t>(rows));
  {
    const T* src = x.data();
    const T* g = gamma.data();
    const T* b = beta.data();
    T* dst = out.values_mut().data();
    T* nm = norm->data();
    T* is = inv_sigma->data();
    parallel_for(rows, [&](std::int64_t r) {
      const T* p = src + r * d;
      double mu = 0.0;
      for (std::int64_t j = 0; j < d; ++j) mu += static_cast<double>(p[j]);
      mu /= static_cast<double>(d);
      double var = 0.0;
      for (std::int64_t j = 0; j < d; ++j) {
        double c = static_cast<double>(p[j]) - mu;
        var += c * c;
      }
      var /= static_cast<double>(d);
      double inv = 1.0 / std::sqrt(var + static_cast<double>(eps));
      is[r] = static_cast<T>(inv);
      for (std::int64_t j = 0; j < d; ++j) {
        T y = static_cast<T>((static_cast<double>(p[j]) - mu) * inv);
        nm[r * d + j] = y;
        dst[r * d + j] = g[j] * y + b[j];
      }
    });
  }
  if (detail::track(tape, {&x, &gamma, &beta})) {
    out.set_requires_grad(true);
    TensorT<T> tx = x, tg = gamma, tb = beta, to = out;
    tape->record([tx, tg, tb, to, norm, inv_sigma, rows, d]() mutable {
      const T* go = to.grad().data();
      const T* y = norm->data();
      const T* is = inv_sigma->data();
      const T* g = tg.data();
      if (tx.requires_grad()) {
        T* gx = tx.grad_mut().data();
        parallel_for(rows, [&](std::int64_t r) {
          double m1 = 0.0, m2 = 0.0;
          for (std::int64_t j = 0; j < d; ++j) {
            double gy = static_cast<double>(go[r * d + j]) * static_cast<double>(g[j]);
            m1 += gy;
            m2 += gy * static_cast<double>(y[r * d + j]);
          }
          m1 /= static_cast<double>(d);
          m2 /= static_cast<double>(d);
          for (std::int64_t j = 0; j < d; ++j) {
            double gy = static_cast<double>(go[r * d + j]) * static_cast<double>(g[j]);
            gx[r * d + j] += static_cast<T>(
                (gy - m1 - static_cast<double>(y[r * d + j]) * m2) * static_cast<double>(is[r]));
          }
        });
      }
      if (tg.requires_grad()) {
        T* gg = tg.grad_mut().data();
        parallel_for(d, [&](std::int64_t j) {
          double acc = 0.0;
          for (std::int64_t r = 0; r < rows; ++r)
            acc += static_cast<double>(go[r * d + j]) * static_cast<double>(y[r * d + j]);
          gg[j] += static_cast<T>(acc);
        });
      }
      if (tb.requires_grad()) {
        T* gb = tb.grad_mut().data();
        parallel_for(d, [&](std::int64_t j) {
          double acc = 0.0;
          for (std::int64_t r = 0; r < rows; ++r) acc += static_cast<double>(go[r * d + j]);
          gb[j] += static_cast<T>(acc);
        });
      }
    });
  }
  return out;
}

// ---- convolutions ------------------------------------------------------------

// x: [B,Cin,H,W], w: [Cout,Cin,3,3], bias: [Cout]; same-size zero-padded output.
template <class T>
TensorT<T> conv2d(TapeT<T>* tape, const TensorT<T>& x, const TensorT<T>& w,
                  const TensorT<T>& bias) {
  if (x.ndim() != 4) throw ShapeError("conv2d input must be [B,C,H,W]");
  if (w.ndim() != 4 || w.dim(2) != 3 || w.dim(3) != 3)
    throw ShapeError("conv2d kernel must be [Cout,Cin,3,3]");
  if (w.dim(1) != x.dim(1))
    throw ShapeError("conv2d channel mismatch: input " + std::to_string(x.dim(1)) +
                     ", kernel " + std::to_string(w.dim(1)));
  if (bias.numel() != w.dim(0)) throw ShapeError("conv2d bias length mismatch");
  std::int64_t B = x.dim(0), cin = x.dim(1), H = x.dim(2), W = x.dim(3), cout = w.dim(0);
  TensorT<T> out(Shape{B, cout, H, W});
  kernels::conv2d_3x3(x.data(), w.data(), bias.data(), out.values_mut().data(), B, cin, cout,
                      H, W);
  if (detail::track(tape, {&x, &w, &bias})) {
    out.set_requires_grad(true);
    TensorT<T> tx = x, tw = w, tb = bias, to = out;
    tape->record([tx, tw, tb, to, B, cin, cout, H, W]() mutable {
      const T* go = to.grad().data();
      if (tx.requires_grad())
        kernels::conv2d_3x3_dx(go, tw.data(), tx.grad_mut().data(), B, cin, cout, H, W);
      if (tw.requires_grad())
        kernels::conv2d_3x3_dw(go, tx.data(), tw.grad_mut().data(), B, cin, cout, H, W);
      if (tb.requires_grad())
        kernels::conv2d_3x3_db(go, tb.grad_mut().data(), B, cout, H, W);
    });
  }
  return out;
}

// x: [B,Cin,N,H,W], w: [Cout,Cin,3,3,3], bias: [Cout]
template <class T>
TensorT<T> conv3d(TapeT<T>* tape, const TensorT<T>& x, const TensorT<T>& w,
                  const TensorT<T>& bias) {
  if (x.ndim() != 5) throw ShapeError("conv3d input must be [B,C,N,H,W]");
  if (w.ndim() != 5 || w.dim(2) != 3 || w.dim(3) != 3 || w.dim(4) != 3)
    throw ShapeError("conv3d kernel must be [Cout,Cin,3,3,3]");
  if (w.dim(1) != x.dim(1)) throw ShapeError("conv3d channel mismatch");
  if (bias.numel() != w.dim(0)) throw ShapeError("conv3d bias length mismatch");
  std::int64_t B = x.dim(0), cin = x.dim(1), N = x.dim(2), H = x.dim(3), W = x.dim(4);
  std::int64_t cout = w.dim(0);
  TensorT<T> out(Shape{B, cout, N, H, W});
  kernels::conv3d_3x3(x.data(), w.data(), bias.data(), out.values_mut().data(), B, cin, cout,
                      N, H, W);
  if (detail::track(tape, {&x, &w, &bias})) {
    out.set_requires_grad(true);
    TensorT<T> tx = x, tw = w, tb = bias, to = out;
    tape->record([tx, tw, tb, to, B, cin, cout, N, H, W]() mutable {
      const T* go = to.grad().data();
      if (tx.requires_grad())
        kernels::conv3d_3x3_dx(go, tw.data(), tx.grad_mut().data(), B, cin, cout, N, H, W);
      if (tw.requires_grad())
        kernels::conv3d_3x3_dw(go, tx.data(), tw.grad_mut().data(), B, cin, cout, N, H, W);
      if (tb.requires_grad())
        kernels::conv3d_3x3_db(go, tb.grad_mut().data(), B, cout, N * H * W);
    });
  }
  return out;
}

// ---- pixel shuffle -----------------------------------------------------------
// [B, C*r^2, H, W] -> [B, C, rH, rW]; channel c*r^2 + i*r + j lands at
// spatial offset (i, j) inside each r x r output cell.

template <class T>
TensorT<T> pixel_shuffle(TapeT<T>* tape, const TensorT<T>& x, int r) {
  if (x.ndim() != 4) throw ShapeError("pixel_shuffle input must be [B,C,H,W]");
  if (r < 1 || x.dim(1) % (static_cast<std::int64_t>(r) * r) != 0)
    throw ShapeError("pixel_shuffle: " + std::to_string(x.dim(1)) +
                     " channels not divisible by r^2");
  std::int64_t B = x.dim(0), C = x.dim(1) / (r * r), H = x.dim(2), W = x.dim(3);
  TensorT<T> out(Shape{B, C, H * r, W * r});
  const T* src = x.data();
  T* dst = out.values_mut().data();
  std::int64_t r64 = r;
  parallel_for(B * C * H * r, [&](std::int64_t row) {
    std::int64_t oy = row % (H * r64);
    std::int64_t c = (row / (H * r64)) % C;
    std::int64_t b = row / (H * r64 * C);
    std::int64_t h = oy / r64, i = oy % r64;
    for (std::int64_t ox = 0; ox < W * r64; ++ox) {
      std::int64_t w = ox / r64, j = ox % r64;
      std::int64_t ci = c * r64 * r64 + i * r64 + j;
      dst[((b * C + c) * H * r64 + oy) * W * r64 + ox] =
          src[((b * C * r64 * r64 + ci) * H + h) * W + w];
    }
  });
  if (detail::track(tape, {&x})) {
    out.set_requires_grad(true);
    TensorT<T> tx = x, to = out;
    tape->record([tx, to, B, C, H, W, r64]() mutable {
      const T* go = to.grad().data();
      T* g = tx.grad_mut().data();
      parallel_for(B * C * r64 * r64 * H, [&](std::int64_t row) {
        std::int64_t h = row % H;
        std::int64_t ci = (row / H) % (C * r64 * r64);
        std::int64_t b = row / (H * C * r64 * r64);
        std::int64_t c = ci / (r64 * r64), i = (ci / r64) % r64, j = ci % r64;
        for (std::int64_t w = 0; w < W; ++w)
          g[((b * C * r64 * r64 + ci) * H + h) * W + w] +=
              go[((b * C + c) * H * r64 + h * r64 + i) * W * r64 + w * r64 + j];
      });
    });
  }
  return out;
}

// ---- channel-pair rotation (RoPE core) ----------------------------------------
// x: [..., L, D] with even D; cos/sin tables indexed by (l, pair). The map is
// orthogonal per pair, so backward rotates gradients by the inverse angle.

template <class T>
TensorT<T> rotate_pairs(TapeT<T>* tape, const TensorT<T>& x,
                        std::shared_ptr<std::vector<T>> cos_tab,
                        std::shared_ptr<std::vector<T>> sin_tab) {
  if (x.ndim() < 2) throw ShapeError("rotate_pairs input needs at least 2 dims");
  std::int64_t d = x.dim(static_cast<int>(x.ndim()) - 1);
  std::int64_t L = x.dim(static_cast<int>(x.ndim()) - 2);
  if (d % 2 != 0) throw ConfigError("rotate_pairs: channel count must be even");
  std::int64_t pairs = d / 2;
  if (static_cast<std::int64_t>(cos_tab->size()) != L * pairs)
    throw ShapeError("rotate_pairs table size mismatch");
  std::int64_t lead = x.numel() / (L * d);
  TensorT<T> out(x.shape());
  const T* src = x.data();
  T* dst = out.values_mut().data();
  const T* ct = cos_tab->data();
  const T* st = sin_tab->data();
  parallel_for(lead * L, [&](std::int64_t row) {
    std::int64_t l = row % L;
    const T* p = src + row * d;
    T* q = dst + row * d;
    for (std::int64_t k = 0; k < pairs; ++k) {
      T c = ct[l * pairs + k], s = st[l * pairs + k];
      T x0 = p[2 * k], x1 = p[2 * k + 1];
      q[2 * k] = c * x0 - s * x1;
      q[2 * k + 1] = s * x0 + c * x1;
    }
  });
  if (detail::track(tape, {&x})) {
    out.set_requires_grad(true);
    TensorT<T> tx = x, to = out;
    tape->record([tx, to, cos_tab, sin_tab, lead, L, d, pairs]() mutable {
      const T* go = to.grad().data();
      T* g = tx.grad_mut().data();
      const T* ct = cos_tab->data();
      const T* st = sin_tab->data();
      parallel_for(lead * L, [&](std::int64_t row) {
        std::int64_t l = row % L;
        const T* p = go + row * d;
        T* q = g + row * d;
        for (std::int64_t k = 0; k < pairs; ++k) {
          T c = ct[l * pairs + k], s = st[l * pairs + k];
          T g0 = p[2 * k], g1 = p[2 * k + 1];
          q[2 * k] += c * g0 + s * g1;
          q[2 * k + 1] += -s * g0 + c * g1;
        }
      });
    });
  }
  return out;
}

// ---- reductions ----------------------------------------------------------------

template <class T>
TensorT<T> sum(TapeT<T>* tape, const TensorT<T>& t) {
  double acc = 0.0;
  for (const T& v : t.values()) acc += static_cast<double>(v);
  TensorT<T> out = TensorT<T>::scalar(static_cast<T>(acc));
  if (detail::track(tape, {&t})) {
    out.set_requires_grad(true);
    TensorT<T> tt = t, to = out;
    tape->record([tt, to]() mutable {
      T g = to.grad()[0];
      for (auto& v : tt.grad_mut()) v += g;
    });
  }
  return out;
}

template <class T>
TensorT<T> mean(TapeT<T>* tape, const TensorT<T>& t) {
  double acc = 0.0;
  for (const T& v : t.values()) acc += static_cast<double>(v);
  std::int64_t n = t.numel();
  TensorT<T> out = TensorT<T>::scalar(static_cast<T>(acc / static_cast<double>(n)));
  if (detail::track(tape, {&t})) {
    out.set_requires_grad(true);
    TensorT<T> tt = t, to = out;
    tape->record([tt, to, n]() mutable {
      T g = static_cast<T>(static_cast<double>(to.grad()[0]) / static_cast<double>(n));
      for (auto& v : tt.grad_mut()) v += g;
    });
  }
  return out;
}

// mean of sqrt((pred-target)^2 + eps^2); smooth everywhere, -> mean |delta|
// for |delta| >> eps.
template <class T>
TensorT<T> charbonnier_loss(TapeT<T>* tape, const TensorT<T>& pred, const TensorT<T>& target,
                            T eps = T(1e-6)) {
  if (pred.shape() != target.shape())
    throw ShapeError("charbonnier: shape mismatch " + shape_str(pred.shape()) + " vs " +
                     shape_str(target.shape()));
  const double e2 = static_cast<double>(eps) * static_cast<double>(eps);
  std::int64_t n = pred.numel();
  const T* p = pred.data();
  const T* t = target.data();
  double acc = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    double d = static_cast<double>(p[i]) - static_cast<double>(t[i]);
    acc += std::sqrt(d * d + e2);
  }
  TensorT<T> out = TensorT<T>::scalar(static_cast<T>(acc / static_cast<double>(n)));
  if (detail::track(tape, {&pred, &target})) {
    out.set_requires_grad(true);
    TensorT<T> tp = pred, tt = target, to = out;
    tape->record([tp, tt, to, e2, n]() mutable {
      double g = static_cast<double>(to.grad()[0]) / static_cast<double>(n);
      const T* p = tp.data();
      const T* t = tt.data();
      T* gp = tp.requires_grad() ? tp.grad_mut().data() : nullptr;
      T* gt = tt.requires_grad() ? tt.grad_mut().data() : nullptr;
      for (std::int64_t i = 0; i < n; ++i) {
        double d = static_cast<double>(p[i]) - static_cast<double>(t[i]);
        double dd = g * d / std::sqrt(d * d + e2);
        if (gp) gp[i] += static_cast<T>(dd);
        if (gt) gt[i] -= static_cast<T>(dd);
      }
    });
  }
  return out;
}

}  // namespace dualx
