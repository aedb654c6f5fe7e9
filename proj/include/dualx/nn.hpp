#pragma once

#include <memory>
#include <span>
#include <vector>

#include "dualx/ops.hpp"

namespace dualx {

// Rotary positional encoding. Channel pair (2d, 2d+1) of the token at
// position u is rotated by angle u * theta_d with theta_d = base^(-2d/dim),
// d = 0 .. dim/2-1 (so theta_0 == 1 exactly and theta decreases). Attention
// scores between rotary-encoded queries and keys then depend only on the
// position difference.
template <class T>
struct RopeParamsT {
  int dim = 0;  // per-head channel count, must be even
  T base = T(10000);
  std::vector<T> theta;

  static RopeParamsT make(int dim, T base = T(10000)) {
    if (dim <= 0 || dim % 2 != 0)
      throw ConfigError("rope dimension must be a positive even number, got " +
                        std::to_string(dim));
    if (!(base > T(0))) throw ConfigError("rope base must be positive");
    RopeParamsT p;
    p.dim = dim;
    p.base = base;
    p.theta.resize(static_cast<size_t>(dim / 2));
    for (int d = 0; d < dim / 2; ++d)
      p.theta[static_cast<size_t>(d)] =
          static_cast<T>(std::pow(static_cast<double>(base), -2.0 * d / dim));
    return p;
  }
};

using RopeParams = RopeParamsT<float>;

// Token position as an (axis, time) index pair. Pure temporal sequences use
// axis = 0; spatial planes use (row, col).
struct AxialPos {
  std::int32_t axis = 0;
  std::int32_t time = 0;
};
using Positions = std::vector<AxialPos>;

namespace detail {

template <class T>
void make_rotation_tables(std::span<const double> angles,
                          std::shared_ptr<std::vector<T>>& cos_tab,
                          std::shared_ptr<std::vector<T>>& sin_tab) {
  cos_tab = std::make_shared<std::vector<T>>(angles.size());
  sin_tab = std::make_shared<std::vector<T>>(angles.size());
  for (size_t i = 0; i < angles.size(); ++i) {
    (*cos_tab)[i] = static_cast<T>(std::cos(angles[i]));
    (*sin_tab)[i] = static_cast<T>(std::sin(angles[i]));
  }
}

}  // namespace detail

// Single-axis RoPE over the full head dimension of x: [..., L, dim].
template <class T>
TensorT<T> rope_apply(TapeT<T>* tape, const TensorT<T>& x,
                      std::span<const std::int32_t> positions, const RopeParamsT<T>& params) {
  std::int64_t L = x.dim(static_cast<int>(x.ndim()) - 2);
  std::int64_t d = x.dim(static_cast<int>(x.ndim()) - 1);
  if (d != params.dim) throw ConfigError("rope_apply: channel count does not match params");
  if (static_cast<std::int64_t>(positions.size()) != L)
    throw ShapeError("rope_apply: positions length mismatch");
  std::int64_t pairs = d / 2;
  std::vector<double> angles(static_cast<size_t>(L * pairs));
  for (std::int64_t l = 0; l < L; ++l)
    for (std::int64_t k = 0; k < pairs; ++k)
      angles[static_cast<size_t>(l * pairs + k)] =
          static_cast<double>(positions[static_cast<size_t>(l)]) *
          static_cast<double>(params.theta[static_cast<size_t>(k)]);
  std::shared_ptr<std::vector<T>> ct, st;
  detail::make_rotation_tables<T>(angles, ct, st);
  return rotate_pairs(tape, x, ct, st);
}

// Axial RoPE for plane-with-time token sequences: the leading half of each
// head's channel pairs is rotated by the axis index, the rest by the time
// index, each span with its own frequency ladder. Odd pair counts give the
// extra pair to the time index (a 2-channel head is time-only).
template <class T>
TensorT<T> rope_apply_axial(TapeT<T>* tape, const TensorT<T>& x,
                            std::span<const AxialPos> positions, T base = T(10000)) {
  std::int64_t L = x.dim(static_cast<int>(x.ndim()) - 2);
  std::int64_t d = x.dim(static_cast<int>(x.ndim()) - 1);
  if (d % 2 != 0)
    throw ConfigError("axial rope requires an even head dimension, got " + std::to_string(d));
  if (static_cast<std::int64_t>(positions.size()) != L)
    throw ShapeError("axial rope: positions length mismatch");
  std::int64_t pairs = d / 2, axis_pairs = pairs / 2, time_pairs = pairs - axis_pairs;
  RopeParamsT<T> axis_params, time_params;
  if (axis_pairs > 0) axis_params = RopeParamsT<T>::make(static_cast<int>(2 * axis_pairs), base);
  time_params = RopeParamsT<T>::make(static_cast<int>(2 * time_pairs), base);
  std::vector<double> angles(static_cast<size_t>(L * pairs));
  for (std::int64_t l = 0; l < L; ++l)
    for (std::int64_t k = 0; k < pairs; ++k) {
      bool axis_span = k < axis_pairs;
      double pos = axis_span ? positions[static_cast<size_t>(l)].axis
                             : positions[static_cast<size_t>(l)].time;
      double theta = axis_span
                         ? static_cast<double>(axis_params.theta[static_cast<size_t>(k)])
                         : static_cast<double>(time_params.theta[static_cast<size_t>(k - axis_pairs)]);
      angles[static_cast<size_t>(l * pairs + k)] = pos * theta;
    }
  std::shared_ptr<std::vector<T>> ct, st;
  detail::make_rotation_tables<T>(angles, ct, st);
  return rotate_pairs(tape, x, ct, st);
}

// Raw pairwise scores of rotary-encoded queries and keys: [L, D] x [L, D] ->
// [L, L] inner products (no scaling; attention applies 1/sqrt(D) before the
// softmax).
template <class T>
TensorT<T> attention_scores(TapeT<T>* tape, const TensorT<T>& q_rot, const TensorT<T>& k_rot) {
  std::vector<int> order(static_cast<size_t>(k_rot.ndim()));
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::swap(order[order.size() - 1], order[order.size() - 2]);
  return matmul(tape, q_rot, permute(tape, k_rot, order));
}

// One transformer unit: pre-norm multi-head self-attention plus a pre-norm
// GELU MLP, both with residual connections. Output projections start at zero
// so a freshly initialized block is the identity map.
template <class T>
struct AttnBlockWeightsT {
  TensorT<T> ln1_g, ln1_b;
  TensorT<T> wq, bq, wk, bk, wv, bv, wo, bo;
  TensorT<T> ln2_g, ln2_b;
  TensorT<T> w1, b1, w2, b2;
  int heads = 1;

  std::int64_t embed_dim() const { return wq.dim(0); }
  std::int64_t mlp_dim() const { return w1.dim(1); }

  static void validate_dims(std::int64_t embed, std::int64_t mlp, int heads) {
    if (embed <= 0 || mlp <= 0 || heads <= 0) throw ConfigError("attention block dims must be positive");
    if (embed % heads != 0)
      throw ConfigError("embed dim " + std::to_string(embed) + " not divisible by " +
                        std::to_string(heads) + " heads");
    if ((embed / heads) % 2 != 0)
      throw ConfigError("head dim " + std::to_string(embed / heads) +
                        " must be even for rotary encoding");
  }

  static AttnBlockWeightsT zeros(std::int64_t embed, std::int64_t mlp, int heads) {
    validate_dims(embed, mlp, heads);
    AttnBlockWeightsT w;
    w.heads = heads;
    w.ln1_g = TensorT<T>::ones({embed});
    w.ln1_b = TensorT<T>::zeros({embed});
    w.wq = TensorT<T>::zeros({embed, embed});
    w.bq = TensorT<T>::zeros({embed});
    w.wk = TensorT<T>::zeros({embed, embed});
    w.bk = TensorT<T>::zeros({embed});
    w.wv = TensorT<T>::zeros({embed, embed});
    w.bv = TensorT<T>::zeros({embed});
    w.wo = TensorT<T>::zeros({embed, embed});
    w.bo = TensorT<T>::zeros({embed});
    w.ln2_g = TensorT<T>::ones({embed});
    w.ln2_b = TensorT<T>::zeros({embed});
    w.w1 = TensorT<T>::zeros({embed, mlp});
    w.b1 = TensorT<T>::zeros({mlp});
    w.w2 = TensorT<T>::zeros({mlp, embed});
    w.b2 = TensorT<T>::zeros({embed});
    return w;
  }

  static AttnBlockWeightsT init(std::int64_t embed, std::int64_t mlp, int heads, Rng& rng,
                                T sigma = T(0.02)) {
    AttnBlockWeightsT w = zeros(embed, mlp, heads);
    w.wq = TensorT<T>::truncated_normal({embed, embed}, T(0), sigma, rng);
    w.wk = TensorT<T>::truncated_normal({embed, embed}, T(0), sigma, rng);
    w.wv = TensorT<T>::truncated_normal({embed, embed}, T(0), sigma, rng);
    w.w1 = TensorT<T>::truncated_normal({embed, mlp}, T(0), sigma, rng);
    // wo and w2 stay zero: residual branches vanish at init.
    return w;
  }

  template <class F>
  void for_each(F&& f) {
    f("ln1.g", ln1_g); f("ln1.b", ln1_b);
    f("q.w", wq); f("q.b", bq);
    f("k.w", wk); f("k.b", bk);
    f("v.w", wv); f("v.b", bv);
    f("o.w", wo); f("o.b", bo);
    f("ln2.g", ln2_g); f("ln2.b", ln2_b);
    f("mlp1.w", w1); f("mlp1.b", b1);
    f("mlp2.w", w2); f("mlp2.b", b2);
  }
};

using AttnBlockWeights = AttnBlockWeightsT<float>;

// x: [B, L, D] -> [B, L, D]. Pre-norm residual attention with axial RoPE on
// queries and keys and 1/sqrt(head_dim) score scaling.
template <class T>
TensorT<T> multi_head_attention(TapeT<T>* tape, const TensorT<T>& x,
                                const AttnBlockWeightsT<T>& w,
                                std::span<const AxialPos> positions, T rope_base = T(10000)) {
  if (x.ndim() != 3) throw ShapeError("attention input must be [B, L, D]");
  std::int64_t B = x.dim(0), L = x.dim(1), D = x.dim(2);
  if (D != w.embed_dim()) throw ConfigError("attention width mismatch");
  if (D % w.heads != 0) throw ConfigError("embed dim not divisible by head count");
  std::int64_t H = w.heads, dh = D / H;

  TensorT<T> h = layer_norm(tape, x, w.ln1_g, w.ln1_b);
  auto split_heads = [&](const TensorT<T>& t) {
    // [B, L, D] -> [B, H, L, dh]
    return permute(tape, reshape(tape, t, {B, L, H, dh}), {0, 2, 1, 3});
  };
  TensorT<T> q = split_heads(linear(tape, h, w.wq, w.bq));
  TensorT<T> k = split_heads(linear(tape, h, w.wk, w.bk));
  TensorT<T> v = split_heads(linear(tape, h, w.wv, w.bv));
  q = rope_apply_axial(tape, q, positions, rope_base);
  k = rope_apply_axial(tape, k, positions, rope_base);
  TensorT<T> scores = matmul(tape, q, permute(tape, k, {0, 1, 3, 2}));
  scores = scale(tape, scores, static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh))));
  TensorT<T> attn = softmax(tape, scores, -1);
  TensorT<T> ctx = matmul(tape, attn, v);  // [B, H, L, dh]
  ctx = reshape(tape, permute(tape, ctx, {0, 2, 1, 3}), {B, L, D});
  return add(tape, x, linear(tape, ctx, w.wo, w.bo));
}

// x + W2 * gelu(W1 * norm(x) + b1) + b2, shape preserved.
template <class T>
TensorT<T> mlp_block(TapeT<T>* tape, const TensorT<T>& x, const AttnBlockWeightsT<T>& w) {
  TensorT<T> h = layer_norm(tape, x, w.ln2_g, w.ln2_b);
  h = gelu(tape, linear(tape, h, w.w1, w.b1));
  return add(tape, x, linear(tape, h, w.w2, w.b2));
}

template <class T>
TensorT<T> transformer_block(TapeT<T>* tape, const TensorT<T>& x, const AttnBlockWeightsT<T>& w,
                             std::span<const AxialPos> positions, T rope_base = T(10000)) {
  return mlp_block(tape, multi_head_attention(tape, x, w, positions, rope_base), w);
}

}  // namespace dualx
