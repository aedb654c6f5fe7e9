#pragma once

#include <array>
#include <string>
#include <vector>

#include "dualx/nn.hpp"

// The 5-axis token grid (batch, channel, temporal-, vertical-, horizontal-
// patch) and the attention variants that run on its plane views. A view keeps
// the channel axis as the feature axis and folds batch plus the non-attended
// grid axes into the effective batch:
//   spatial             [B*nN, nH*nW, D]   positions (row, col)
//   temporal            [B*nH*nW, nN, D]   positions (0, t)
//   vertical-temporal   [B*nW, nH*nN, D]   positions (row, t)
//   horizontal-temporal [B*nH, nW*nN, D]   positions (col, t)

namespace dualx {

template <class T>
struct TokenGridT {
  TensorT<T> data;  // [B, D, nN, nH, nW]

  TokenGridT() = default;
  explicit TokenGridT(TensorT<T> t) : data(std::move(t)) {
    if (data.ndim() != 5) throw ShapeError("token grid must be [B,D,nN,nH,nW]");
  }

  std::int64_t batch() const { return data.dim(0); }
  std::int64_t embed() const { return data.dim(1); }
  std::int64_t tpatches() const { return data.dim(2); }
  std::int64_t vpatches() const { return data.dim(3); }
  std::int64_t hpatches() const { return data.dim(4); }
};

using TokenGrid = TokenGridT<float>;

enum class ViewKind { Spatial, Temporal, VerticalTemporal, HorizontalTemporal };

inline const char* view_name(ViewKind v) {
  switch (v) {
    case ViewKind::Spatial: return "spatial";
    case ViewKind::Temporal: return "temporal";
    case ViewKind::VerticalTemporal: return "vertical_temporal";
    case ViewKind::HorizontalTemporal: return "horizontal_temporal";
  }
  return "?";
}

template <class T>
struct TokenViewT {
  TensorT<T> tokens;  // [Batch', L, D]
  Positions positions;
  ViewKind kind{};
  Shape grid_shape;  // original [B,D,nN,nH,nW]
};

template <class T>
TokenViewT<T> to_view(TapeT<T>* tape, const TokenGridT<T>& g, ViewKind kind) {
  std::int64_t B = g.batch(), D = g.embed(), nN = g.tpatches(), nH = g.vpatches(),
               nW = g.hpatches();
  TokenViewT<T> v;
  v.kind = kind;
  v.grid_shape = g.data.shape();
  switch (kind) {
    case ViewKind::Spatial: {
      TensorT<T> t = permute(tape, g.data, {0, 2, 3, 4, 1});  // B,nN,nH,nW,D
      v.tokens = reshape(tape, t, {B * nN, nH * nW, D});
      v.positions.resize(static_cast<size_t>(nH * nW));
      for (std::int64_t i = 0; i < nH * nW; ++i)
        v.positions[static_cast<size_t>(i)] = {static_cast<std::int32_t>(i / nW),
                                               static_cast<std::int32_t>(i % nW)};
      break;
    }
    case ViewKind::Temporal: {
      TensorT<T> t = permute(tape, g.data, {0, 3, 4, 2, 1});  // B,nH,nW,nN,D
      v.tokens = reshape(tape, t, {B * nH * nW, nN, D});
      v.positions.resize(static_cast<size_t>(nN));
      for (std::int64_t i = 0; i < nN; ++i)
        v.positions[static_cast<size_t>(i)] = {0, static_cast<std::int32_t>(i)};
      break;
    }
    case ViewKind::VerticalTemporal: {
      TensorT<T> t = permute(tape, g.data, {0, 4, 3, 2, 1});  // B,nW,nH,nN,D
      v.tokens = reshape(tape, t, {B * nW, nH * nN, D});
      v.positions.resize(static_cast<size_t>(nH * nN));
      for (std::int64_t i = 0; i < nH * nN; ++i)
        v.positions[static_cast<size_t>(i)] = {static_cast<std::int32_t>(i / nN),
                                               static_cast<std::int32_t>(i % nN)};
      break;
    }
    case ViewKind::HorizontalTemporal: {
      TensorT<T> t = permute(tape, g.data, {0, 3, 4, 2, 1});  // B,nH,nW,nN,D
      v.tokens = reshape(tape, t, {B * nH, nW * nN, D});
      v.positions.resize(static_cast<size_t>(nW * nN));
      for (std::int64_t i = 0; i < nW * nN; ++i)
        v.positions[static_cast<size_t>(i)] = {static_cast<std::int32_t>(i / nN),
                                               static_cast<std::int32_t>(i % nN)};
      break;
    }
  }
  return v;
}

template <class T>
TokenGridT<T> from_view(TapeT<T>* tape, const TokenViewT<T>& v) {
  const Shape& gs = v.grid_shape;
  std::int64_t B = gs[0], D = gs[1], nN = gs[2], nH = gs[3], nW = gs[4];
  TensorT<T> t;
  switch (v.kind) {
    case ViewKind::Spatial:
      t = permute(tape, reshape(tape, v.tokens, {B, nN, nH, nW, D}), {0, 4, 1, 2, 3});
      break;
    case ViewKind::Temporal:
      t = permute(tape, reshape(tape, v.tokens, {B, nH, nW, nN, D}), {0, 4, 3, 1, 2});
      break;
    case ViewKind::VerticalTemporal:
      t = permute(tape, reshape(tape, v.tokens, {B, nW, nH, nN, D}), {0, 4, 3, 2, 1});
      break;
    case ViewKind::HorizontalTemporal:
      t = permute(tape, reshape(tape, v.tokens, {B, nH, nW, nN, D}), {0, 4, 3, 1, 2});
      break;
  }
  return TokenGridT<T>(std::move(t));
}

// ---- variants ---------------------------------------------------------------

enum class AttentionVariant {
  Spatial,
  Temporal,
  SpatialTemporal,
  VerticalTemporal,
  HorizontalTemporal,
  DualAxialSerialVH,  // all vertical-temporal units, then all horizontal-temporal
  DualAxialSerialHV,
  DualAxialInterleaved,
};

inline const char* variant_name(AttentionVariant v) {
  switch (v) {
    case AttentionVariant::Spatial: return "spatial";
    case AttentionVariant::Temporal: return "temporal";
    case AttentionVariant::SpatialTemporal: return "spatial_temporal";
    case AttentionVariant::VerticalTemporal: return "vertical_temporal";
    case AttentionVariant::HorizontalTemporal: return "horizontal_temporal";
    case AttentionVariant::DualAxialSerialVH: return "dual_axial_serial_vh";
    case AttentionVariant::DualAxialSerialHV: return "dual_axial_serial_hv";
    case AttentionVariant::DualAxialInterleaved: return "dual_axial_interleaved";
  }
  return "?";
}

// Per-unit view schedule. Two-mechanism variants need an even unit count so
// the total is evenly distributed.
inline std::vector<ViewKind> variant_schedule(AttentionVariant v, int units) {
  if (units <= 0) throw ConfigError("variant needs at least one attention unit");
  std::vector<ViewKind> s;
  s.reserve(static_cast<size_t>(units));
  auto even = [&] {
    if (units % 2 != 0)
      throw ConfigError(std::string(variant_name(v)) + " needs an even unit count");
  };
  switch (v) {
    case AttentionVariant::Spatial:
      s.assign(static_cast<size_t>(units), ViewKind::Spatial);
      break;
    case AttentionVariant::Temporal:
      s.assign(static_cast<size_t>(units), ViewKind::Temporal);
      break;
    case AttentionVariant::VerticalTemporal:
      s.assign(static_cast<size_t>(units), ViewKind::VerticalTemporal);
      break;
    case AttentionVariant::HorizontalTemporal:
      s.assign(static_cast<size_t>(units), ViewKind::HorizontalTemporal);
      break;
    case AttentionVariant::SpatialTemporal:
      even();
      for (int i = 0; i < units; ++i)
        s.push_back(i % 2 == 0 ? ViewKind::Spatial : ViewKind::Temporal);
      break;
    case AttentionVariant::DualAxialSerialVH:
      even();
      for (int i = 0; i < units; ++i)
        s.push_back(i < units / 2 ? ViewKind::VerticalTemporal : ViewKind::HorizontalTemporal);
      break;
    case AttentionVariant::DualAxialSerialHV:
      even();
      for (int i = 0; i < units; ++i)
        s.push_back(i < units / 2 ? ViewKind::HorizontalTemporal : ViewKind::VerticalTemporal);
      break;
    case AttentionVariant::DualAxialInterleaved:
      even();
      for (int i = 0; i < units; ++i)
        s.push_back(i % 2 == 0 ? ViewKind::VerticalTemporal : ViewKind::HorizontalTemporal);
      break;
  }
  return s;
}

// Runs the variant's schedule over the grid, switching views between
// consecutive units only when the view kind changes.
template <class T>
TokenGridT<T> apply_variant(TapeT<T>* tape, const TokenGridT<T>& grid, AttentionVariant variant,
                            std::span<const AttnBlockWeightsT<T>> blocks,
                            T rope_base = T(10000)) {
  std::vector<ViewKind> schedule = variant_schedule(variant, static_cast<int>(blocks.size()));
  TokenGridT<T> g = grid;
  size_t i = 0;
  while (i < schedule.size()) {
    ViewKind kind = schedule[i];
    TokenViewT<T> view = to_view(tape, g, kind);
    while (i < schedule.size() && schedule[i] == kind) {
      view.tokens = transformer_block(tape, view.tokens, blocks[i], view.positions, rope_base);
      ++i;
    }
    g = from_view(tape, view);
  }
  return g;
}

// ---- analytic cost model -------------------------------------------------------

struct GridDims {
  std::int64_t batch = 1, tpatches = 0, vpatches = 0, hpatches = 0;
  std::int64_t tokens() const { return batch * tpatches * vpatches * hpatches; }
};

// MAC counts of one attention unit (attention + MLP) in a given view.
// 1 MAC = one multiply-accumulate; biases and normalizations excluded.
struct CostReport {
  std::int64_t params = 0;
  std::int64_t macs_proj = 0;    // q,k,v,o projections + token/decode projections
  std::int64_t macs_scores = 0;  // q*k^T
  std::int64_t macs_values = 0;  // softmax(scores)*v
  std::int64_t macs_mlp = 0;
  std::int64_t macs_conv = 0;

  std::int64_t macs_total() const {
    return macs_proj + macs_scores + macs_values + macs_mlp + macs_conv;
  }
  CostReport& operator+=(const CostReport& o) {
    params += o.params;
    macs_proj += o.macs_proj;
    macs_scores += o.macs_scores;
    macs_values += o.macs_values;
    macs_mlp += o.macs_mlp;
    macs_conv += o.macs_conv;
    return *this;
  }
};

// Sequence layout of a view: effective batch and sequence length.
inline std::pair<std::int64_t, std::int64_t> view_layout(ViewKind v, const GridDims& g) {
  switch (v) {
    case ViewKind::Spatial: return {g.batch * g.tpatches, g.vpatches * g.hpatches};
    case ViewKind::Temporal: return {g.batch * g.vpatches * g.hpatches, g.tpatches};
    case ViewKind::VerticalTemporal: return {g.batch * g.hpatches, g.vpatches * g.tpatches};
    case ViewKind::HorizontalTemporal: return {g.batch * g.vpatches, g.hpatches * g.tpatches};
  }
  return {0, 0};
}

// Score-matmul MACs for one unit: Batch' * L^2 * D.
inline std::int64_t score_macs(ViewKind v, const GridDims& g, std::int64_t embed) {
  auto [batch, len] = view_layout(v, g);
  return batch * len * len * embed;
}

// Full-3D token attention, kept in the taxonomy for comparison only.
inline std::int64_t omnidirectional_score_macs(const GridDims& g, std::int64_t embed) {
  std::int64_t len = g.tpatches * g.vpatches * g.hpatches;
  return g.batch * len * len * embed;
}

inline std::int64_t attn_block_params(std::int64_t embed, std::int64_t mlp) {
  std::int64_t ln = 2 * (2 * embed);
  std::int64_t proj = 4 * (embed * embed + embed);
  std::int64_t mlp_p = embed * mlp + mlp + mlp * embed + embed;
  return ln + proj + mlp_p;
}

struct AttnCostConfig {
  std::int64_t embed = 0;
  std::int64_t mlp = 0;
};

// Closed-form cost of running `units` attention units of the variant over the
// grid. All counts are exact integers.
inline CostReport attention_cost(AttentionVariant variant, const GridDims& g,
                                 const AttnCostConfig& cfg, int units) {
  std::vector<ViewKind> schedule = variant_schedule(variant, units);
  CostReport r;
  std::int64_t tokens = g.tokens();
  for (ViewKind k : schedule) {
    r.params += attn_block_params(cfg.embed, cfg.mlp);
    r.macs_proj += 4 * tokens * cfg.embed * cfg.embed;
    r.macs_scores += score_macs(k, g, cfg.embed);
    r.macs_values += score_macs(k, g, cfg.embed);  // same shape as the score matmul
    r.macs_mlp += 2 * tokens * cfg.embed * cfg.mlp;
  }
  return r;
}

}  // namespace dualx
