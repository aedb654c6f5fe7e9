#pragma once

#include <functional>
#include <string>
#include <vector>

#include "dualx/image_ops.hpp"
#include "dualx/topology.hpp"

// Full pipeline: input video embedding (shallow 2D/3D conv + per-pixel
// temporal attention + patch token projection), the dual axial transformer
// over the token grid, and spatiotemporal reconstruction (temporal attention,
// token decode, conv + pixel-shuffle upsampling) with a global bicubic
// residual. Clips are [B,3,N,H,W] in [0,1]; outputs are [B,3,N,sH,sW].

namespace dualx {

enum class PreExtraction { Conv2d, Conv3d };

struct ModelConfig {
  int upscale = 4;
  int patch_h = 2, patch_w = 2, patch_n = 1;

  int pre_channels = 64;  // shallow feature width, also the preprocessing attention width
  PreExtraction pre_extraction = PreExtraction::Conv2d;
  int pre_attn_depth = 2;
  int pre_mlp = 128;
  // The full-scale configuration lists 12 preprocessing heads, which does not
  // divide the 64-dim features; 4 heads is the recorded substitute.
  int pre_heads = 4;

  int vtab_depth = 6, htab_depth = 6;
  int embed_dim = 1280, mlp_dim = 2560, heads = 12;
  AttentionVariant variant = AttentionVariant::DualAxialSerialVH;

  int recon_attn_depth = 2;
  int recon_channels = 64;
  int shuffle_factor = 2;
  double rope_base = 10000.0;

  int total_units() const { return vtab_depth + htab_depth; }
  int token_width() const { return pre_channels * patch_h * patch_w * patch_n; }

  int upsample_stages() const {
    if (shuffle_factor < 2) throw ConfigError("pixel shuffle factor must be >= 2");
    int s = upscale, k = 0;
    while (s > 1 && s % shuffle_factor == 0) {
      s /= shuffle_factor;
      ++k;
    }
    if (s != 1)
      throw ConfigError("upscale " + std::to_string(upscale) +
                        " is not a power of the pixel shuffle factor " +
                        std::to_string(shuffle_factor));
    return k;
  }

  void validate() const {
    if (upscale < 1) throw ConfigError("upscale must be >= 1");
    if (patch_h < 1 || patch_w < 1 || patch_n < 1) throw ConfigError("patch sizes must be >= 1");
    if (pre_channels < 1 || embed_dim < 1 || mlp_dim < 1 || recon_channels < 1)
      throw ConfigError("channel/width fields must be >= 1");
    if (pre_attn_depth < 0 || vtab_depth < 0 || htab_depth < 0 || recon_attn_depth < 0)
      throw ConfigError("depths must be >= 0");
    if (heads < 1 || pre_heads < 1) throw ConfigError("head counts must be >= 1");
    (void)upsample_stages();
  }

  static ModelConfig paper_preset() { return ModelConfig{}; }

  // Small enough to train and test on a laptop.
  static ModelConfig desk_preset() {
    ModelConfig c;
    c.pre_channels = 16;
    c.pre_attn_depth = 1;
    c.pre_mlp = 32;
    c.pre_heads = 4;
    c.vtab_depth = 1;
    c.htab_depth = 1;
    c.embed_dim = 64;
    c.mlp_dim = 128;
    c.heads = 4;
    c.recon_attn_depth = 1;
    c.recon_channels = 16;
    return c;
  }

  // Small enough for exhaustive finite-difference checks (< 1e4 parameters).
  static ModelConfig micro_preset() {
    ModelConfig c;
    c.pre_channels = 4;
    c.pre_attn_depth = 1;
    c.pre_mlp = 8;
    c.pre_heads = 1;
    c.vtab_depth = 1;
    c.htab_depth = 1;
    c.embed_dim = 8;
    c.mlp_dim = 16;
    c.heads = 2;
    c.recon_attn_depth = 1;
    c.recon_channels = 4;
    return c;
  }
};

template <class T>
struct ModelWeightsT {
  ModelConfig cfg;
  TensorT<T> pre_conv_w, pre_conv_b;
  std::vector<AttnBlockWeightsT<T>> pre_blocks;
  TensorT<T> token_proj_w, token_proj_b;
  std::vector<AttnBlockWeightsT<T>> blocks;  // transformer units, ordered by schedule
  std::vector<AttnBlockWeightsT<T>> recon_blocks;
  TensorT<T> decode_w, decode_b;
  std::vector<TensorT<T>> up_w, up_b;  // one conv per upsample stage
  TensorT<T> out_conv_w, out_conv_b;

  static ModelWeightsT zeros(const ModelConfig& cfg) {
    cfg.validate();
    ModelWeightsT w;
    w.cfg = cfg;
    std::int64_t d = cfg.pre_channels, D = cfg.embed_dim, tw = cfg.token_width();
    if (cfg.pre_extraction == PreExtraction::Conv2d)
      w.pre_conv_w = TensorT<T>::zeros({d, 3, 3, 3});
    else
      w.pre_conv_w = TensorT<T>::zeros({d, 3, 3, 3, 3});
    w.pre_conv_b = TensorT<T>::zeros({d});
    for (int i = 0; i < cfg.pre_attn_depth; ++i)
      w.pre_blocks.push_back(AttnBlockWeightsT<T>::zeros(d, cfg.pre_mlp, cfg.pre_heads));
    w.token_proj_w = TensorT<T>::zeros({tw, D});
    w.token_proj_b = TensorT<T>::zeros({D});
    for (int i = 0; i < cfg.total_units(); ++i)
      w.blocks.push_back(AttnBlockWeightsT<T>::zeros(D, cfg.mlp_dim, cfg.heads));
    for (int i = 0; i < cfg.recon_attn_depth; ++i)
      w.recon_blocks.push_back(AttnBlockWeightsT<T>::zeros(D, cfg.mlp_dim, cfg.heads));
    w.decode_w = TensorT<T>::zeros({D, tw});
    w.decode_b = TensorT<T>::zeros({tw});
    std::int64_t r2 = static_cast<std::int64_t>(cfg.shuffle_factor) * cfg.shuffle_factor;
    std::int64_t c_in = d;
    for (int s = 0; s < cfg.upsample_stages(); ++s) {
      w.up_w.push_back(TensorT<T>::zeros({cfg.recon_channels * r2, c_in, 3, 3}));
      w.up_b.push_back(TensorT<T>::zeros({cfg.recon_channels * r2}));
      c_in = cfg.recon_channels;
    }
    w.out_conv_w = TensorT<T>::zeros({3, c_in, 3, 3});
    w.out_conv_b = TensorT<T>::zeros({3});
    return w;
  }

  // Truncated-normal projections; zero output projections, zero final conv.
  // A freshly initialized model therefore equals the bicubic baseline.
  static ModelWeightsT init(const ModelConfig& cfg, Rng& rng, T sigma = T(0.02)) {
    ModelWeightsT w = zeros(cfg);
    auto fill = [&](TensorT<T>& t) {
      t = TensorT<T>::truncated_normal(t.shape(), T(0), sigma, rng);
    };
    fill(w.pre_conv_w);
    for (auto& b : w.pre_blocks)
      b = AttnBlockWeightsT<T>::init(cfg.pre_channels, cfg.pre_mlp, cfg.pre_heads, rng, sigma);
    fill(w.token_proj_w);
    for (auto& b : w.blocks)
      b = AttnBlockWeightsT<T>::init(cfg.embed_dim, cfg.mlp_dim, cfg.heads, rng, sigma);
    for (auto& b : w.recon_blocks)
      b = AttnBlockWeightsT<T>::init(cfg.embed_dim, cfg.mlp_dim, cfg.heads, rng, sigma);
    fill(w.decode_w);
    for (auto& u : w.up_w) fill(u);
    // out_conv stays zero
    return w;
  }

  template <class F>
  void for_each_param(F&& f) {
    f("pre.conv.w", pre_conv_w);
    f("pre.conv.b", pre_conv_b);
    for (size_t i = 0; i < pre_blocks.size(); ++i)
      pre_blocks[i].for_each([&](const std::string& n, TensorT<T>& t) {
        f("pre.block" + std::to_string(i) + "." + n, t);
      });
    f("token_proj.w", token_proj_w);
    f("token_proj.b", token_proj_b);
    for (size_t i = 0; i < blocks.size(); ++i)
      blocks[i].for_each([&](const std::string& n, TensorT<T>& t) {
        f("xf.block" + std::to_string(i) + "." + n, t);
      });
    for (size_t i = 0; i < recon_blocks.size(); ++i)
      recon_blocks[i].for_each([&](const std::string& n, TensorT<T>& t) {
        f("recon.block" + std::to_string(i) + "." + n, t);
      });
    f("decode.w", decode_w);
    f("decode.b", decode_b);
    for (size_t i = 0; i < up_w.size(); ++i) {
      f("up" + std::to_string(i) + ".conv.w", up_w[i]);
      f("up" + std::to_string(i) + ".conv.b", up_b[i]);
    }
    f("out.conv.w", out_conv_w);
    f("out.conv.b", out_conv_b);
  }

  std::int64_t param_count() {
    std::int64_t n = 0;
    for_each_param([&](const std::string&, TensorT<T>& t) { n += t.numel(); });
    return n;
  }

  void set_requires_grad(bool on) {
    for_each_param([on](const std::string&, TensorT<T>& t) { t.set_requires_grad(on); });
  }

  void zero_grad() {
    for_each_param([](const std::string&, TensorT<T>& t) { t.zero_grad(); });
  }
};

using ModelWeights = ModelWeightsT<float>;

namespace detail {

// (B,C,N,H,W) -> (B*N,C,H,W) and back, for per-frame 2D convs.
template <class T>
TensorT<T> fold_frames(TapeT<T>* tape, const TensorT<T>& x) {
  std::int64_t B = x.dim(0), C = x.dim(1), N = x.dim(2), H = x.dim(3), W = x.dim(4);
  return reshape(tape, permute(tape, x, {0, 2, 1, 3, 4}), {B * N, C, H, W});
}

template <class T>
TensorT<T> unfold_frames(TapeT<T>* tape, const TensorT<T>& x, std::int64_t B) {
  std::int64_t BN = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  return permute(tape, reshape(tape, x, {B, BN / B, C, H, W}), {0, 2, 1, 3, 4});
}

}  // namespace detail

// clip (B,3,N,H,W) -> token grid (B,D,nN,nH,nW). Shallow conv, per-pixel
// temporal attention, patchify, linear token projection.
template <class T>
TokenGridT<T> embed_input(TapeT<T>* tape, const TensorT<T>& clip, const ModelWeightsT<T>& w) {
  const ModelConfig& cfg = w.cfg;
  if (clip.ndim() != 5) throw ShapeError("clip must be [B,C,N,H,W]");
  if (clip.dim(1) != 3) throw ShapeError("clip must have 3 channels");
  std::int64_t B = clip.dim(0), N = clip.dim(2), H = clip.dim(3), W = clip.dim(4);
  if (H % cfg.patch_h != 0 || W % cfg.patch_w != 0)
    throw ShapeError("frame extents " + std::to_string(H) + "x" + std::to_string(W) +
                     " not divisible by patch " + std::to_string(cfg.patch_h) + "x" +
                     std::to_string(cfg.patch_w));
  if (N % cfg.patch_n != 0)
    throw ShapeError("frame count not divisible by temporal patch size");

  // shallow features (B,d,N,H,W)
  TensorT<T> feats;
  if (cfg.pre_extraction == PreExtraction::Conv2d) {
    TensorT<T> x = detail::fold_frames(tape, clip);
    x = conv2d(tape, x, w.pre_conv_w, w.pre_conv_b);
    feats = detail::unfold_frames(tape, x, B);
  } else {
    feats = conv3d(tape, clip, w.pre_conv_w, w.pre_conv_b);
  }
  std::int64_t d = cfg.pre_channels;

  // temporal attention over each pixel's time sequence
  if (!w.pre_blocks.empty()) {
    TensorT<T> seq = reshape(tape, permute(tape, feats, {0, 3, 4, 2, 1}), {B * H * W, N, d});
    Positions pos(static_cast<size_t>(N));
    for (std::int64_t t = 0; t < N; ++t) pos[static_cast<size_t>(t)] = {0, static_cast<std::int32_t>(t)};
    for (const auto& blk : w.pre_blocks)
      seq = transformer_block(tape, seq, blk, pos, static_cast<T>(cfg.rope_base));
    feats = permute(tape, reshape(tape, seq, {B, H, W, N, d}), {0, 4, 3, 1, 2});
  }

  // patchify and project to the transformer width
  std::int64_t nN = N / cfg.patch_n, nH = H / cfg.patch_h, nW = W / cfg.patch_w;
  TensorT<T> p = reshape(tape, feats, {B, d, nN, cfg.patch_n, nH, cfg.patch_h, nW, cfg.patch_w});
  p = permute(tape, p, {0, 2, 4, 6, 1, 3, 5, 7});
  p = reshape(tape, p, {B, nN * nH * nW, cfg.token_width()});
  p = linear(tape, p, w.token_proj_w, w.token_proj_b);
  p = permute(tape, reshape(tape, p, {B, nN, nH, nW, cfg.embed_dim}), {0, 4, 1, 2, 3});
  return TokenGridT<T>(std::move(p));
}

// Runs the configured attention variant over the token grid.
template <class T>
TokenGridT<T> dualx_transform(TapeT<T>* tape, const TokenGridT<T>& grid,
                              const ModelWeightsT<T>& w) {
  if (grid.embed() != w.cfg.embed_dim)
    throw ConfigError("token grid width " + std::to_string(grid.embed()) +
                      " does not match transformer width " + std::to_string(w.cfg.embed_dim));
  if (w.blocks.empty()) return grid;
  return apply_variant(tape, grid, w.cfg.variant,
                       std::span<const AttnBlockWeightsT<T>>(w.blocks),
                       static_cast<T>(w.cfg.rope_base));
}

// Token grid + original clip -> (B,3,N,sH,sW). Temporal attention, token
// decode/unpatchify, conv + pixel-shuffle stages, final conv, plus the
// bicubic-upsampled input as a global residual. No clamping here; values are
// clamped at I/O boundaries only.
template <class T>
TensorT<T> reconstruct(TapeT<T>* tape, const TokenGridT<T>& grid, const TensorT<T>& clip,
                       const ModelWeightsT<T>& w) {
  const ModelConfig& cfg = w.cfg;
  std::int64_t B = grid.batch(), nN = grid.tpatches(), nH = grid.vpatches(),
               nW = grid.hpatches();
  std::int64_t N = nN * cfg.patch_n, H = nH * cfg.patch_h, W = nW * cfg.patch_w;
  if (clip.dim(0) != B || clip.dim(2) != N || clip.dim(3) != H || clip.dim(4) != W)
    throw ShapeError("clip/grid geometry mismatch in reconstruct");

  TokenGridT<T> g = grid;
  if (!w.recon_blocks.empty()) {
    TokenViewT<T> view = to_view(tape, g, ViewKind::Temporal);
    for (const auto& blk : w.recon_blocks)
      view.tokens =
          transformer_block(tape, view.tokens, blk, view.positions, static_cast<T>(cfg.rope_base));
    g = from_view(tape, view);
  }

  // decode tokens and unpatchify to (B,d,N,H,W)
  std::int64_t d = cfg.pre_channels;
  TensorT<T> t = reshape(tape, permute(tape, g.data, {0, 2, 3, 4, 1}), {B, nN * nH * nW, cfg.embed_dim});
  t = linear(tape, t, w.decode_w, w.decode_b);
  t = reshape(tape, t, {B, nN, nH, nW, d, cfg.patch_n, cfg.patch_h, cfg.patch_w});
  t = permute(tape, t, {0, 4, 1, 5, 2, 6, 3, 7});
  t = reshape(tape, t, {B, d, N, H, W});

  // frame-by-frame upsampling
  TensorT<T> x = detail::fold_frames(tape, t);
  for (size_t s = 0; s < w.up_w.size(); ++s) {
    x = conv2d(tape, x, w.up_w[s], w.up_b[s]);
    x = pixel_shuffle(tape, x, cfg.shuffle_factor);
  }
  x = conv2d(tape, x, w.out_conv_w, w.out_conv_b);
  TensorT<T> net = detail::unfold_frames(tape, x, B);

  TensorT<T> residual = resize_clip(clip, H * cfg.upscale, W * cfg.upscale, ResizeMode::Bicubic);
  return add(tape, net, residual);
}

template <class T>
TensorT<T> forward(TapeT<T>* tape, const TensorT<T>& clip, const ModelWeightsT<T>& w) {
  if (clip.requires_grad())
    throw ConfigError("gradients w.r.t. the input clip are not supported");
  TokenGridT<T> g = embed_input(tape, clip, w);
  g = dualx_transform(tape, g, w);
  return reconstruct(tape, g, clip, w);
}

}  // namespace dualx
