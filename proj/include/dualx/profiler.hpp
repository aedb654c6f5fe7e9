#pragma once

#include <cstdio>
#include <string>

#include "dualx/model.hpp"

// Closed-form parameter and MAC counts for the whole pipeline, decomposed by
// block kind. Counting convention: 1 MAC = one multiply-accumulate; biases
// and normalizations are excluded; attention score and value matmuls are
// included; the bicubic residual path has no learned ops and is not counted.

namespace dualx {

struct ProfileInput {
  std::int64_t batch = 1, frames = 16, height = 64, width = 64;
};

// Reference complexity figures reported for the full-scale configuration.
// The exact counting convention behind them is not recoverable, so reports
// print deltas without asserting agreement.
constexpr double kReferenceParamsM = 127.95;
constexpr double kReferenceMacsG = 99.41;

inline CostReport profile_model(const ModelConfig& cfg, const ProfileInput& in) {
  cfg.validate();
  if (in.height % cfg.patch_h != 0 || in.width % cfg.patch_w != 0 ||
      in.frames % cfg.patch_n != 0)
    throw ConfigError("profile input not divisible by the patch size");
  CostReport r;
  std::int64_t B = in.batch, N = in.frames, H = in.height, W = in.width;
  std::int64_t d = cfg.pre_channels, D = cfg.embed_dim, tw = cfg.token_width();

  // shallow conv
  if (cfg.pre_extraction == PreExtraction::Conv2d) {
    r.params += d * 3 * 9 + d;
    r.macs_conv += B * N * H * W * 9 * 3 * d;
  } else {
    r.params += d * 3 * 27 + d;
    r.macs_conv += B * N * H * W * 27 * 3 * d;
  }

  // preprocessing temporal attention over per-pixel sequences
  GridDims pre_grid{B, N, H, W};  // one token per pixel per frame
  if (cfg.pre_attn_depth > 0)
    r += attention_cost(AttentionVariant::Temporal, pre_grid, {d, cfg.pre_mlp},
                        cfg.pre_attn_depth);

  // token projection
  GridDims grid{B, N / cfg.patch_n, H / cfg.patch_h, W / cfg.patch_w};
  std::int64_t tokens = grid.tokens();
  r.params += tw * D + D;
  r.macs_proj += tokens * tw * D;

  // dual axial transformer
  if (cfg.total_units() > 0)
    r += attention_cost(cfg.variant, grid, {D, cfg.mlp_dim}, cfg.total_units());

  // reconstruction attention + decode
  if (cfg.recon_attn_depth > 0)
    r += attention_cost(AttentionVariant::Temporal, grid, {D, cfg.mlp_dim},
                        cfg.recon_attn_depth);
  r.params += D * tw + tw;
  r.macs_proj += tokens * D * tw;

  // upsampling convs
  std::int64_t r2 = static_cast<std::int64_t>(cfg.shuffle_factor) * cfg.shuffle_factor;
  std::int64_t c_in = d, h = H, w = W;
  for (int s = 0; s < cfg.upsample_stages(); ++s) {
    std::int64_t c_out = cfg.recon_channels * r2;
    r.params += c_out * c_in * 9 + c_out;
    r.macs_conv += B * N * h * w * 9 * c_in * c_out;
    c_in = cfg.recon_channels;
    h *= cfg.shuffle_factor;
    w *= cfg.shuffle_factor;
  }
  r.params += 3 * c_in * 9 + 3;
  r.macs_conv += B * N * h * w * 9 * c_in * 3;
  return r;
}

inline std::string cost_report_text(const CostReport& r, const ProfileInput& in,
                                    bool with_reference, const std::string& config_hash = "") {
  std::string s = "# dualx cost v1\n";
  s += "convention 1 MAC = one multiply-accumulate; biases and norms excluded; "
       "attention score and value matmuls included; bicubic residual not counted\n";
  if (!config_hash.empty()) s += "config_hash " + config_hash + "\n";
  char buf[200];
  std::snprintf(buf, sizeof buf, "input B %lld N %lld H %lld W %lld\n",
                static_cast<long long>(in.batch), static_cast<long long>(in.frames),
                static_cast<long long>(in.height), static_cast<long long>(in.width));
  s += buf;
  std::snprintf(buf, sizeof buf, "params %lld\n", static_cast<long long>(r.params));
  s += buf;
  std::snprintf(buf, sizeof buf, "macs_total %lld\n", static_cast<long long>(r.macs_total()));
  s += buf;
  std::snprintf(buf, sizeof buf,
                "macs_projections %lld\nmacs_scores %lld\nmacs_values %lld\nmacs_mlp "
                "%lld\nmacs_conv %lld\n",
                static_cast<long long>(r.macs_proj), static_cast<long long>(r.macs_scores),
                static_cast<long long>(r.macs_values), static_cast<long long>(r.macs_mlp),
                static_cast<long long>(r.macs_conv));
  s += buf;
  if (with_reference) {
    double params_m = static_cast<double>(r.params) / 1e6;
    double macs_g = static_cast<double>(r.macs_total()) / 1e9;
    std::snprintf(buf, sizeof buf, "params_M %.4f reference_params_M %.2f delta_pct %+.2f\n",
                  params_m, kReferenceParamsM,
                  100.0 * (params_m - kReferenceParamsM) / kReferenceParamsM);
    s += buf;
    std::snprintf(buf, sizeof buf, "macs_G %.4f reference_macs_G %.2f delta_pct %+.2f\n",
                  macs_g, kReferenceMacsG, 100.0 * (macs_g - kReferenceMacsG) / kReferenceMacsG);
    s += buf;
  }
  return s;
}

}  // namespace dualx
