#pragma once

#include <functional>
#include <string>
#include <vector>

#include "dualx/degrade.hpp"
#include "dualx/model.hpp"

// Staged toy-scale training: stage 1 minimizes Charbonnier on bicubic x4
// pairs, stage 2 on first-order degraded pairs. AdamW with decoupled weight
// decay, constant learning rate, global-norm gradient clipping. Fully seeded:
// data sampling, degradation draws and initialization all derive from the
// config seed, so a loss trace replays bit-identically.

namespace dualx {

struct TrainConfig {
  int stage = 1;
  double lr = 5e-5;
  double beta1 = 0.9, beta2 = 0.99;
  double weight_decay = 0.01;
  double adam_eps = 1e-8;
  int batch = 1;
  int crop = 64;   // HQ crop size; the LQ crop is crop/4
  int frames = 16;
  int iterations = 500;
  double lambda_pix = 1e-2, lambda_per = 1.0, lambda_adv = 5e-3;  // stage-3 interface
  double grad_clip = 1.0;
  std::uint64_t seed = 0;
  int checkpoint_every = 0;  // 0: final only

  void validate() const {
    if (stage != 1 && stage != 2) throw ConfigError("train stage must be 1 or 2");
    if (lr <= 0 || beta1 < 0 || beta1 >= 1 || beta2 < 0 || beta2 >= 1)
      throw ConfigError("bad optimizer constants");
    if (batch < 1 || frames < 1 || iterations < 0) throw ConfigError("bad train sizes");
    if (crop < 8 || crop % 8 != 0)
      throw ConfigError("crop must be a positive multiple of 8 (x4 scale times patch 2)");
    if (lambda_pix < 0 || lambda_per < 0 || lambda_adv < 0)
      throw ConfigError("loss weights must be nonnegative");
  }
};

// Per-parameter first/second moment state, aligned with the traversal order
// of ModelWeights::for_each_param.
struct AdamState {
  std::vector<std::vector<float>> m, v;
  std::int64_t step = 0;
};

inline AdamState make_adam_state(ModelWeights& w) {
  AdamState s;
  w.for_each_param([&](const std::string&, Tensor& t) {
    s.m.emplace_back(static_cast<size_t>(t.numel()), 0.0f);
    s.v.emplace_back(static_cast<size_t>(t.numel()), 0.0f);
  });
  return s;
}

// Decoupled-weight-decay adaptive step with bias correction. Gradients must
// already be populated; shapes are validated against the state.
inline void adamw_step(ModelWeights& w, AdamState& st, const TrainConfig& cfg) {
  ++st.step;
  double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(st.step));
  double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(st.step));
  size_t idx = 0;
  w.for_each_param([&](const std::string& name, Tensor& t) {
    if (idx >= st.m.size() || st.m[idx].size() != static_cast<size_t>(t.numel()))
      throw ShapeError("optimizer state mismatch at " + name);
    auto& m = st.m[idx];
    auto& v = st.v[idx];
    const auto& g = t.grad();
    auto& val = t.values_mut();
    for (size_t i = 0; i < val.size(); ++i) {
      double gi = static_cast<double>(g[i]);
      double mi = cfg.beta1 * static_cast<double>(m[i]) + (1.0 - cfg.beta1) * gi;
      double vi = cfg.beta2 * static_cast<double>(v[i]) + (1.0 - cfg.beta2) * gi * gi;
      m[i] = static_cast<float>(mi);
      v[i] = static_cast<float>(vi);
      double mhat = mi / bc1, vhat = vi / bc2;
      double upd = mhat / (std::sqrt(vhat) + cfg.adam_eps) + cfg.weight_decay * static_cast<double>(val[i]);
      val[i] = static_cast<float>(static_cast<double>(val[i]) - cfg.lr * upd);
    }
    ++idx;
  });
}

// Scales gradients so their global L2 norm is at most `clip`.
inline void clip_grad_norm(ModelWeights& w, double clip) {
  if (clip <= 0) return;
  double sq = 0.0;
  w.for_each_param([&](const std::string&, Tensor& t) {
    for (float g : t.grad()) sq += static_cast<double>(g) * static_cast<double>(g);
  });
  double norm = std::sqrt(sq);
  if (norm <= clip) return;
  float s = static_cast<float>(clip / norm);
  w.for_each_param([&](const std::string&, Tensor& t) {
    for (float& g : t.grad_mut()) g *= s;
  });
}

// Weighted sum of pluggable loss terms (the staged losses use the pixel term
// alone; perceptual/adversarial slots exist for interface completeness).
template <class T>
using LossTerm = std::function<TensorT<T>(TapeT<T>*, const TensorT<T>&, const TensorT<T>&)>;

template <class T>
TensorT<T> combined_loss(TapeT<T>* tape, const TensorT<T>& pred, const TensorT<T>& target,
                         const std::vector<LossTerm<T>>& terms,
                         const std::vector<double>& lambdas) {
  if (terms.size() != lambdas.size())
    throw ConfigError("combined_loss: one weight per term required");
  for (double l : lambdas)
    if (l < 0) throw ConfigError("combined_loss: negative weight");
  TensorT<T> total = TensorT<T>::scalar(T(0));
  for (size_t i = 0; i < terms.size(); ++i) {
    if (lambdas[i] == 0.0) continue;
    total = add(tape, total, scale(tape, terms[i](tape, pred, target), static_cast<T>(lambdas[i])));
  }
  return total;
}

struct TrainResult {
  std::vector<double> loss_trace;
};

// One training stage over in-memory HQ clips. Per iteration: sample clip,
// frame window and /4-aligned crop, synthesize the LQ counterpart (stage 1:
// bicubic x4; stage 2: seeded first-order degradation), minimize Charbonnier.
// `on_iteration` (optional) observes (iter, loss); `on_checkpoint` fires every
// checkpoint_every iterations and once at the end.
inline TrainResult run_stage(
    const std::vector<Tensor>& hq_clips, ModelWeights& weights, const TrainConfig& cfg,
    const DegradationConfig* degrade_cfg = nullptr,
    const std::function<void(int, double)>& on_iteration = {},
    const std::function<void(int, ModelWeights&)>& on_checkpoint = {}) {
  cfg.validate();
  if (hq_clips.empty()) throw ConfigError("training dataset is empty");
  if (cfg.stage == 2 && !degrade_cfg)
    throw ConfigError("stage 2 needs a degradation config");
  for (const auto& c : hq_clips)
    if (c.ndim() != 5 || c.dim(0) != 1 || c.dim(1) != 3)
      throw ShapeError("HQ dataset clips must be [1,3,N,H,W]");

  Rng rng(cfg.seed);
  AdamState state = make_adam_state(weights);
  weights.set_requires_grad(true);
  TrainResult result;

  for (int iter = 0; iter < cfg.iterations; ++iter) {
    // assemble the batch
    std::int64_t crop = cfg.crop;
    Tensor hq;
    for (int b = 0; b < cfg.batch; ++b) {
      const Tensor& clip = hq_clips[static_cast<size_t>(rng.next_index(hq_clips.size()))];
      std::int64_t N = clip.dim(2), H = clip.dim(3), W = clip.dim(4);
      std::int64_t ch = std::min<std::int64_t>(crop, H - (H % 8));
      std::int64_t cw = std::min<std::int64_t>(crop, W - (W % 8));
      std::int64_t fr = std::min<std::int64_t>(cfg.frames, N);
      std::int64_t f0 = static_cast<std::int64_t>(rng.next_index(static_cast<std::uint64_t>(N - fr + 1)));
      std::int64_t y0 = 4 * static_cast<std::int64_t>(rng.next_index(static_cast<std::uint64_t>((H - ch) / 4 + 1)));
      std::int64_t x0 = 4 * static_cast<std::int64_t>(rng.next_index(static_cast<std::uint64_t>((W - cw) / 4 + 1)));
      Tensor sample(Shape{1, 3, fr, ch, cw});
      for (std::int64_t c = 0; c < 3; ++c)
        for (std::int64_t n = 0; n < fr; ++n)
          for (std::int64_t y = 0; y < ch; ++y) {
            const float* src =
                clip.data() + ((0 * 3 + c) * clip.dim(2) + f0 + n) * H * W + (y0 + y) * W + x0;
            float* dst =
                sample.values_mut().data() + ((c * fr + n) * ch + y) * cw;
            std::copy(src, src + cw, dst);
          }
      if (b == 0 && cfg.batch == 1) {
        hq = std::move(sample);
      } else {
        if (b == 0) hq = Tensor(Shape{cfg.batch, 3, fr, ch, cw});
        std::copy(sample.data(), sample.data() + sample.numel(),
                  hq.values_mut().data() + b * sample.numel());
      }
    }

    Tensor lq;
    if (cfg.stage == 1) {
      lq = bicubic_down4(hq);
    } else {
      DegradationConfig d = *degrade_cfg;
      d.seed = cfg.seed;
      lq = degrade_clip(hq, d, static_cast<std::uint64_t>(iter) + 1).first;
    }

    Tape tape;
    Tensor pred = forward(&tape, lq, weights);
    Tensor loss = charbonnier_loss(&tape, pred, hq);
    double loss_v = static_cast<double>(loss.item());
    if (!std::isfinite(loss_v))
      throw NumericError("training diverged at iteration " + std::to_string(iter));
    weights.zero_grad();
    tape.backward(loss);
    clip_grad_norm(weights, cfg.grad_clip);
    adamw_step(weights, state, cfg);

    result.loss_trace.push_back(loss_v);
    if (on_iteration) on_iteration(iter, loss_v);
    if (on_checkpoint && cfg.checkpoint_every > 0 && (iter + 1) % cfg.checkpoint_every == 0)
      on_checkpoint(iter + 1, weights);
  }
  if (on_checkpoint) on_checkpoint(cfg.iterations, weights);
  return result;
}

}  // namespace dualx
