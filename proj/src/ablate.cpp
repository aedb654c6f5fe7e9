#include "dualx/ablate.hpp"

#include <ostream>

#include "dualx/metrics.hpp"
#include "dualx/profiler.hpp"
#include "dualx/trainer.hpp"

namespace dualx {

AblationSuite parse_suite(const std::string& name) {
  if (name == "attention" || name == "table1") return AblationSuite::AttentionVariants;
  if (name == "structure" || name == "table7") return AblationSuite::StructureChoices;
  if (name == "training" || name == "table8") return AblationSuite::TrainingStrategy;
  throw ConfigError("unknown ablation suite '" + name +
                    "' (use attention|structure|training or table1|table7|table8)");
}

namespace {

struct RowSpec {
  std::string name;
  ModelConfig model;
  bool pretrain = false;  // training suite: run stage 1 before stage 2
  int crop = 0;           // 0: use config
  int frames = 0;
};

std::vector<RowSpec> suite_rows(AblationSuite suite, const RunConfig& cfg) {
  std::vector<RowSpec> rows;
  ModelConfig base = cfg.model;
  switch (suite) {
    case AblationSuite::AttentionVariants: {
      const AttentionVariant variants[] = {
          AttentionVariant::Spatial,          AttentionVariant::Temporal,
          AttentionVariant::SpatialTemporal,  AttentionVariant::VerticalTemporal,
          AttentionVariant::HorizontalTemporal, AttentionVariant::DualAxialSerialVH};
      for (auto v : variants) {
        RowSpec r{variant_name(v), base, false, 0, 0};
        r.model.variant = v;
        rows.push_back(std::move(r));
      }
      break;
    }
    case AblationSuite::StructureChoices: {
      auto mk = [&](const char* name, AttentionVariant v, PreExtraction pe) {
        RowSpec r{name, base, false, 0, 0};
        r.model.variant = v;
        r.model.pre_extraction = pe;
        rows.push_back(std::move(r));
      };
      mk("interleaved_conv2d", AttentionVariant::DualAxialInterleaved, PreExtraction::Conv2d);
      mk("serial_vh_conv3d", AttentionVariant::DualAxialSerialVH, PreExtraction::Conv3d);
      mk("serial_hv_conv2d", AttentionVariant::DualAxialSerialHV, PreExtraction::Conv2d);
      mk("serial_vh_conv2d", AttentionVariant::DualAxialSerialVH, PreExtraction::Conv2d);
      break;
    }
    case AblationSuite::TrainingStrategy: {
      int crop = cfg.train.crop, frames = cfg.train.frames;
      int small_crop = std::max(16, crop / 2 / 8 * 8);
      int small_frames = std::max(1, frames / 2);
      rows.push_back({"scratch_full", base, false, crop, frames});
      rows.push_back({"pretrain_small_crop", base, true, small_crop, frames});
      rows.push_back({"pretrain_few_frames", base, true, crop, small_frames});
      rows.push_back({"pretrain_full", base, true, crop, frames});
      break;
    }
  }
  return rows;
}

}  // namespace

AblateResult run_ablation(AblationSuite suite, const RunConfig& cfg,
                          const std::vector<Tensor>& clips, std::ostream* log) {
  if (clips.empty()) throw ConfigError("ablation needs at least one clip");
  std::vector<Tensor> train_clips(clips.begin(),
                                  clips.size() > 1 ? clips.end() - 1 : clips.end());
  const Tensor& eval_clip = clips.back();

  std::vector<RowSpec> rows = suite_rows(suite, cfg);
  // suite contract: identical attention unit budget across rows
  int units = rows.front().model.total_units();
  for (const auto& r : rows)
    if (r.model.total_units() != units)
      throw ConfigError("ablation rows have unequal attention unit counts");

  // one shared evaluation pair per suite
  Tensor eval_lq;
  if (cfg.train.stage == 2) {
    DegradationConfig d = cfg.degrade;
    d.seed = cfg.seed;
    eval_lq = degrade_clip(eval_clip, d, /*stream=*/0xe7a1).first;
  } else {
    eval_lq = bicubic_down4(eval_clip);
  }

  GridDims ref_grid{1, 16, 180 / cfg.model.patch_h, 320 / cfg.model.patch_w};

  AblateResult result;
  std::string text = "# dualx ablation v1\n";
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-24s %12s %16s %10s %8s\n", "row", "params", "score_macs_ref",
                "psnr", "ssim");
  text += buf;

  for (const auto& spec : rows) {
    if (log) (*log) << "ablation row " << spec.name << "\n";
    Rng init_rng(cfg.seed);
    ModelWeights weights = ModelWeights::init(spec.model, init_rng);

    TrainConfig tc = cfg.train;
    tc.seed = cfg.seed;
    if (spec.crop > 0) tc.crop = spec.crop;
    if (spec.frames > 0) tc.frames = spec.frames;

    if (suite == AblationSuite::TrainingStrategy) {
      TrainConfig stage2 = tc;
      stage2.stage = 2;
      if (spec.pretrain) {
        TrainConfig stage1 = tc;
        stage1.stage = 1;
        run_stage(train_clips, weights, stage1, nullptr);
      }
      run_stage(train_clips, weights, stage2, &cfg.degrade);
    } else {
      run_stage(train_clips, weights, tc, tc.stage == 2 ? &cfg.degrade : nullptr);
    }

    Tensor sr = forward(static_cast<Tape*>(nullptr), eval_lq, weights);
    clamp01(sr);
    AblateRow row;
    row.name = spec.name;
    row.params = weights.param_count();
    row.score_macs_ref =
        attention_cost(spec.model.variant, ref_grid,
                       {spec.model.embed_dim, spec.model.mlp_dim}, units)
            .macs_scores;
    row.psnr = psnr(sr, eval_clip);
    row.ssim = ssim(sr, eval_clip);
    std::snprintf(buf, sizeof buf, "%-24s %12lld %16lld %10.4f %8.4f\n", row.name.c_str(),
                  static_cast<long long>(row.params),
                  static_cast<long long>(row.score_macs_ref), row.psnr, row.ssim);
    text += buf;
    result.rows.push_back(std::move(row));
  }
  result.text = std::move(text);
  return result;
}

}  // namespace dualx
