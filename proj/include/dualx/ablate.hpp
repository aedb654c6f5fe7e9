#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "dualx/run_config.hpp"

// Ablation suites: each row trains the same toy budget from the same seed and
// is evaluated on a held-out clip, reported next to analytic cost columns at
// a fixed 320x180, 16-frame reference shape.
//   attention : the six attention variants at equal total unit count
//   structure : block connection/arrangement and 2D vs 3D pre-extraction
//   training  : pretraining on/off, crop size, frame count

namespace dualx {

enum class AblationSuite { AttentionVariants, StructureChoices, TrainingStrategy };

// Accepts the descriptive names plus the table aliases table1/table7/table8.
AblationSuite parse_suite(const std::string& name);

struct AblateRow {
  std::string name;
  std::int64_t params = 0;
  std::int64_t score_macs_ref = 0;  // attention-score MACs at the reference shape
  double psnr = 0.0, ssim = 0.0;
};

struct AblateResult {
  std::vector<AblateRow> rows;
  std::string text;
};

AblateResult run_ablation(AblationSuite suite, const RunConfig& cfg,
                          const std::vector<Tensor>& clips, std::ostream* log);

}  // namespace dualx
