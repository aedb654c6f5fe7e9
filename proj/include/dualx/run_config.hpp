#pragma once

#include <string>
#include <vector>

#include "dualx/degrade.hpp"
#include "dualx/model.hpp"
#include "dualx/tiling.hpp"
#include "dualx/trainer.hpp"

// Run configuration: a JSON file with model/train/degrade/tiling sections and
// a top-level seed, plus dotted-path command-line overrides. Unknown keys are
// rejected. The canonical serialization is hashed (FNV-1a 64) and the hash is
// embedded in every output for provenance.

namespace dualx {

struct RunConfig {
  std::uint64_t seed = 0;
  ModelConfig model = ModelConfig::desk_preset();
  TrainConfig train;
  DegradationConfig degrade;
  TilingConfig tiling;

  void validate() const {
    model.validate();
    train.validate();
    degrade.validate();
    tiling.validate();
  }
};

// Parses JSON text (strict keys). `overrides` are dotted key=value pairs,
// e.g. "model.embed_dim=64"; values parse as JSON fragments with a string
// fallback.
RunConfig parse_run_config(const std::string& json_text,
                           const std::vector<std::string>& overrides = {});

RunConfig load_run_config(const std::string& path,
                          const std::vector<std::string>& overrides = {});

// Canonical (key-sorted, minified) JSON of the full config.
std::string run_config_json(const RunConfig& cfg);

std::uint64_t fnv1a64(const std::string& s);

// 16-hex-digit content hash of the canonical serialization.
std::string config_hash(const RunConfig& cfg);

// Model-config round trip used by checkpoints.
std::string model_config_json(const ModelConfig& cfg);
ModelConfig parse_model_config(const std::string& json_text);

}  // namespace dualx
