#pragma once

#include <string>

#include "dualx/model.hpp"

// Checkpoint file: a structured-text header (full model config as one JSON
// line, provenance hash, name -> (offset, bytes) table) followed by
// concatenated DXTENSOR blobs. Round trips are bit-exact.

namespace dualx {

void save_checkpoint(const std::string& path, ModelWeights& weights,
                     const std::string& config_hash = "-");

struct LoadedCheckpoint {
  ModelWeights weights;
  std::string config_hash;
};

LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace dualx
