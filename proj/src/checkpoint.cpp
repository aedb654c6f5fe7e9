#include "dualx/checkpoint.hpp"

#include <fstream>
#include <sstream>
#include <vector>

#include "dualx/run_config.hpp"

namespace dualx {

void save_checkpoint(const std::string& path, ModelWeights& weights,
                     const std::string& config_hash) {
  // serialize tensors first to know their offsets
  std::vector<std::pair<std::string, std::string>> blobs;  // name -> bytes
  weights.for_each_param([&](const std::string& name, Tensor& t) {
    std::ostringstream os(std::ios::binary);
    write_tensor(os, t);
    blobs.emplace_back(name, os.str());
  });

  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path + " for writing");
  f << "DXCKPT v1\n";
  f << "config " << model_config_json(weights.cfg) << "\n";
  f << "config_hash " << (config_hash.empty() ? "-" : config_hash) << "\n";
  f << "tensors " << blobs.size() << "\n";
  std::uint64_t offset = 0;
  for (const auto& [name, bytes] : blobs) {
    f << name << " " << offset << " " << bytes.size() << "\n";
    offset += bytes.size();
  }
  f << "DATA\n";
  for (const auto& [name, bytes] : blobs)
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("checkpoint write failed for " + path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path);
  std::string line;
  if (!std::getline(f, line) || line != "DXCKPT v1")
    throw IoError(path + " is not a v1 checkpoint");
  if (!std::getline(f, line) || line.rfind("config ", 0) != 0)
    throw IoError("checkpoint missing config line");
  ModelConfig cfg = parse_model_config(line.substr(7));
  LoadedCheckpoint out{ModelWeights::zeros(cfg), "-"};
  if (!std::getline(f, line) || line.rfind("config_hash ", 0) != 0)
    throw IoError("checkpoint missing config_hash line");
  out.config_hash = line.substr(12);
  if (!std::getline(f, line) || line.rfind("tensors ", 0) != 0)
    throw IoError("checkpoint missing tensor count");
  size_t count = std::stoul(line.substr(8));
  std::vector<std::pair<std::string, std::pair<std::uint64_t, std::uint64_t>>> table;
  for (size_t i = 0; i < count; ++i) {
    if (!std::getline(f, line)) throw IoError("checkpoint: truncated tensor table");
    std::istringstream ls(line);
    std::string name;
    std::uint64_t off = 0, bytes = 0;
    if (!(ls >> name >> off >> bytes)) throw IoError("checkpoint: bad table line '" + line + "'");
    table.emplace_back(name, std::make_pair(off, bytes));
  }
  if (!std::getline(f, line) || line != "DATA") throw IoError("checkpoint missing DATA marker");
  std::streampos data_start = f.tellg();

  size_t idx = 0;
  out.weights.for_each_param([&](const std::string& name, Tensor& t) {
    if (idx >= table.size() || table[idx].first != name)
      throw IoError("checkpoint tensor order mismatch at '" + name + "'");
    f.seekg(data_start + static_cast<std::streamoff>(table[idx].second.first));
    Tensor loaded = read_tensor<float>(f);
    if (loaded.shape() != t.shape())
      throw IoError("checkpoint tensor '" + name + "' has shape " + shape_str(loaded.shape()) +
                    ", expected " + shape_str(t.shape()));
    t = loaded;
    ++idx;
  });
  if (idx != table.size()) throw IoError("checkpoint has extra tensors");
  return out;
}

}  // namespace dualx
