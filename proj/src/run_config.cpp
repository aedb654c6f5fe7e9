#include "dualx/run_config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace dualx {

using nlohmann::json;

namespace {

void reject_unknown(const json& obj, const std::set<std::string>& allowed,
                    const std::string& where) {
  for (const auto& [key, value] : obj.items()) {
    (void)value;
    if (!allowed.count(key))
      throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

AttentionVariant parse_variant(const std::string& v, const std::string& arrangement) {
  if (v == "spatial") return AttentionVariant::Spatial;
  if (v == "temporal") return AttentionVariant::Temporal;
  if (v == "spatial_temporal") return AttentionVariant::SpatialTemporal;
  if (v == "vertical_temporal") return AttentionVariant::VerticalTemporal;
  if (v == "horizontal_temporal") return AttentionVariant::HorizontalTemporal;
  if (v == "dual_axial") {
    if (arrangement == "serial_vh") return AttentionVariant::DualAxialSerialVH;
    if (arrangement == "serial_hv") return AttentionVariant::DualAxialSerialHV;
    if (arrangement == "interleaved") return AttentionVariant::DualAxialInterleaved;
    throw ConfigError("unknown arrangement '" + arrangement + "'");
  }
  throw ConfigError("unknown attention variant '" + v + "'");
}

std::pair<std::string, std::string> variant_strings(AttentionVariant v) {
  switch (v) {
    case AttentionVariant::Spatial: return {"spatial", "serial_vh"};
    case AttentionVariant::Temporal: return {"temporal", "serial_vh"};
    case AttentionVariant::SpatialTemporal: return {"spatial_temporal", "serial_vh"};
    case AttentionVariant::VerticalTemporal: return {"vertical_temporal", "serial_vh"};
    case AttentionVariant::HorizontalTemporal: return {"horizontal_temporal", "serial_vh"};
    case AttentionVariant::DualAxialSerialVH: return {"dual_axial", "serial_vh"};
    case AttentionVariant::DualAxialSerialHV: return {"dual_axial", "serial_hv"};
    case AttentionVariant::DualAxialInterleaved: return {"dual_axial", "interleaved"};
  }
  return {"dual_axial", "serial_vh"};
}

ResizeMode parse_resize_mode(const std::string& m) {
  if (m == "bicubic") return ResizeMode::Bicubic;
  if (m == "bilinear") return ResizeMode::Bilinear;
  if (m == "nearest") return ResizeMode::Nearest;
  throw ConfigError("unknown resize mode '" + m + "'");
}

void apply_model(const json& j, ModelConfig& m) {
  reject_unknown(j, {"preset", "upscale", "patch_h", "patch_w", "patch_n", "pre_channels",
                     "pre_extraction", "pre_attn_depth", "pre_mlp", "pre_heads", "vtab_depth",
                     "htab_depth", "embed_dim", "mlp_dim", "heads", "variant", "arrangement",
                     "recon_attn_depth", "recon_channels", "shuffle_factor", "rope_base"},
                 "model");
  if (j.contains("preset")) {
    std::string p = j["preset"].get<std::string>();
    if (p == "paper")
      m = ModelConfig::paper_preset();
    else if (p == "desk")
      m = ModelConfig::desk_preset();
    else if (p == "micro")
      m = ModelConfig::micro_preset();
    else
      throw ConfigError("unknown model preset '" + p + "'");
  }
  auto get = [&](const char* k, auto& field) {
    if (j.contains(k)) field = j[k].get<std::decay_t<decltype(field)>>();
  };
  get("upscale", m.upscale);
  get("patch_h", m.patch_h);
  get("patch_w", m.patch_w);
  get("patch_n", m.patch_n);
  get("pre_channels", m.pre_channels);
  if (j.contains("pre_extraction")) {
    std::string p = j["pre_extraction"].get<std::string>();
    if (p == "conv2d")
      m.pre_extraction = PreExtraction::Conv2d;
    else if (p == "conv3d")
      m.pre_extraction = PreExtraction::Conv3d;
    else
      throw ConfigError("pre_extraction must be conv2d or conv3d");
  }
  get("pre_attn_depth", m.pre_attn_depth);
  get("pre_mlp", m.pre_mlp);
  get("pre_heads", m.pre_heads);
  get("vtab_depth", m.vtab_depth);
  get("htab_depth", m.htab_depth);
  get("embed_dim", m.embed_dim);
  get("mlp_dim", m.mlp_dim);
  get("heads", m.heads);
  get("recon_attn_depth", m.recon_attn_depth);
  get("recon_channels", m.recon_channels);
  get("shuffle_factor", m.shuffle_factor);
  get("rope_base", m.rope_base);
  auto [vname, aname] = variant_strings(m.variant);
  if (j.contains("variant")) vname = j["variant"].get<std::string>();
  if (j.contains("arrangement")) aname = j["arrangement"].get<std::string>();
  m.variant = parse_variant(vname, aname);
}

void apply_train(const json& j, TrainConfig& t) {
  reject_unknown(j, {"stage", "lr", "beta1", "beta2", "weight_decay", "adam_eps", "batch",
                     "crop", "frames", "iterations", "lambda_pix", "lambda_per", "lambda_adv",
                     "grad_clip", "checkpoint_every"},
                 "train");
  auto get = [&](const char* k, auto& field) {
    if (j.contains(k)) field = j[k].get<std::decay_t<decltype(field)>>();
  };
  get("stage", t.stage);
  get("lr", t.lr);
  get("beta1", t.beta1);
  get("beta2", t.beta2);
  get("weight_decay", t.weight_decay);
  get("adam_eps", t.adam_eps);
  get("batch", t.batch);
  get("crop", t.crop);
  get("frames", t.frames);
  get("iterations", t.iterations);
  get("lambda_pix", t.lambda_pix);
  get("lambda_per", t.lambda_per);
  get("lambda_adv", t.lambda_adv);
  get("grad_clip", t.grad_clip);
  get("checkpoint_every", t.checkpoint_every);
}

void apply_degrade(const json& j, DegradationConfig& d) {
  reject_unknown(j, {"blur_sigma", "blur_kernel", "resize_scale", "resize_modes", "noise_sigma",
                     "jpeg_quality"},
                 "degrade");
  auto get_range = [&](const char* k, double& lo, double& hi) {
    if (!j.contains(k)) return;
    const auto& a = j[k];
    if (!a.is_array() || a.size() != 2) throw ConfigError(std::string(k) + " must be [lo, hi]");
    lo = a[0].get<double>();
    hi = a[1].get<double>();
  };
  get_range("blur_sigma", d.blur_sigma_lo, d.blur_sigma_hi);
  if (j.contains("blur_kernel")) d.blur_kernel = j["blur_kernel"].get<int>();
  get_range("resize_scale", d.resize_lo, d.resize_hi);
  get_range("noise_sigma", d.noise_lo, d.noise_hi);
  if (j.contains("jpeg_quality")) {
    const auto& a = j["jpeg_quality"];
    if (!a.is_array() || a.size() != 2) throw ConfigError("jpeg_quality must be [lo, hi]");
    d.jpeg_q_lo = a[0].get<int>();
    d.jpeg_q_hi = a[1].get<int>();
  }
  if (j.contains("resize_modes")) {
    d.resize_modes.clear();
    for (const auto& m : j["resize_modes"])
      d.resize_modes.push_back(parse_resize_mode(m.get<std::string>()));
  }
}

void apply_tiling(const json& j, TilingConfig& t) {
  reject_unknown(j, {"tile", "overlap", "t_window", "t_overlap", "context"}, "tiling");
  auto get = [&](const char* k, int& field) {
    if (j.contains(k)) field = j[k].get<int>();
  };
  get("tile", t.tile);
  get("overlap", t.overlap);
  get("t_window", t.t_window);
  get("t_overlap", t.t_overlap);
  get("context", t.context);
}

json model_to_json(const ModelConfig& m) {
  auto [vname, aname] = variant_strings(m.variant);
  return json{{"upscale", m.upscale},
              {"patch_h", m.patch_h},
              {"patch_w", m.patch_w},
              {"patch_n", m.patch_n},
              {"pre_channels", m.pre_channels},
              {"pre_extraction", m.pre_extraction == PreExtraction::Conv2d ? "conv2d" : "conv3d"},
              {"pre_attn_depth", m.pre_attn_depth},
              {"pre_mlp", m.pre_mlp},
              {"pre_heads", m.pre_heads},
              {"vtab_depth", m.vtab_depth},
              {"htab_depth", m.htab_depth},
              {"embed_dim", m.embed_dim},
              {"mlp_dim", m.mlp_dim},
              {"heads", m.heads},
              {"variant", vname},
              {"arrangement", aname},
              {"recon_attn_depth", m.recon_attn_depth},
              {"recon_channels", m.recon_channels},
              {"shuffle_factor", m.shuffle_factor},
              {"rope_base", m.rope_base}};
}

json run_to_json(const RunConfig& c) {
  json degrade{{"blur_sigma", {c.degrade.blur_sigma_lo, c.degrade.blur_sigma_hi}},
               {"blur_kernel", c.degrade.blur_kernel},
               {"resize_scale", {c.degrade.resize_lo, c.degrade.resize_hi}},
               {"noise_sigma", {c.degrade.noise_lo, c.degrade.noise_hi}},
               {"jpeg_quality", {c.degrade.jpeg_q_lo, c.degrade.jpeg_q_hi}}};
  json modes = json::array();
  for (auto m : c.degrade.resize_modes) modes.push_back(resize_mode_name(m));
  degrade["resize_modes"] = modes;
  return json{
      {"seed", c.seed},
      {"model", model_to_json(c.model)},
      {"train",
       {{"stage", c.train.stage},
        {"lr", c.train.lr},
        {"beta1", c.train.beta1},
        {"beta2", c.train.beta2},
        {"weight_decay", c.train.weight_decay},
        {"adam_eps", c.train.adam_eps},
        {"batch", c.train.batch},
        {"crop", c.train.crop},
        {"frames", c.train.frames},
        {"iterations", c.train.iterations},
        {"lambda_pix", c.train.lambda_pix},
        {"lambda_per", c.train.lambda_per},
        {"lambda_adv", c.train.lambda_adv},
        {"grad_clip", c.train.grad_clip},
        {"checkpoint_every", c.train.checkpoint_every}}},
      {"degrade", degrade},
      {"tiling",
       {{"tile", c.tiling.tile},
        {"overlap", c.tiling.overlap},
        {"t_window", c.tiling.t_window},
        {"t_overlap", c.tiling.t_overlap},
        {"context", c.tiling.context}}}};
}

}  // namespace

RunConfig parse_run_config(const std::string& json_text,
                           const std::vector<std::string>& overrides) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  for (const std::string& ov : overrides) {
    auto eq = ov.find('=');
    if (eq == std::string::npos) throw ConfigError("override '" + ov + "' is not key=value");
    std::string path = ov.substr(0, eq), value = ov.substr(eq + 1);
    json parsed;
    try {
      parsed = json::parse(value);
    } catch (const json::exception&) {
      parsed = value;  // bare string
    }
    json* node = &j;
    size_t pos = 0;
    while (true) {
      auto dot = path.find('.', pos);
      std::string key = path.substr(pos, dot == std::string::npos ? dot : dot - pos);
      if (key.empty()) throw ConfigError("override '" + ov + "' has an empty path segment");
      if (dot == std::string::npos) {
        (*node)[key] = parsed;
        break;
      }
      node = &(*node)[key];
      pos = dot + 1;
    }
  }

  reject_unknown(j, {"seed", "model", "train", "degrade", "tiling"}, "config root");
  RunConfig cfg;
  if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("model")) apply_model(j["model"], cfg.model);
  if (j.contains("train")) apply_train(j["train"], cfg.train);
  if (j.contains("degrade")) apply_degrade(j["degrade"], cfg.degrade);
  if (j.contains("tiling")) apply_tiling(j["tiling"], cfg.tiling);
  cfg.train.seed = cfg.seed;
  cfg.degrade.seed = cfg.seed;
  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const std::string& path, const std::vector<std::string>& overrides) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open config " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_run_config(ss.str(), overrides);
}

std::string run_config_json(const RunConfig& cfg) { return run_to_json(cfg).dump(); }

std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string config_hash(const RunConfig& cfg) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(run_config_json(cfg))));
  return buf;
}

std::string model_config_json(const ModelConfig& cfg) { return model_to_json(cfg).dump(); }

ModelConfig parse_model_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("model config is not valid JSON: ") + e.what());
  }
  ModelConfig m;
  apply_model(j, m);
  return m;
}

}  // namespace dualx
