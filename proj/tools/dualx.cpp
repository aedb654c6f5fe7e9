// Command line front end: degrade, train, infer, eval, profile, ablate,
// motion. Every run validates its config, writes outputs with a provenance
// record carrying the config hash, and exits 0 on success, 1 on runtime
// errors (single machine-parseable line on stderr), 2 on usage errors.

#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "dualx/ablate.hpp"
#include "dualx/checkpoint.hpp"
#include "dualx/image_io.hpp"
#include "dualx/metrics.hpp"
#include "dualx/profiler.hpp"
#include "dualx/run_config.hpp"
#include "dualx/synthetic.hpp"
#include "dualx/tiling.hpp"
#include "dualx/trainer.hpp"

namespace fs = std::filesystem;
using namespace dualx;

namespace {

struct GlobalArgs {
  std::string config_path;
  std::vector<std::string> overrides;
  bool seed_set = false;
  std::uint64_t seed = 0;
};

RunConfig resolve_config(const GlobalArgs& g) {
  RunConfig cfg;
  if (!g.config_path.empty())
    cfg = load_run_config(g.config_path, g.overrides);
  else
    cfg = parse_run_config("{}", g.overrides);
  if (g.seed_set) {
    cfg.seed = g.seed;
    cfg.train.seed = g.seed;
    cfg.degrade.seed = g.seed;
  }
  return cfg;
}

void write_provenance(const std::string& out_dir, const std::string& command,
                      const RunConfig& cfg, int argc, char** argv) {
  fs::create_directories(out_dir);
  std::ofstream f(fs::path(out_dir) / "provenance.txt");
  f << "# dualx provenance v1\n";
  f << "command " << command << "\n";
  f << "config_hash " << config_hash(cfg) << "\n";
  f << "seed " << cfg.seed << "\n";
  f << "args";
  for (int i = 0; i < argc; ++i) f << " " << argv[i];
  f << "\n";
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot open " + path + " for writing");
  f << text;
}

int run(int argc, char** argv) {
  CLI::App app{"dual axial spatiotemporal video super-resolution toolkit"};
  app.require_subcommand(1);
  GlobalArgs g;
  app.add_option("--config", g.config_path, "JSON run configuration");
  app.add_option("--override", g.overrides, "dotted key=value config override (repeatable)");
  auto* seed_opt = app.add_option("--seed", g.seed, "override the config seed");

  std::string in_dir, out_dir, ref_dir, test_dir, ckpt_path, init_ckpt, suite = "attention";
  std::string data_dir, format = "ppm", preset;
  bool with_motion = false, no_tiling = false, dump_plan = false;
  int shape_n = 16, shape_h = 64, shape_w = 64;
  int motion_block = 16, motion_search = 8;

  auto* degrade_cmd = app.add_subcommand("degrade", "synthesize a degraded LQ clip");
  degrade_cmd->add_option("--in", in_dir, "HQ clip directory")->required();
  degrade_cmd->add_option("--out", out_dir, "output directory")->required();
  degrade_cmd->add_option("--format", format, "frame format: ppm|png");

  auto* train_cmd = app.add_subcommand("train", "train one stage");
  train_cmd->add_option("--data", data_dir, "dataset root (clip dir or dir of clip dirs)")
      ->required();
  train_cmd->add_option("--out", out_dir, "run output directory")->required();
  train_cmd->add_option("--init", init_ckpt, "checkpoint to start from");

  auto* infer_cmd = app.add_subcommand("infer", "super-resolve a clip");
  infer_cmd->add_option("--ckpt", ckpt_path, "model checkpoint")->required();
  infer_cmd->add_option("--in", in_dir, "LQ clip directory")->required();
  infer_cmd->add_option("--out", out_dir, "output directory")->required();
  infer_cmd->add_option("--format", format, "frame format: ppm|png");
  infer_cmd->add_flag("--no-tiling", no_tiling, "run one full-frame forward pass");
  infer_cmd->add_flag("--dump-plan", dump_plan, "write the tile plan next to the output");

  auto* eval_cmd = app.add_subcommand("eval", "full-reference metrics");
  eval_cmd->add_option("--ref", ref_dir, "reference clip directory")->required();
  eval_cmd->add_option("--test", test_dir, "clip directory under test")->required();
  eval_cmd->add_flag("--motion", with_motion, "also report motion amplitudes");
  eval_cmd->add_option("--out", out_dir, "also write the report here");

  auto* profile_cmd = app.add_subcommand("profile", "closed-form parameter/MAC counts");
  profile_cmd->add_option("--preset", preset, "model preset override: paper|desk|micro");
  profile_cmd->add_option("--frames", shape_n, "profile input frames");
  profile_cmd->add_option("--height", shape_h, "profile input height");
  profile_cmd->add_option("--width", shape_w, "profile input width");
  profile_cmd->add_option("--out", out_dir, "also write the report here");

  auto* ablate_cmd = app.add_subcommand("ablate", "toy-scale ablation suite");
  ablate_cmd->add_option("--suite", suite,
                         "attention|structure|training (aliases table1|table7|table8)");
  ablate_cmd->add_option("--data", data_dir, "dataset root")->required();
  ablate_cmd->add_option("--out", out_dir, "output directory")->required();

  auto* motion_cmd = app.add_subcommand("motion", "block-matching motion amplitudes");
  motion_cmd->add_option("--in", in_dir, "clip directory")->required();
  motion_cmd->add_option("--block", motion_block, "block size");
  motion_cmd->add_option("--search", motion_search, "search radius");

  // global flags may follow the subcommand
  for (CLI::App* sc : app.get_subcommands([](CLI::App*) { return true; })) sc->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {  // --help
      std::cout << app.help();
      return 0;
    }
    std::cerr << "error: usage: " << e.what() << "\n";
    return 2;
  }
  g.seed_set = seed_opt->count() > 0;
  RunConfig cfg = resolve_config(g);
  std::string hash = config_hash(cfg);

  if (degrade_cmd->parsed()) {
    Tensor hq = read_clip_dir(in_dir);
    auto [lq, draw] = degrade_clip(hq, cfg.degrade);
    clamp01(lq);
    write_clip_dir(out_dir, lq, format);
    write_text((fs::path(out_dir) / "degrade_params.txt").string(),
               draw_record(draw, in_dir, hash));
    write_provenance(out_dir, "degrade", cfg, argc, argv);
    std::cout << "degraded " << in_dir << " -> " << out_dir << " (" << lq.dim(2) << " frames "
              << lq.dim(3) << "x" << lq.dim(4) << ")\n";
    return 0;
  }

  if (train_cmd->parsed()) {
    std::vector<Tensor> clips;
    for (const auto& d : list_clip_dirs(data_dir)) clips.push_back(read_clip_dir(d));
    ModelWeights weights = [&] {
      if (!init_ckpt.empty()) {
        auto loaded = load_checkpoint(init_ckpt);
        return std::move(loaded.weights);
      }
      Rng rng(cfg.seed);
      return ModelWeights::init(cfg.model, rng);
    }();
    fs::create_directories(out_dir);
    std::ofstream trace((fs::path(out_dir) / "train_trace.txt").string());
    trace << "# dualx train-trace v1\nconfig_hash " << hash << "\n";
    trace.setf(std::ios::fmtflags(0), std::ios::floatfield);
    run_stage(
        clips, weights, cfg.train, cfg.train.stage == 2 ? &cfg.degrade : nullptr,
        [&](int iter, double loss) {
          char line[64];
          std::snprintf(line, sizeof line, "iter %d loss %.9g\n", iter, loss);
          trace << line;
        },
        [&](int iter, ModelWeights& w) {
          std::string name = (iter >= cfg.train.iterations)
                                 ? std::string("final.dxckpt")
                                 : "iter" + std::to_string(iter) + ".dxckpt";
          save_checkpoint((fs::path(out_dir) / name).string(), w, hash);
        });
    write_provenance(out_dir, "train", cfg, argc, argv);
    std::cout << "trained stage " << cfg.train.stage << " for " << cfg.train.iterations
              << " iterations -> " << out_dir << "\n";
    return 0;
  }

  if (infer_cmd->parsed()) {
    auto loaded = load_checkpoint(ckpt_path);
    Tensor lq = read_clip_dir(in_dir);
    Tensor sr;
    if (no_tiling) {
      sr = forward(static_cast<Tape*>(nullptr), lq, loaded.weights);
    } else {
      TilePlan plan = plan_tiles(lq.dim(3), lq.dim(4), lq.dim(2), cfg.tiling);
      if (dump_plan) {
        fs::create_directories(out_dir);
        write_text((fs::path(out_dir) / "tile_plan.txt").string(), plan_text(plan));
      }
      sr = tiled_forward(lq, loaded.weights, plan);
    }
    sr.check_finite("inference output");
    clamp01(sr);
    write_clip_dir(out_dir, sr, format);
    write_provenance(out_dir, "infer", cfg, argc, argv);
    std::cout << "super-resolved " << in_dir << " -> " << out_dir << " (" << sr.dim(3) << "x"
              << sr.dim(4) << ")\n";
    return 0;
  }

  if (eval_cmd->parsed()) {
    Tensor ref = read_clip_dir(ref_dir);
    Tensor test = read_clip_dir(test_dir);
    MetricsReport r =
        evaluate_clip(test, ref, fs::path(test_dir).filename().string(), with_motion);
    r.config_hash = hash;
    std::string text = "# dualx metrics v1\n" + r.to_text();
    std::cout << text;
    if (!out_dir.empty()) {
      fs::create_directories(fs::path(out_dir));
      write_text((fs::path(out_dir) / "metrics.txt").string(), text);
      write_provenance(out_dir, "eval", cfg, argc, argv);
    }
    return 0;
  }

  if (profile_cmd->parsed()) {
    ModelConfig mc = cfg.model;
    if (preset == "paper")
      mc = ModelConfig::paper_preset();
    else if (preset == "desk")
      mc = ModelConfig::desk_preset();
    else if (preset == "micro")
      mc = ModelConfig::micro_preset();
    else if (!preset.empty())
      throw ConfigError("unknown preset '" + preset + "'");
    ProfileInput in{1, shape_n, shape_h, shape_w};
    CostReport r = profile_model(mc, in);
    std::string text = cost_report_text(r, in, /*with_reference=*/true, hash);
    std::cout << text;
    if (!out_dir.empty()) {
      fs::create_directories(fs::path(out_dir));
      write_text((fs::path(out_dir) / "cost_report.txt").string(), text);
      write_provenance(out_dir, "profile", cfg, argc, argv);
    }
    return 0;
  }

  if (ablate_cmd->parsed()) {
    std::vector<Tensor> clips;
    for (const auto& d : list_clip_dirs(data_dir)) clips.push_back(read_clip_dir(d));
    AblateResult r = run_ablation(parse_suite(suite), cfg, clips, &std::cout);
    std::cout << r.text;
    fs::create_directories(out_dir);
    write_text((fs::path(out_dir) / "ablation.txt").string(),
               "config_hash " + hash + "\n" + r.text);
    write_provenance(out_dir, "ablate", cfg, argc, argv);
    return 0;
  }

  if (motion_cmd->parsed()) {
    Tensor clip = read_clip_dir(in_dir);
    auto [u, v] = motion_amplitude(clip, motion_block, motion_search);
    std::printf("# dualx motion v1\nclip %s\nmean_abs_u %.4f\nmean_abs_v %.4f\n",
                in_dir.c_str(), u, v);
    return 0;
  }

  std::cerr << "error: usage: no subcommand\n";
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << e.what() << "\n";
    return 1;
  }
}
