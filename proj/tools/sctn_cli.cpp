// Copyright Contributors to the sctn-flow project
// SPDX-License-Identifier: Apache-2.0

// sctn: dataset generation, training, evaluation, inference, gradient checks
// and PLY export. Exit codes: 0 ok, 2 usage/config, 3 data, 4 check failed.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "sctn/checkpoint.hpp"
#include "sctn/config.hpp"
#include "sctn/gradcheck_suite.hpp"
#include "sctn/trainer.hpp"

namespace fs = std::filesystem;
using namespace sctn;

namespace {

constexpr int kUsage = 2;
constexpr int kData = 3;
constexpr int kCheck = 4;

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out, data, checkpoint, flow;
  std::vector<std::string> sets;
};

void add_common(CLI::App* cmd, Common& c, bool data, bool checkpoint) {
  cmd->add_option("--config", c.config, "JSON run config");
  cmd->add_option("--seed", c.seed, "seed override");
  cmd->add_option("--out", c.out, "output path");
  cmd->add_option("--set", c.sets, "dotted override, e.g. ot.epsilon=0.01")->take_all();
  if (data) cmd->add_option("--data", c.data, "dataset directory, manifest, or .sfs scene");
  if (checkpoint) cmd->add_option("--checkpoint", c.checkpoint, "SCTNW1 weights");
}

RunConfig effective(const Common& c, bool seed_scene, bool seed_train) {
  RunConfig cfg = load_run_config(c.config, c.sets);
  if (c.seed) {
    if (seed_scene) cfg.scene.seed = *c.seed;
    if (seed_train) cfg.train.seed = *c.seed;
  }
  validate(cfg);
  std::cout << to_json(cfg) << std::flush;
  return cfg;
}

fs::path manifest_of(const std::string& data) {
  if (data.empty()) throw ConfigError("--data is required");
  const fs::path p(data);
  return fs::is_directory(p) ? p / "manifest.txt" : p;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
}

ParamSet load_weights(const RunConfig& cfg, const std::string& path) {
  ParamSet p = init_model(cfg.model, 0);
  load_checkpoint(path, p);
  return p;
}

int cmd_gen(const Common& c) {
  const RunConfig cfg = effective(c, true, false);
  if (c.out.empty()) throw ConfigError("--out is required");
  const fs::path m = generate_dataset(cfg.scene, cfg.dataset_count, c.out);
  write_text(fs::path(c.out) / "config.json", to_json(cfg));
  std::cerr << "wrote " << cfg.dataset_count << " scenes, manifest " << m.string() << "\n";
  return 0;
}

int cmd_train(const Common& c) {
  const RunConfig cfg = effective(c, false, true);
  if (c.out.empty()) throw ConfigError("--out is required");
  const Dataset data = load_dataset(manifest_of(c.data));
  fs::create_directories(c.out);
  write_text(fs::path(c.out) / "config.json", to_json(cfg));
  const TrainResult r = train(cfg.model, cfg.fsc, cfg.train, data, c.out, &std::cerr);
  std::cerr << "best epoch " << r.best_epoch << ", checkpoints in " << c.out << "\n";
  return 0;
}

int cmd_eval(const Common& c) {
  const RunConfig cfg = effective(c, false, false);
  const ParamSet params = load_weights(cfg, c.checkpoint);
  const Dataset data = load_dataset(manifest_of(c.data));
  const Evaluation ev = evaluate(cfg.model, params, data);
  const fs::path csv = c.out.empty() ? fs::path("metrics.csv") : fs::path(c.out);
  write_metrics_csv(ev.scenes, csv);
  std::printf("scenes %zu epe3d %.6f acc3ds %.6f acc3dr %.6f outliers %.6f\n", ev.scenes.size(), ev.mean.epe3d,
              ev.mean.acc3ds, ev.mean.acc3dr, ev.mean.outliers);
  return 0;
}

int cmd_infer(const Common& c) {
  const RunConfig cfg = effective(c, false, false);
  const ParamSet params = load_weights(cfg, c.checkpoint);
  if (c.data.empty()) throw ConfigError("--data must name a .sfs scene");
  const ScenePair s = load_scene(c.data);
  const FlowField flow = FlowField::from_tensor(forward(cfg.model, params, s.P, s.Q).flow);
  const fs::path out = c.out.empty() ? fs::path(c.data).replace_extension(".sff") : fs::path(c.out);
  save_flow(flow, out);
  std::cerr << "wrote " << out.string() << "\n";
  return 0;
}

int cmd_gradcheck(const Common& c) {
  const RunConfig cfg = effective(c, false, true);
  bool ok = true;
  for (const auto& r : run_gradcheck_suite(cfg.train.seed)) {
    std::printf("%-22s max_rel_err %.3e  %s  (%.2fs)\n", r.name.c_str(), r.error, r.pass() ? "ok" : "FAIL", r.seconds);
    ok = ok && r.pass();
  }
  return ok ? 0 : kCheck;
}

int cmd_export_ply(const Common& c) {
  const RunConfig cfg = effective(c, false, false);
  if (c.data.empty()) throw ConfigError("--data must name a .sfs scene");
  if (c.out.empty()) throw ConfigError("--out is required");
  const ScenePair s = load_scene(c.data);
  FlowField pred;
  if (!c.flow.empty()) {
    pred = load_flow(c.flow);
  } else if (!c.checkpoint.empty()) {
    pred = FlowField::from_tensor(forward(cfg.model, load_weights(cfg, c.checkpoint), s.P, s.Q).flow);
  } else {
    throw ConfigError("export-ply needs --checkpoint or --flow");
  }
  export_error_ply(s, pred, c.out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sctn scene flow toolkit"};
  app.require_subcommand(1);
  Common c;
  auto* gen = app.add_subcommand("gen", "generate a synthetic dataset");
  add_common(gen, c, false, false);
  auto* tr = app.add_subcommand("train", "train on a dataset");
  add_common(tr, c, true, false);
  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint, write per-scene CSV");
  add_common(ev, c, true, true);
  ev->get_option("--checkpoint")->required();
  auto* inf = app.add_subcommand("infer", "predict flow for one scene (SFF1)");
  add_common(inf, c, true, true);
  inf->get_option("--checkpoint")->required();
  auto* gc = app.add_subcommand("gradcheck", "finite-difference checks of every stage");
  add_common(gc, c, false, false);
  auto* ply = app.add_subcommand("export-ply", "error-coloured PLY of a scene");
  add_common(ply, c, true, true);
  ply->add_option("--flow", c.flow, "SFF1 prediction instead of running the model");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    const CLI::App* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
    std::cerr << sub->help();
    return kUsage;
  }

  try {
    if (gen->parsed()) return cmd_gen(c);
    if (tr->parsed()) return cmd_train(c);
    if (ev->parsed()) return cmd_eval(c);
    if (inf->parsed()) return cmd_infer(c);
    if (gc->parsed()) return cmd_gradcheck(c);
    if (ply->parsed()) return cmd_export_ply(c);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kUsage;
  } catch (const Error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kData;
  }
  return kUsage;
}
