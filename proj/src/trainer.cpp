// Copyright Contributors to the sctn-flow project
// SPDX-License-Identifier: Apache-2.0

#include "sctn/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <ostream>

#include "sctn/checkpoint.hpp"
#include "sctn/kernels.hpp"
#include "sctn/synthetic.hpp"

namespace sctn {

void validate(const TrainConfig& cfg) {
  if (!(cfg.lr_initial > 0.0) || !(cfg.lr_drop_to > 0.0)) throw ConfigError("train: learning rates must be positive");
  if (!(cfg.drop_at_fraction >= 0.0 && cfg.drop_at_fraction <= 1.0)) {
    throw ConfigError("train: drop_at_fraction must be in [0, 1]");
  }
  if (cfg.batch == 0) throw ConfigError("train: batch must be at least 1");
  if (!(cfg.beta1 >= 0.0 && cfg.beta1 < 1.0 && cfg.beta2 >= 0.0 && cfg.beta2 < 1.0)) {
    throw ConfigError("train: adam betas must be in [0, 1)");
  }
  if (!(cfg.adam_eps > 0.0)) throw ConfigError("train: adam_eps must be positive");
  if (!(cfg.clip_norm >= 0.0)) throw ConfigError("train: clip_norm must be non-negative");
  if (!(cfg.augment_yaw >= 0.0) || !(cfg.augment_shift >= 0.0)) {
    throw ConfigError("train: augment_yaw and augment_shift must be non-negative");
  }
}

ScenePair augment_scene(const ScenePair& scene, double max_yaw, double max_shift, Rng& rng) {
  const double yaw = uniform(rng, -max_yaw, max_yaw);
  const Point3 shift = {uniform(rng, -max_shift, max_shift), uniform(rng, -max_shift, max_shift),
                        uniform(rng, -max_shift, max_shift)};
  const Rotation R = axis_angle({0.0, 1.0, 0.0}, yaw);
  Point3 c = {0.0, 0.0, 0.0};
  for (const auto& p : scene.P.points)
    for (int k = 0; k < 3; ++k) c[k] += p[k];
  const double inv = scene.P.points.empty() ? 0.0 : 1.0 / static_cast<double>(scene.P.points.size());
  for (int k = 0; k < 3; ++k) c[k] *= inv;
  auto rot = [&](const Point3& v) {
    return Point3{R[0] * v[0] + R[1] * v[1] + R[2] * v[2], R[3] * v[0] + R[4] * v[1] + R[5] * v[2],
                  R[6] * v[0] + R[7] * v[1] + R[8] * v[2]};
  };
  auto move = [&](const Point3& p) {
    const Point3 r = rot({p[0] - c[0], p[1] - c[1], p[2] - c[2]});
    return Point3{r[0] + c[0] + shift[0], r[1] + c[1] + shift[1], r[2] + c[2] + shift[2]};
  };
  ScenePair out = scene;
  for (auto& p : out.P.points) p = move(p);
  for (auto& q : out.Q.points) q = move(q);
  for (auto& f : out.gt_flow) f = rot(f);
  return out;
}

void adam_step(ParamSet& params, const std::vector<Tensor>& grads, AdamState& state, double lr,
               const AdamHyper& hyper) {
  const std::size_t n = params.size();
  if (grads.size() != n) {
    throw ShapeError("adam_step", {{n}, {grads.size()}}, "one gradient per parameter expected");
  }
  if (state.m.empty()) {
    for (const auto& p : params.values()) {
      state.m.push_back(Tensor::zeros(p.shape()));
      state.v.push_back(Tensor::zeros(p.shape()));
    }
  }
  if (state.m.size() != n) throw ShapeError("adam_step", {{n}, {state.m.size()}}, "state does not match parameters");
  state.t += 1;
  const double t = static_cast<double>(state.t);
  const double c1 = 1.0 - std::pow(hyper.beta1, t);
  const double c2 = 1.0 - std::pow(hyper.beta2, t);
  for (std::size_t k = 0; k < n; ++k) {
    const Tensor& p = params.values()[k];
    const Tensor& g = grads[k];
    if (g.shape() != p.shape() || state.m[k].shape() != p.shape()) {
      throw ShapeError("adam_step", {p.shape(), g.shape()}, params.names()[k]);
    }
    auto m = state.m[k].to_vector();
    auto v = state.v[k].to_vector();
    auto w = p.to_vector();
    const auto gd = g.data();
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = hyper.beta1 * m[i] + (1.0 - hyper.beta1) * gd[i];
      v[i] = hyper.beta2 * v[i] + (1.0 - hyper.beta2) * gd[i] * gd[i];
      const double mh = m[i] / c1;
      const double vh = v[i] / c2;
      w[i] -= lr * mh / (std::sqrt(vh) + hyper.eps);
    }
    state.m[k] = Tensor(p.shape(), std::move(m));
    state.v[k] = Tensor(p.shape(), std::move(v));
    params.set(params.names()[k], Tensor(p.shape(), std::move(w)));
  }
}

double clip_global_norm(std::vector<Tensor>& grads, double max_norm) {
  double sq = 0.0;
  for (const auto& g : grads) {
    const auto d = g.data();
    sq += kernels::active().dot(d.data(), d.data(), d.size());
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double s = max_norm / norm;
    for (auto& g : grads) g = ops::scale(g, s);
  }
  return norm;
}

double learning_rate(const TrainConfig& cfg, std::size_t epoch) {
  const double total = static_cast<double>(cfg.epochs_stage1 + cfg.epochs_stage2);
  const auto drop = static_cast<std::size_t>(std::llround(cfg.drop_at_fraction * total));
  return epoch >= drop ? cfg.lr_drop_to : cfg.lr_initial;
}

std::string format_log_line(const EpochLog& e) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%zu\t%d\t%.9g\t%.9g\t%.9g\t%.9g", e.epoch, e.stage, e.Es, e.Ec, e.lr, e.epe3d);
  return buf;
}

Dataset load_dataset(const std::filesystem::path& manifest) {
  Dataset d;
  for (const auto& path : read_manifest(manifest)) {
    d.ids.push_back(path.stem().string());
    d.scenes.push_back(load_scene(path));
  }
  if (d.scenes.empty()) throw InvariantError("dataset: manifest " + manifest.string() + " lists no scenes");
  return d;
}

Trainer::Trainer(ModelConfig model, FscConfig fsc, TrainConfig train, Dataset data)
    : model_(std::move(model)), fsc_(fsc), train_(train), data_(std::move(data)) {
  validate(model_);
  validate(fsc_);
  validate(train_);
  if (data_.scenes.empty()) throw InvariantError("train: empty dataset");
  params_ = init_model(model_, train_.seed);
}

EpochLog Trainer::run_epoch() {
  const std::size_t e = epoch_;
  EpochLog log;
  log.epoch = e + 1;
  log.stage = e < train_.epochs_stage1 ? 1 : 2;
  log.lr = learning_rate(train_, e);
  const bool with_fsc = log.stage == 2;

  // Per-epoch order depends only on (seed, epoch).
  std::vector<std::size_t> order(data_.scenes.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(train_.seed * 0x9E3779B97F4A7C15ull + e + 1);
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);

  std::vector<Tensor> acc;
  std::size_t in_batch = 0;
  auto flush = [&] {
    if (in_batch == 0) return;
    if (in_batch > 1) {
      for (auto& g : acc) g = ops::scale(g, 1.0 / static_cast<double>(in_batch));
    }
    clip_global_norm(acc, train_.clip_norm);
    adam_step(params_, acc, adam_, log.lr, AdamHyper{train_.beta1, train_.beta2, train_.adam_eps});
    acc.clear();
    in_batch = 0;
  };

  Rng aug_rng(train_.seed * 0xD1B54A32D192ED03ull + e + 1);
  ScenePair jittered;
  for (std::size_t idx : order) {
    const ScenePair* src = &data_.scenes[idx];
    if (train_.augment) {
      jittered = augment_scene(*src, train_.augment_yaw, train_.augment_shift, aug_rng);
      src = &jittered;
    }
    const ScenePair& s = *src;
    const std::string& id = data_.ids[idx];
    try {
      Tape tape;
      const ParamSet bound = params_.bind(tape);
      const ModelOutput out = forward(model_, bound, s.P, s.Q);
      const Tensor gt = FlowField{s.gt_flow}.to_tensor();
      const Tensor Es = supervised_loss(out.flow, gt, s.mask);
      Tensor loss = Es;
      if (with_fsc) {
        const Tensor Ec = fsc_loss(out.flow, gt, out.FP, s.P.to_tensor(), fsc_, train_.stop_similarity);
        loss = total_loss(Es, Ec, fsc_.lambda);
        log.Ec += Ec.item();
      }
      if (!std::isfinite(loss.item())) throw NonFiniteError("loss is " + std::to_string(loss.item()));
      log.Es += Es.item();
      log.epe3d += metrics(out.flow.detached(), gt).epe3d;
      log.mean_similarity += mean_neighbor_similarity(out.FP, s.P.to_tensor(), fsc_);
      const Gradients g = tape.backward(loss);
      if (acc.empty()) {
        for (const auto& p : bound.values()) acc.push_back(g.wrt(p));
      } else {
        for (std::size_t k = 0; k < acc.size(); ++k) acc[k] = ops::add(acc[k], g.wrt(bound.values()[k]));
      }
    } catch (const NonFiniteError& err) {
      throw NonFiniteError("train: epoch " + std::to_string(e + 1) + ", scene " + id + ": " + err.what());
    }
    if (++in_batch == train_.batch) flush();
  }
  flush();

  const double inv = 1.0 / static_cast<double>(data_.scenes.size());
  log.Es *= inv;
  log.Ec *= inv;
  log.epe3d *= inv;
  log.mean_similarity *= inv;
  ++epoch_;
  return log;
}

TrainResult train(const ModelConfig& model, const FscConfig& fsc, const TrainConfig& cfg, const Dataset& data,
                  const std::filesystem::path& out_dir, std::ostream* echo) {
  Trainer trainer(model, fsc, cfg, data);
  std::filesystem::create_directories(out_dir);
  std::ofstream log_file(out_dir / "train.log", std::ios::binary | std::ios::trunc);
  if (!log_file) throw IoError("cannot write " + (out_dir / "train.log").string());
  log_file << "epoch\tstage\tEs\tEc\tlr\tepe3d\n";
  TrainResult result;
  double best = INFINITY;
  while (trainer.next_epoch() < trainer.total_epochs()) {
    const EpochLog e = trainer.run_epoch();
    const std::string line = format_log_line(e);
    log_file << line << '\n' << std::flush;
    if (echo) *echo << line << '\n' << std::flush;
    result.log.push_back(e);
    if (e.epe3d < best) {
      best = e.epe3d;
      result.best_epoch = e.epoch;
      save_checkpoint(trainer.params(), out_dir / "best.sctnw");
    }
  }
  save_checkpoint(trainer.params(), out_dir / "final.sctnw");
  return result;
}

Evaluation evaluate(const ModelConfig& model, const ParamSet& params, const Dataset& data) {
  if (data.scenes.empty()) throw InvariantError("evaluate: empty dataset");
  Evaluation ev;
  std::vector<MetricsRecord> records;
  for (std::size_t i = 0; i < data.scenes.size(); ++i) {
    const ScenePair& s = data.scenes[i];
    const MetricsRecord r = metrics(forward(model, params, s.P, s.Q).flow, FlowField{s.gt_flow}.to_tensor());
    ev.scenes.push_back({data.ids[i], r});
    records.push_back(r);
  }
  ev.mean = mean_metrics(records);
  return ev;
}

}  // namespace sctn
