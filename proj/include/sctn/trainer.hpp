// Copyright Contributors to the sctn-flow project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "sctn/losses.hpp"
#include "sctn/model.hpp"

namespace sctn {

struct TrainConfig {
  double lr_initial = 1e-3;
  double lr_drop_to = 1e-4;
  double drop_at_fraction = 50.0 / 60.0;
  std::size_t epochs_stage1 = 40;
  std::size_t epochs_stage2 = 20;
  std::size_t batch = 1;
  std::uint64_t seed = 42;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double clip_norm = 10.0;  // global L2 norm; 0 disables
  bool stop_similarity = true;
  // Seeded per-(epoch, scene) global pose jitter: yaw about the vertical axis
  // through the P centroid, then a uniform shift. Off unless enabled.
  bool augment = false;
  double augment_yaw = 0.0;    // max |angle|, radians
  double augment_shift = 0.0;  // max |offset| per axis, meters
};

void validate(const TrainConfig& cfg);

// Applies one random rigid pose to P, Q and the ground-truth flow.
ScenePair augment_scene(const ScenePair& scene, double max_yaw, double max_shift, Rng& rng);

struct AdamState {
  std::vector<Tensor> m, v;
  std::uint64_t t = 0;
};

struct AdamHyper {
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
};

// One bias-corrected Adam update. grads align with params.values().
void adam_step(ParamSet& params, const std::vector<Tensor>& grads, AdamState& state, double lr,
               const AdamHyper& hyper = {});

// Scales grads in place so their global L2 norm is at most max_norm. Returns
// the norm before scaling.
double clip_global_norm(std::vector<Tensor>& grads, double max_norm);

// Learning rate for 0-based epoch e.
double learning_rate(const TrainConfig& cfg, std::size_t epoch);

struct EpochLog {
  std::size_t epoch = 0;  // 1-based
  int stage = 1;
  double Es = 0.0;        // mean over scenes
  double Ec = 0.0;
  double lr = 0.0;
  double epe3d = 0.0;     // mean training EPE of the refined flow
  double mean_similarity = 0.0;  // mean max(s, 0) over FSC neighbour pairs
};

// epoch \t stage \t Es \t Ec \t lr \t epe3d
std::string format_log_line(const EpochLog& e);

struct Dataset {
  std::vector<std::string> ids;
  std::vector<ScenePair> scenes;
};

// Loads every scene named by a manifest. Throws on an empty manifest.
Dataset load_dataset(const std::filesystem::path& manifest);

class Trainer {
 public:
  Trainer(ModelConfig model, FscConfig fsc, TrainConfig train, Dataset data);

  std::size_t total_epochs() const noexcept { return train_.epochs_stage1 + train_.epochs_stage2; }
  std::size_t next_epoch() const noexcept { return epoch_; }

  // Runs the next epoch. Stage 2 (with E^c) starts after epochs_stage1.
  EpochLog run_epoch();

  const ParamSet& params() const noexcept { return params_; }
  ParamSet& params() noexcept { return params_; }
  TrainConfig& config() noexcept { return train_; }

 private:
  ModelConfig model_;
  FscConfig fsc_;
  TrainConfig train_;
  Dataset data_;
  ParamSet params_;
  AdamState adam_;
  std::size_t epoch_ = 0;
};

struct TrainResult {
  std::vector<EpochLog> log;
  std::size_t best_epoch = 0;
};

// Full schedule. Writes <out_dir>/final.sctnw, <out_dir>/best.sctnw (lowest
// training EPE) and <out_dir>/train.log; log lines are also sent to `echo`.
TrainResult train(const ModelConfig& model, const FscConfig& fsc, const TrainConfig& cfg, const Dataset& data,
                  const std::filesystem::path& out_dir, std::ostream* echo = nullptr);

struct Evaluation {
  std::vector<SceneMetrics> scenes;
  MetricsRecord mean;
};

Evaluation evaluate(const ModelConfig& model, const ParamSet& params, const Dataset& data);

}  // namespace sctn
