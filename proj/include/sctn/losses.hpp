// Copyright Contributors to the sctn-flow project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "sctn/tensor.hpp"

namespace sctn {

struct FscConfig {
  double tau = 0.39;
  double epsilon_g = 19.0;
  std::size_t k_neighbors = 8;
  double lambda = 0.35;
};

void validate(const FscConfig& cfg);

// E^s = sum_i m_i |u_i - u*_i|_1
Tensor supervised_loss(const Tensor& u, const Tensor& u_star, std::span<const std::uint8_t> mask);

// s = 1 - exp(-Fi.Fj / tau)
double fsc_similarity(std::span<const double> Fi, std::span<const double> Fj, double tau);

// Gamma = eps / (|u*|_1 + eps)
double gamma_factor(std::span<const double> u_star_i, double epsilon_g);

// E^c = sum_i sum_{j in N(i)} max(s_ij, 0) |u_i - u_j|_1 Gamma_i, N(i) the k
// nearest rows of P without i. With stop_similarity the similarity is a
// constant; without it gradients also reach F (used for the ablation).
Tensor fsc_loss(const Tensor& u, const Tensor& u_star, const Tensor& F, const Tensor& P, const FscConfig& cfg,
                bool stop_similarity = true);

// Mean of max(s_ij, 0) over the same neighbour pairs, no tape.
double mean_neighbor_similarity(const Tensor& F, const Tensor& P, const FscConfig& cfg);

// Number of fsc_loss calls in this process.
std::uint64_t fsc_evaluations() noexcept;

// E^s + lambda E^c
Tensor total_loss(const Tensor& Es, const Tensor& Ec, double lambda);

struct MetricsRecord {
  double epe3d = 0.0;
  double acc3ds = 0.0;
  double acc3dr = 0.0;
  double outliers = 0.0;
};

MetricsRecord metrics(const Tensor& u, const Tensor& u_star);

// Field-wise mean, in order.
MetricsRecord mean_metrics(std::span<const MetricsRecord> per_scene);

struct SceneMetrics {
  std::string scene_id;
  MetricsRecord record;
};

// scene_id,epe3d,acc3ds,acc3dr,outliers with %.9g values.
void write_metrics_csv(std::span<const SceneMetrics> rows, const std::filesystem::path& path);

}  // namespace sctn
