// Copyright Contributors to the sctn-flow project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "sctn/params.hpp"

namespace sctn {

struct OtConfig {
  double epsilon = 0.03;
  std::size_t iters = 50;
};

void validate(const OtConfig& cfg);

constexpr double kNormGuard = 1e-12;

// C_ij = 1 - cos(FP_i, FQ_j), norms guarded by +1e-12.
Tensor correlation_matrix(const Tensor& FP, const Tensor& FQ);

// Entropic OT plan with uniform marginals, log-domain, `iters` unrolled
// row/column updates starting from g = 0. Differentiable w.r.t. C.
Tensor sinkhorn(const Tensor& C, double epsilon, std::size_t iters);

// <T, C>
double transport_cost(const Tensor& T, const Tensor& C);

// u_i = (sum_j T_ij q_j) / (sum_j T_ij) - p_i. Throws InvariantError listing
// rows whose mass is below 1e-12.
Tensor extract_flow(const Tensor& T, const Tensor& P, const Tensor& Q);

struct RefineConfig {
  std::size_t hidden = 64;
  std::size_t k_neighbors = 8;
};

void validate(const RefineConfig& cfg);

// Registers "refine.*": (2 (3 + C)) -> hidden -> hidden -> 3, last layer zero.
void init_refine(const RefineConfig& cfg, std::size_t channels, ParamSet& params, Rng& rng);

// k nearest neighbours (self excluded) used by refinement, n x k' with
// k' = min(k, n - 1).
struct NeighborTable {
  std::size_t k = 0;
  std::vector<std::uint32_t> index;
};
NeighborTable refine_neighbors(const Tensor& P, std::size_t k);

// u + MLP([u, F, mean over neighbours of [u, F]])
Tensor refine_flow(const ParamSet& params, const NeighborTable& nbrs, const Tensor& u, const Tensor& F);
Tensor refine_flow(const ParamSet& params, const RefineConfig& cfg, const Tensor& u, const Tensor& F, const Tensor& P);

}  // namespace sctn
