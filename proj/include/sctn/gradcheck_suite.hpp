// Copyright Contributors to the sctn-flow project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace sctn {

struct GradCheckResult {
  std::string name;
  double error = 0.0;      // max relative error over probed coordinates
  double tolerance = 0.0;
  double seconds = 0.0;
  bool pass() const noexcept { return error < tolerance; }
};

// Central-difference checks of every differentiable stage on instances of at
// most 16 points: devoxelize, sparse U-Net, attention and aggregation,
// correlation, unrolled Sinkhorn with flow extraction, refinement, E^s, E^c
// and the whole model.
std::vector<GradCheckResult> run_gradcheck_suite(std::uint64_t seed, double tolerance = 1e-4);

}  // namespace sctn
