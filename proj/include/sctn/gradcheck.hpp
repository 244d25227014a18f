// Copyright Contributors to the sctn-flow project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "sctn/tensor.hpp"

namespace sctn {

using ScalarFn = std::function<Tensor(std::span<const Tensor>)>;

struct GradCheckOptions {
  double step = 1e-5;
  // Coordinates probed per input; 0 probes all of them. Probed coordinates are
  // drawn with the seed below when a tensor is larger than the limit.
  std::size_t max_coords = 0;
  std::uint64_t seed = 0;
};

// Compares reverse-mode gradients of a scalar function against central
// differences. Returns max over probed coordinates of
//   |analytic - numeric| / max(1, |analytic|, |numeric|).
// Throws NonFiniteError when f(x) is not finite.
double grad_check(const ScalarFn& f, std::span<const Tensor> inputs, const GradCheckOptions& opts = {});

double grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, double step = 1e-5);

}  // namespace sctn
