// Copyright Contributors to the sctn-flow project
// SPDX-License-Identifier: Apache-2.0

#include "sctn/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace sctn {
namespace {

double evaluate(const ScalarFn& f, std::span<const Tensor> inputs) {
  const Tensor out = f(inputs);
  if (out.numel() != 1) throw ShapeError("grad_check", {out.shape()}, "function must return a scalar");
  const double v = out.item();
  if (!std::isfinite(v)) throw NonFiniteError("grad_check: f(x) is not finite");
  return v;
}

std::vector<std::size_t> probe_coords(std::size_t numel, const GradCheckOptions& opts, std::size_t which) {
  std::vector<std::size_t> coords(numel);
  std::iota(coords.begin(), coords.end(), std::size_t{0});
  if (opts.max_coords == 0 || numel <= opts.max_coords) return coords;
  std::mt19937_64 rng(opts.seed + 0x9e3779b97f4a7c15ULL * (which + 1));
  std::shuffle(coords.begin(), coords.end(), rng);
  coords.resize(opts.max_coords);
  std::sort(coords.begin(), coords.end());
  return coords;
}

}  // namespace

double grad_check(const ScalarFn& f, std::span<const Tensor> inputs, const GradCheckOptions& opts) {
  Tape tape;
  std::vector<Tensor> leaves;
  leaves.reserve(inputs.size());
  for (const Tensor& x : inputs) leaves.push_back(tape.variable(x));
  const Tensor loss = f(leaves);
  if (!std::isfinite(loss.item())) throw NonFiniteError("grad_check: f(x) is not finite");
  const Gradients grads = tape.backward(loss);

  std::vector<Tensor> probe(inputs.begin(), inputs.end());
  double worst = 0.0;
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    const Tensor analytic = grads.wrt(leaves[t]);
    const std::vector<double> base = inputs[t].to_vector();
    for (const std::size_t c : probe_coords(base.size(), opts, t)) {
      std::vector<double> shifted = base;
      shifted[c] = base[c] + opts.step;
      probe[t] = Tensor(inputs[t].shape(), shifted);
      const double plus = evaluate(f, probe);
      shifted[c] = base[c] - opts.step;
      probe[t] = Tensor(inputs[t].shape(), shifted);
      const double minus = evaluate(f, probe);
      probe[t] = inputs[t];
      const double numeric = (plus - minus) / (2.0 * opts.step);
      const double a = analytic[c];
      const double denom = std::max({1.0, std::abs(a), std::abs(numeric)});
      worst = std::max(worst, std::abs(a - numeric) / denom);
    }
  }
  return worst;
}

double grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, double step) {
  const Tensor inputs[] = {x};
  GradCheckOptions opts;
  opts.step = step;
  return grad_check([&f](std::span<const Tensor> xs) { return f(xs[0]); }, inputs, opts);
}

}  // namespace sctn
