// Copyright Contributors to the sctn-flow project
// SPDX-License-Identifier: Apache-2.0

#include "sctn/params.hpp"

#include <algorithm>

namespace sctn {

void ParamSet::add(std::string name, Tensor value) {
  if (contains(name)) throw InvariantError("parameter " + name + " registered twice");
  names_.push_back(std::move(name));
  values_.push_back(std::move(value));
}

bool ParamSet::contains(std::string_view name) const noexcept {
  return std::find(names_.begin(), names_.end(), name) != names_.end();
}

std::size_t ParamSet::index(std::string_view name) const {
  const auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) throw InvariantError("unknown parameter " + std::string(name));
  return static_cast<std::size_t>(it - names_.begin());
}

const Tensor& ParamSet::get(std::string_view name) const { return values_[index(name)]; }

void ParamSet::set(std::string_view name, Tensor value) {
  const std::size_t i = index(name);
  if (value.shape() != values_[i].shape()) {
    throw ShapeError("param_set", {values_[i].shape(), value.shape()}, "shape conflict for " + std::string(name));
  }
  values_[i] = std::move(value);
}

std::size_t ParamSet::numel() const noexcept {
  std::size_t n = 0;
  for (const auto& v : values_) n += v.numel();
  return n;
}

ParamSet ParamSet::bind(Tape& tape) const {
  ParamSet out;
  out.names_ = names_;
  out.values_.reserve(values_.size());
  for (const auto& v : values_) out.values_.push_back(tape.variable(v));
  return out;
}

ParamSet ParamSet::detached() const {
  ParamSet out;
  out.names_ = names_;
  for (const auto& v : values_) out.values_.push_back(v.detached());
  return out;
}

Tensor uniform_tensor(Shape shape, double bound, Rng& rng) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  std::vector<double> v(n);
  for (auto& x : v) x = uniform(rng, -bound, bound);
  return Tensor(std::move(shape), std::move(v));
}

}  // namespace sctn
