// Copyright Contributors to the sctn-flow project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "sctn/random.hpp"
#include "sctn/tensor.hpp"

namespace sctn {

// Named parameters in insertion order. Binding to a tape yields a copy whose
// tensors are tape variables, so one forward pass can be differentiated
// without touching the stored values.
class ParamSet {
 public:
  void add(std::string name, Tensor value);
  bool contains(std::string_view name) const noexcept;
  const Tensor& get(std::string_view name) const;
  void set(std::string_view name, Tensor value);

  std::size_t size() const noexcept { return names_.size(); }
  const std::vector<std::string>& names() const noexcept { return names_; }
  const std::vector<Tensor>& values() const noexcept { return values_; }
  std::size_t numel() const noexcept;

  ParamSet bind(Tape& tape) const;
  ParamSet detached() const;

 private:
  std::size_t index(std::string_view name) const;
  std::vector<std::string> names_;
  std::vector<Tensor> values_;
};

// Seeded uniform in [-bound, bound].
Tensor uniform_tensor(Shape shape, double bound, Rng& rng);

}  // namespace sctn
