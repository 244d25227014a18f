// Copyright Contributors to the sctn-flow project
// SPDX-License-Identifier: Apache-2.0

// Scalar reference kernels. Reductions run strictly left to right.

#include <cmath>
#include <limits>

#include "sctn/kernels.hpp"

namespace sctn::kernels {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) noexcept {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void axpy_scalar(double* y, double alpha, const double* x, std::size_t n) noexcept {
  for (std::size_t i = 0; i < n; ++i) y[i] = y[i] + alpha * x[i];
}

void scale_add_scalar(double* y, const double* x, double shift, double alpha,
                      std::size_t n) noexcept {
  for (std::size_t i = 0; i < n; ++i) y[i] = alpha * (x[i] + shift);
}

void scaled_diff_scalar(double* y, const double* a, const double* b, double alpha,
                        std::size_t n) noexcept {
  for (std::size_t i = 0; i < n; ++i) y[i] = alpha * (a[i] - b[i]);
}

void exp_scalar(double* x, std::size_t n) noexcept {
  for (std::size_t i = 0; i < n; ++i) x[i] = std::exp(x[i]);
}

double sum_scalar(const double* x, std::size_t n) noexcept {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i];
  return acc;
}

double max_scalar(const double* x, std::size_t n) noexcept {
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) m = x[i] > m ? x[i] : m;
  return m;
}

constexpr KernelTable kScalarTable{
    Backend::kScalar, "scalar",     dot_scalar, axpy_scalar, scale_add_scalar,
    scaled_diff_scalar, exp_scalar, sum_scalar, max_scalar,
};

}  // namespace

const KernelTable& scalar_table() noexcept { return kScalarTable; }

}  // namespace sctn::kernels
