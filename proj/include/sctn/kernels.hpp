// Copyright Contributors to the sctn-flow project
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Inner-loop kernels used by the tensor engine and the fused operators.
//
// Every kernel has a scalar reference implementation. Vector variants
// (currently AVX2) are compiled in separate translation units and picked at
// runtime from CPU feature detection. The SCTN_KERNELS environment variable
// ("scalar" or "avx2") overrides the choice.
//
// Equivalence contract between variants:
//   axpy, scale_add,
//   scaled_diff, max      - bit-identical (no FMA contraction, lane-local order)
//   dot, sum              - lane-split reduction order, equal within rounding
//   exp_inplace           - polynomial exp, within a few ulp of std::exp

#include <cstddef>
#include <span>
#include <string_view>

namespace sctn::kernels {

enum class Backend { kScalar, kAvx2 };

struct KernelTable {
  Backend backend;
  const char* name;
  double (*dot)(const double* a, const double* b, std::size_t n) noexcept;
  // y += alpha * x
  void (*axpy)(double* y, double alpha, const double* x, std::size_t n) noexcept;
  // y = alpha * (x + shift)  with x, y possibly aliased
  void (*scale_add)(double* y, const double* x, double shift, double alpha,
                    std::size_t n) noexcept;
  // y = alpha * (a - b)
  void (*scaled_diff)(double* y, const double* a, const double* b, double alpha,
                      std::size_t n) noexcept;
  void (*exp_inplace)(double* x, std::size_t n) noexcept;
  double (*sum)(const double* x, std::size_t n) noexcept;
  double (*max)(const double* x, std::size_t n) noexcept;
};

const KernelTable& scalar_table() noexcept;

// nullptr when the variant was not compiled in.
const KernelTable* avx2_table() noexcept;

bool cpu_supports_avx2() noexcept;

// The table currently used by the library.
const KernelTable& active() noexcept;

// Throws std::invalid_argument if the backend is unavailable on this build/CPU.
void select(Backend backend);

Backend best_available() noexcept;

std::string_view backend_name(Backend backend) noexcept;

// RAII override, used by the equivalence tests.
class ScopedBackend {
 public:
  explicit ScopedBackend(Backend backend);
  ~ScopedBackend();
  ScopedBackend(const ScopedBackend&) = delete;
  ScopedBackend& operator=(const ScopedBackend&) = delete;

 private:
  Backend previous_;
};

inline double dot(std::span<const double> a, std::span<const double> b) noexcept {
  return active().dot(a.data(), b.data(), a.size());
}

inline void axpy(std::span<double> y, double alpha, std::span<const double> x) noexcept {
  active().axpy(y.data(), alpha, x.data(), y.size());
}

// Replaces x by softmax(x) (max-subtracted) and returns log(sum(exp(x))).
double softmax_inplace(std::span<double> x) noexcept;

}  // namespace sctn::kernels
