// Copyright Contributors to the sctn-flow project
// SPDX-License-Identifier: Apache-2.0

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "sctn/kernels.hpp"

namespace sctn::kernels {

#if defined(SCTN_HAVE_AVX2)
const KernelTable* avx2_table_impl() noexcept;
#endif

const KernelTable* avx2_table() noexcept {
#if defined(SCTN_HAVE_AVX2)
  return avx2_table_impl();
#else
  return nullptr;
#endif
}

bool cpu_supports_avx2() noexcept {
#if defined(SCTN_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Backend best_available() noexcept {
  return (avx2_table() != nullptr && cpu_supports_avx2()) ? Backend::kAvx2 : Backend::kScalar;
}

std::string_view backend_name(Backend backend) noexcept {
  return backend == Backend::kAvx2 ? "avx2" : "scalar";
}

namespace {

const KernelTable* table_for(Backend backend) {
  if (backend == Backend::kScalar) return &scalar_table();
  if (avx2_table() == nullptr || !cpu_supports_avx2()) {
    throw std::invalid_argument("kernel backend 'avx2' is not available on this build or CPU");
  }
  return avx2_table();
}

const KernelTable* initial_table() {
  if (const char* env = std::getenv("SCTN_KERNELS")) {
    const std::string want(env);
    if (want == "scalar") return &scalar_table();
    if (want == "avx2" && best_available() == Backend::kAvx2) return avx2_table();
  }
  return table_for(best_available());
}

std::atomic<const KernelTable*>& current() {
  static std::atomic<const KernelTable*> table{initial_table()};
  return table;
}

}  // namespace

const KernelTable& active() noexcept { return *current().load(std::memory_order_relaxed); }

void select(Backend backend) { current().store(table_for(backend), std::memory_order_relaxed); }

ScopedBackend::ScopedBackend(Backend backend) : previous_(active().backend) { select(backend); }

ScopedBackend::~ScopedBackend() { select(previous_); }

double softmax_inplace(std::span<double> x) noexcept {
  const KernelTable& k = active();
  const std::size_t n = x.size();
  const double m = k.max(x.data(), n);
  k.scale_add(x.data(), x.data(), -m, 1.0, n);
  k.exp_inplace(x.data(), n);
  const double s = k.sum(x.data(), n);
  k.scale_add(x.data(), x.data(), 0.0, 1.0 / s, n);
  return m + std::log(s);
}

}  // namespace sctn::kernels
