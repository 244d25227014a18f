// Copyright Contributors to the sctn-flow project
// SPDX-License-Identifier: Apache-2.0

#include "sctn/kernels.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <random>
#include <vector>

namespace sctn::kernels {
namespace {

std::vector<double> random_vec(std::size_t n, std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> d(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

bool bit_equal(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

const KernelTable* avx2_or_skip() {
  if (avx2_table() == nullptr || !cpu_supports_avx2()) return nullptr;
  return avx2_table();
}

TEST(ScalarKernels, ReferenceValues) {
  const auto& k = scalar_table();
  const double a[] = {1.0, 2.0, 3.0};
  const double b[] = {4.0, -5.0, 6.0};
  EXPECT_EQ(k.dot(a, b, 3), 12.0);
  EXPECT_EQ(k.sum(a, 3), 6.0);
  EXPECT_EQ(k.max(b, 3), 6.0);
  double y[] = {1.0, 1.0, 1.0};
  k.axpy(y, 2.0, a, 3);
  EXPECT_EQ(y[2], 7.0);
  double e[] = {0.0, 1.0};
  k.exp_inplace(e, 2);
  EXPECT_EQ(e[0], 1.0);
  EXPECT_DOUBLE_EQ(e[1], std::exp(1.0));
}

TEST(ScalarKernels, EmptyInputs) {
  const auto& k = scalar_table();
  EXPECT_EQ(k.dot(nullptr, nullptr, 0), 0.0);
  EXPECT_EQ(k.sum(nullptr, 0), 0.0);
  EXPECT_TRUE(std::isinf(k.max(nullptr, 0)));
}

TEST(SoftmaxInplace, NormalizesAndReturnsLogSumExp) {
  std::vector<double> x = {1.0, 2.0, 3.0, 1000.0};
  const double lse = softmax_inplace(x);
  double s = 0.0;
  for (double v : x) s += v;
  EXPECT_NEAR(s, 1.0, 1e-15);
  EXPECT_NEAR(lse, 1000.0, 1e-12);
}

TEST(Dispatch, ScopedBackendRestoresPrevious) {
  const Backend before = active().backend;
  {
    ScopedBackend guard(Backend::kScalar);
    EXPECT_EQ(active().backend, Backend::kScalar);
  }
  EXPECT_EQ(active().backend, before);
}

TEST(Dispatch, BestAvailableMatchesCpu) {
  if (avx2_table() != nullptr && cpu_supports_avx2()) {
    EXPECT_EQ(best_available(), Backend::kAvx2);
  } else {
    EXPECT_EQ(best_available(), Backend::kScalar);
    EXPECT_THROW(select(Backend::kAvx2), std::invalid_argument);
  }
}

// Elementwise kernels round identically in both variants.
TEST(Avx2Equivalence, ElementwiseKernelsBitIdentical) {
  const KernelTable* v = avx2_or_skip();
  if (v == nullptr) GTEST_SKIP() << "AVX2 not available";
  const auto& s = scalar_table();
  std::mt19937_64 rng(1);
  for (std::size_t n = 0; n < 70; ++n) {
    const auto x = random_vec(n, rng, -3.0, 3.0);
    const auto b = random_vec(n, rng, -3.0, 3.0);
    auto y1 = random_vec(n, rng, -1.0, 1.0);
    auto y2 = y1;
    s.axpy(y1.data(), 0.37, x.data(), n);
    v->axpy(y2.data(), 0.37, x.data(), n);
    EXPECT_TRUE(bit_equal(y1, y2)) << "axpy n=" << n;

    s.scale_add(y1.data(), x.data(), -0.25, 1.7, n);
    v->scale_add(y2.data(), x.data(), -0.25, 1.7, n);
    EXPECT_TRUE(bit_equal(y1, y2)) << "scale_add n=" << n;

    s.scaled_diff(y1.data(), x.data(), b.data(), 1.0 / 0.03, n);
    v->scaled_diff(y2.data(), x.data(), b.data(), 1.0 / 0.03, n);
    EXPECT_TRUE(bit_equal(y1, y2)) << "scaled_diff n=" << n;

    EXPECT_EQ(s.max(x.data(), n), v->max(x.data(), n)) << "max n=" << n;
  }
}

TEST(Avx2Equivalence, ReductionsAgreeWithinRounding) {
  const KernelTable* v = avx2_or_skip();
  if (v == nullptr) GTEST_SKIP() << "AVX2 not available";
  const auto& s = scalar_table();
  std::mt19937_64 rng(2);
  for (std::size_t n = 1; n < 300; n += 7) {
    const auto a = random_vec(n, rng, -1.0, 1.0);
    const auto b = random_vec(n, rng, -1.0, 1.0);
    double abs_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) abs_sum += std::abs(a[i] * b[i]);
    EXPECT_NEAR(s.dot(a.data(), b.data(), n), v->dot(a.data(), b.data(), n), 1e-15 * n * (abs_sum + 1));
    EXPECT_NEAR(s.sum(a.data(), n), v->sum(a.data(), n), 1e-15 * n * n);
  }
}

TEST(Avx2Equivalence, ExpWithinFewUlp) {
  const KernelTable* v = avx2_or_skip();
  if (v == nullptr) GTEST_SKIP() << "AVX2 not available";
  std::mt19937_64 rng(3);
  auto x = random_vec(4099, rng, -700.0, 700.0);
  x.push_back(0.0);
  x.push_back(-1e-300);
  x.push_back(709.0);
  auto ref = x;
  scalar_table().exp_inplace(ref.data(), ref.size());
  auto got = x;
  v->exp_inplace(got.data(), got.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    EXPECT_LE(std::abs(got[i] - ref[i]), 4e-16 * ref[i]) << "x=" << x[i];
  }
  EXPECT_EQ(got[x.size() - 3], 1.0);
}

TEST(Avx2Equivalence, ExpUnderflowFlushesToZero) {
  const KernelTable* v = avx2_or_skip();
  if (v == nullptr) GTEST_SKIP() << "AVX2 not available";
  std::vector<double> x = {-710.0, -800.0, -1e6, -708.0};
  v->exp_inplace(x.data(), x.size());
  EXPECT_EQ(x[0], 0.0);
  EXPECT_EQ(x[1], 0.0);
  EXPECT_EQ(x[2], 0.0);
  EXPECT_NEAR(x[3], std::exp(-708.0), 4e-16 * std::exp(-708.0));
}

TEST(Avx2Equivalence, SoftmaxRowsAgree) {
  if (avx2_or_skip() == nullptr) GTEST_SKIP() << "AVX2 not available";
  std::mt19937_64 rng(4);
  for (std::size_t n = 1; n < 80; n += 3) {
    auto a = random_vec(n, rng, -50.0, 50.0);
    auto b = a;
    double la = 0.0;
    double lb = 0.0;
    {
      ScopedBackend guard(Backend::kScalar);
      la = softmax_inplace(a);
    }
    {
      ScopedBackend guard(Backend::kAvx2);
      lb = softmax_inplace(b);
    }
    EXPECT_NEAR(la, lb, 1e-12);
    for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(a[i], b[i], 1e-14);
  }
}

}  // namespace
}  // namespace sctn::kernels
