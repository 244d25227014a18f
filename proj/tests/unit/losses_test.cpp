// Copyright Contributors to the sctn-flow project
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "sctn/gradcheck.hpp"
#include "sctn/losses.hpp"
#include "test_util.hpp"

namespace sctn {
namespace {

// Plain loops over all pairs, neighbours by full sort.
double fsc_oracle(const Tensor& u, const Tensor& us, const Tensor& F, const Tensor& P, const FscConfig& cfg) {
  const std::size_t n = u.rows();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::pair<double, std::size_t>> d;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      double s = 0.0;
      for (std::size_t c = 0; c < 3; ++c) s += (P.at(i, c) - P.at(j, c)) * (P.at(i, c) - P.at(j, c));
      d.emplace_back(s, j);
    }
    std::sort(d.begin(), d.end());
    const double g = gamma_factor(us.data().subspan(i * 3, 3), cfg.epsilon_g);
    for (std::size_t r = 0; r < cfg.k_neighbors; ++r) {
      const std::size_t j = d[r].second;
      const double s = std::max(0.0, fsc_similarity(F.data().subspan(i * F.cols(), F.cols()),
                                                    F.data().subspan(j * F.cols(), F.cols()), cfg.tau));
      double l1 = 0.0;
      for (std::size_t c = 0; c < 3; ++c) l1 += std::abs(u.at(i, c) - u.at(j, c));
      total += s * l1 * g;
    }
  }
  return total;
}

TEST(SupervisedLoss, Examples) {
  std::mt19937_64 rng(1);
  const Tensor u = testing::random_tensor({5, 3}, rng);
  const std::vector<std::uint8_t> ones(5, 1), zeros(5, 0);
  EXPECT_EQ(supervised_loss(u, u, ones).item(), 0.0);
  EXPECT_EQ(supervised_loss(u, testing::random_tensor({5, 3}, rng), zeros).item(), 0.0);

  const Tensor a = Tensor::matrix(1, 3, {1.5, -1.0, 2.25});
  const Tensor b = Tensor::matrix(1, 3, {0.5, 1.0, 0.25});
  const std::vector<std::uint8_t> one{1};
  EXPECT_EQ(supervised_loss(a, b, one).item(), 5.0);
  EXPECT_THROW(supervised_loss(a, b, ones), ShapeError);
  EXPECT_THROW(supervised_loss(a, u, one), ShapeError);
}

TEST(SupervisedLoss, MaskedPointsGetNoGradient) {
  Tape tape;
  std::mt19937_64 rng(2);
  const Tensor u = tape.variable(testing::random_away_from_zero({4, 3}, rng));
  const Tensor us = Tensor::zeros({4, 3});
  const std::vector<std::uint8_t> mask{1, 0, 1, 0};
  const auto g = tape.backward(supervised_loss(u, us, mask)).wrt(u);
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t c = 0; c < 3; ++c) {
      const double want = mask[i] ? (u.at(i, c) > 0 ? 1.0 : -1.0) : 0.0;
      EXPECT_EQ(g.at(i, c), want);
    }
  }
}

TEST(FscSimilarity, Examples) {
  const double tau = 0.39;
  const std::vector<double> a{1.0, 0.0}, b{0.0, 1.0};
  EXPECT_EQ(fsc_similarity(a, b, tau), 0.0);
  const std::vector<double> c{tau, 0.0};
  EXPECT_NEAR(fsc_similarity(a, c, tau), 0.63212, 1e-5);
  EXPECT_NEAR(fsc_similarity(a, c, tau), 1.0 - std::exp(-1.0), 1e-15);
  const std::vector<double> big{1e6, 0.0};
  EXPECT_EQ(fsc_similarity(a, big, tau), 1.0);
}

TEST(GammaFactor, ExamplesAndMonotonicity) {
  const std::vector<double> z{0, 0, 0}, one{0.25, -0.5, 0.25}, eps{-19.0, 0, 0};
  EXPECT_EQ(gamma_factor(z, 19.0), 1.0);
  EXPECT_EQ(gamma_factor(one, 19.0), 0.95);
  EXPECT_EQ(gamma_factor(eps, 19.0), 0.5);
  double prev = 1.0;
  for (double m = 0.1; m < 100.0; m *= 1.7) {
    const std::vector<double> v{m, 0, 0};
    const double g = gamma_factor(v, 19.0);
    EXPECT_LT(g, prev);
    EXPECT_GT(g, 0.0);
    prev = g;
  }
}

TEST(FscLoss, OnePairExample) {
  // Two points, each the other's only neighbour. Only row 0 has |u*|_1 = 1;
  // row 1 gets a large u* so its term is checked separately.
  FscConfig cfg;
  cfg.k_neighbors = 1;
  const Tensor P = Tensor::matrix(2, 3, {0, 0, 0, 1, 0, 0});
  const Tensor F = Tensor::matrix(2, 2, {1.0, 0.0, cfg.tau, 0.0});
  const Tensor u = Tensor::matrix(2, 3, {1.0, 0.0, 0.0, 0.0, 0.0, -1.0});
  const Tensor us = Tensor::matrix(2, 3, {0.5, 0.5, 0.0, 0.0, 0.0, 0.0});
  const double s = 1.0 - std::exp(-1.0);
  const double want = s * 2.0 * 0.95 + s * 2.0 * 1.0;
  EXPECT_NEAR(fsc_loss(u, us, F, P, cfg).item(), want, 1e-15);
  EXPECT_NEAR(s * 2.0 * 0.95, 1.20103, 1e-5);
}

TEST(FscLoss, ZeroCases) {
  std::mt19937_64 rng(3);
  FscConfig cfg;
  const Tensor P = testing::random_tensor({12, 3}, rng);
  const Tensor F = testing::random_tensor({12, 6}, rng);
  const Tensor us = testing::random_tensor({12, 3}, rng);
  std::vector<double> same;
  for (int i = 0; i < 12; ++i) same.insert(same.end(), {0.1, -0.2, 0.3});
  EXPECT_EQ(fsc_loss(Tensor::matrix(12, 3, same), us, F, P, cfg).item(), 0.0);

  // One-hot features in 12 channels are pairwise orthogonal.
  std::vector<double> hot(12 * 12, 0.0);
  for (int i = 0; i < 12; ++i) hot[i * 12 + i] = 1.0;
  EXPECT_EQ(fsc_loss(testing::random_tensor({12, 3}, rng), us, Tensor::matrix(12, 12, hot), P, cfg).item(), 0.0);
}

TEST(FscLoss, MatchesLoopOracle) {
  std::mt19937_64 rng(4);
  FscConfig cfg;
  for (std::size_t n : {9u, 16u, 40u}) {
    const Tensor P = testing::random_tensor({n, 3}, rng);
    const Tensor F = testing::random_tensor({n, 5}, rng, -0.5, 1.0);
    const Tensor u = testing::random_tensor({n, 3}, rng);
    const Tensor us = testing::random_tensor({n, 3}, rng, -3, 3);
    const double got = fsc_loss(u, us, F, P, cfg).item();
    const double want = fsc_oracle(u, us, F, P, cfg);
    EXPECT_NEAR(got, want, 1e-12 * std::max(1.0, want));
    EXPECT_GE(got, 0.0);
  }
}

TEST(FscLoss, NegativeDotsClampToZero) {
  FscConfig cfg;
  cfg.k_neighbors = 1;
  const Tensor P = Tensor::matrix(2, 3, {0, 0, 0, 1, 0, 0});
  const Tensor F = Tensor::matrix(2, 1, {30.0, -30.0});
  const Tensor u = Tensor::matrix(2, 3, {1, 0, 0, 0, 0, 0});
  EXPECT_EQ(fsc_loss(u, Tensor::zeros({2, 3}), F, P, cfg).item(), 0.0);
}

TEST(FscLoss, Errors) {
  FscConfig cfg;
  std::mt19937_64 rng(5);
  const Tensor t = testing::random_tensor({8, 3}, rng);
  EXPECT_THROW(fsc_loss(t, t, t, t, cfg), InvariantError);  // n == k
  cfg.tau = 0.0;
  EXPECT_THROW(validate(cfg), ConfigError);
}

TEST(FscLoss, StopGradientContract) {
  std::mt19937_64 rng(6);
  FscConfig cfg;
  const std::size_t n = 20;
  const Tensor P = testing::random_tensor({n, 3}, rng);
  const Tensor F0 = testing::random_tensor({n, 4}, rng);
  const Tensor u0 = testing::random_away_from_zero({n, 3}, rng);
  const Tensor us = testing::random_tensor({n, 3}, rng);

  Tape tape;
  const Tensor F = tape.variable(F0);
  const Tensor u = tape.variable(u0);
  const auto g = tape.backward(fsc_loss(u, us, F, P, cfg));
  const Tensor gF = g.wrt(F);
  for (double v : gF.data()) EXPECT_EQ(v, 0.0);

  // Same loss with F fed in as a plain constant.
  Tape frozen;
  const Tensor u2 = frozen.variable(u0);
  const auto g2 = frozen.backward(fsc_loss(u2, us, F0, P, cfg));
  EXPECT_TRUE(g.wrt(u).same_values(g2.wrt(u2)));

  // Without the stop the features do receive gradient.
  Tape open;
  const Tensor F3 = open.variable(F0);
  const auto g3 = open.backward(fsc_loss(open.variable(u0), us, F3, P, cfg, false));
  double mag = 0.0;
  const Tensor gF3 = g3.wrt(F3);
  for (double v : gF3.data()) mag += std::abs(v);
  EXPECT_GT(mag, 0.0);
}

TEST(FscLoss, GradientWrtFlow) {
  std::mt19937_64 rng(7);
  FscConfig cfg;
  cfg.k_neighbors = 3;
  const Tensor P = testing::random_tensor({8, 3}, rng);
  const Tensor F = testing::random_tensor({8, 4}, rng, 0.0, 1.0);
  const Tensor us = testing::random_tensor({8, 3}, rng);
  const Tensor u = testing::random_tensor({8, 3}, rng, -3, 3);
  const double err = grad_check([&](const Tensor& x) { return fsc_loss(x, us, F, P, cfg); }, u);
  EXPECT_LT(err, 1e-6);
  const double err_f = grad_check([&](const Tensor& x) { return fsc_loss(u, us, x, P, cfg, false); }, F);
  EXPECT_LT(err_f, 1e-6);
}

TEST(FscLoss, CounterCountsCalls) {
  std::mt19937_64 rng(8);
  const Tensor t = testing::random_tensor({10, 3}, rng);
  const auto before = fsc_evaluations();
  fsc_loss(t, t, t, t, FscConfig{});
  fsc_loss(t, t, t, t, FscConfig{});
  EXPECT_EQ(fsc_evaluations(), before + 2);
}

TEST(TotalLoss, Examples) {
  const Tensor es = Tensor::scalar(1.0), ec = Tensor::scalar(2.0);
  EXPECT_EQ(total_loss(es, Tensor::scalar(0.0), 0.35).item(), 1.0);
  EXPECT_EQ(total_loss(es, ec, 0.0).item(), 1.0);
  EXPECT_NEAR(total_loss(es, ec, 0.35).item(), 1.7, 1e-15);
}

Tensor fixture_truth() { return Tensor::matrix(4, 3, {0, 1, 0, 0, 0, 1, 1, 0, 0, 0, -1, 0}); }

Tensor fixture_pred() {
  // Errors 0.01, 0.06, 0.2, 0.5 along an axis orthogonal to u*.
  return Tensor::matrix(4, 3, {0.01, 1, 0, 0.06, 0, 1, 1, 0, 0.2, 0, -1, 0.5});
}

TEST(Metrics, FourPointFixture) {
  const MetricsRecord r = metrics(fixture_pred(), fixture_truth());
  EXPECT_NEAR(r.epe3d, 0.1925, 1e-15);
  EXPECT_EQ(r.acc3ds, 0.25);
  EXPECT_EQ(r.acc3dr, 0.5);
  EXPECT_EQ(r.outliers, 0.5);
}

TEST(Metrics, PerfectAndZeroTruth) {
  std::mt19937_64 rng(9);
  const Tensor u = testing::random_tensor({7, 3}, rng);
  const MetricsRecord r = metrics(u, u);
  EXPECT_EQ(r.epe3d, 0.0);
  EXPECT_EQ(r.acc3ds, 1.0);
  EXPECT_EQ(r.acc3dr, 1.0);
  EXPECT_EQ(r.outliers, 0.0);

  // Zero truth with a small absolute error: relative error is infinite.
  const MetricsRecord z = metrics(Tensor::matrix(1, 3, {0.01, 0, 0}), Tensor::zeros({1, 3}));
  EXPECT_EQ(z.acc3ds, 1.0);
  EXPECT_EQ(z.outliers, 1.0);
  EXPECT_EQ(metrics(Tensor::zeros({1, 3}), Tensor::zeros({1, 3})).outliers, 0.0);
  EXPECT_THROW(metrics(u, Tensor::zeros({6, 3})), ShapeError);
}

TEST(Metrics, PermutationInvariant) {
  std::mt19937_64 rng(10);
  const Tensor u = testing::random_tensor({30, 3}, rng, -0.3, 0.3);
  const Tensor us = testing::random_tensor({30, 3}, rng, -0.3, 0.3);
  std::vector<std::uint32_t> perm(30);
  std::iota(perm.begin(), perm.end(), 0u);
  std::shuffle(perm.begin(), perm.end(), rng);
  const MetricsRecord a = metrics(u, us);
  const MetricsRecord b = metrics(ops::gather_rows(u, perm), ops::gather_rows(us, perm));
  EXPECT_NEAR(a.epe3d, b.epe3d, 1e-15);
  EXPECT_EQ(a.acc3ds, b.acc3ds);
  EXPECT_EQ(a.acc3dr, b.acc3dr);
  EXPECT_EQ(a.outliers, b.outliers);
}

TEST(Metrics, CsvLayout) {
  const auto dir = testing::scratch_dir("metrics_csv");
  const std::vector<SceneMetrics> rows = {{"scene_00000", metrics(fixture_pred(), fixture_truth())},
                                          {"scene_00001", MetricsRecord{0.0, 1.0, 1.0, 0.0}}};
  write_metrics_csv(rows, dir / "m.csv");
  const auto bytes = testing::read_bytes(dir / "m.csv");
  EXPECT_EQ(std::string(bytes.begin(), bytes.end()),
            "scene_id,epe3d,acc3ds,acc3dr,outliers\n"
            "scene_00000,0.1925,0.25,0.5,0.5\n"
            "scene_00001,0,1,1,0\n");
  const MetricsRecord m = mean_metrics(std::vector<MetricsRecord>{rows[0].record, rows[1].record});
  EXPECT_NEAR(m.epe3d, 0.09625, 1e-15);
  EXPECT_EQ(m.acc3dr, 0.75);
}

}  // namespace
}  // namespace sctn
