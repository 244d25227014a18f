// Copyright Contributors to the sctn-flow project
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "sctn/knn.hpp"

namespace sctn {
namespace {

TEST(Knn, LineWithTies) {
  const std::vector<Point3> pts = {{0, 0, 0}, {1, 0, 0}, {2, 0, 0}, {3, 0, 0}};
  const auto nn = knn_indices(pts, 2, true);
  // Row 1 has neighbours 0 and 2 at equal distance: lower index first.
  EXPECT_EQ(nn, (std::vector<std::uint32_t>{1, 2, 0, 2, 1, 3, 2, 1}));
  const auto with_self = knn_indices(pts, 1, false);
  EXPECT_EQ(with_self, (std::vector<std::uint32_t>{0, 1, 2, 3}));
}

TEST(Knn, MatchesSortedDistances) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<Point3> pts(50);
  for (auto& p : pts) p = {u(rng), u(rng), u(rng)};
  const std::size_t k = 8;
  const auto nn = knn_indices(pts, k, true);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    std::vector<std::pair<double, std::uint32_t>> all;
    for (std::size_t j = 0; j < pts.size(); ++j) {
      if (j == i) continue;
      double d = 0;
      for (int c = 0; c < 3; ++c) d += (pts[i][c] - pts[j][c]) * (pts[i][c] - pts[j][c]);
      all.emplace_back(d, static_cast<std::uint32_t>(j));
    }
    std::sort(all.begin(), all.end());
    for (std::size_t r = 0; r < k; ++r) EXPECT_EQ(nn[i * k + r], all[r].second);
  }
}

TEST(Knn, TooFewCandidates) {
  const std::vector<Point3> pts = {{0, 0, 0}, {1, 0, 0}};
  EXPECT_THROW(knn_indices(pts, 2, true), InvariantError);
  EXPECT_NO_THROW(knn_indices(pts, 2, false));
  EXPECT_THROW(knn_indices(pts, 0, false), InvariantError);
}

}  // namespace
}  // namespace sctn
