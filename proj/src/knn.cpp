// Copyright Contributors to the sctn-flow project
// SPDX-License-Identifier: Apache-2.0

#include "sctn/knn.hpp"

#include <algorithm>
#include <string>
#include <utility>

namespace sctn {

std::vector<std::uint32_t> knn_indices(std::span<const Point3> points, std::size_t k, bool exclude_self) {
  const std::size_t n = points.size();
  const std::size_t candidates = exclude_self ? (n == 0 ? 0 : n - 1) : n;
  if (k == 0 || k > candidates) {
    throw InvariantError("knn: need " + std::to_string(k) + " neighbours but only " + std::to_string(candidates) +
                         " candidates");
  }
  std::vector<std::uint32_t> out(n * k);
  std::vector<std::pair<double, std::uint32_t>> dist;
  dist.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    dist.clear();
    const auto& p = points[i];
    for (std::size_t j = 0; j < n; ++j) {
      if (exclude_self && j == i) continue;
      const double dx = points[j][0] - p[0];
      const double dy = points[j][1] - p[1];
      const double dz = points[j][2] - p[2];
      dist.emplace_back(dx * dx + dy * dy + dz * dz, static_cast<std::uint32_t>(j));
    }
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
    for (std::size_t r = 0; r < k; ++r) out[i * k + r] = dist[r].second;
  }
  return out;
}

}  // namespace sctn
