// Copyright Contributors to the sctn-flow project
// SPDX-License-Identifier: Apache-2.0

#include "sctn/voxel_grid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>

namespace sctn {

VoxelCoord voxel_of(const Point3& p, double voxel_size) {
  VoxelCoord c;
  for (int k = 0; k < 3; ++k) {
    if (!std::isfinite(p[k])) throw NonFiniteError("voxelize: non-finite coordinate");
    const double f = std::floor(p[k] / voxel_size);
    if (f < std::numeric_limits<std::int32_t>::min() || f > std::numeric_limits<std::int32_t>::max()) {
      throw InvariantError("voxelize: coordinate out of grid range");
    }
    c[k] = static_cast<std::int32_t>(f);
  }
  return c;
}

void VoxelGrid::build_index() {
  index_.clear();
  index_.reserve(coords_.size() * 2);
  centers_.resize(coords_.size());
  for (std::size_t v = 0; v < coords_.size(); ++v) {
    index_.emplace(coords_[v], static_cast<std::uint32_t>(v));
    centers_[v] = center(v);
  }
}

VoxelGrid VoxelGrid::from_coords(std::vector<VoxelCoord> coords, double voxel_size) {
  if (!(voxel_size > 0.0)) throw InvariantError("voxel grid: voxel_size must be positive");
  std::sort(coords.begin(), coords.end());
  coords.erase(std::unique(coords.begin(), coords.end()), coords.end());
  VoxelGrid g;
  g.voxel_size_ = voxel_size;
  g.coords_ = std::move(coords);
  g.members_.resize(g.coords_.size());
  g.build_index();
  return g;
}

Point3 VoxelGrid::center(std::size_t v) const {
  const auto& c = coords_.at(v);
  return {(c[0] + 0.5) * voxel_size_, (c[1] + 0.5) * voxel_size_, (c[2] + 0.5) * voxel_size_};
}

std::optional<std::uint32_t> VoxelGrid::find(const VoxelCoord& c) const {
  const auto it = index_.find(c);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

VoxelGrid voxelize(const PointCloud& cloud, double voxel_size) {
  if (!(voxel_size > 0.0)) throw InvariantError("voxelize: voxel_size must be positive");
  std::vector<VoxelCoord> per_point(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) per_point[i] = voxel_of(cloud.points[i], voxel_size);
  VoxelGrid g = VoxelGrid::from_coords(per_point, voxel_size);
  g.point_voxel_.resize(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const std::uint32_t v = *g.find(per_point[i]);
    g.point_voxel_[i] = v;
    g.members_[v].push_back(static_cast<std::uint32_t>(i));
  }
  return g;
}

Tensor initial_voxel_features(const VoxelGrid& grid, const PointCloud& cloud) {
  if (grid.point_voxel().size() != cloud.size()) {
    throw InvariantError("initial_voxel_features: grid was not built from this cloud");
  }
  std::size_t max_count = 1;
  for (std::size_t v = 0; v < grid.size(); ++v) max_count = std::max(max_count, grid.members(v).size());
  std::vector<double> out(grid.size() * 4, 0.0);
  const double inv = 1.0 / grid.voxel_size();
  for (std::size_t v = 0; v < grid.size(); ++v) {
    const auto& m = grid.members(v);
    const Point3 c = grid.center(v);
    double* row = &out[v * 4];
    row[0] = static_cast<double>(m.size()) / static_cast<double>(max_count);
    if (m.empty()) continue;
    for (auto i : m) {
      for (int k = 0; k < 3; ++k) row[1 + k] += (cloud.points[i][k] - c[k]) * inv;
    }
    for (int k = 0; k < 3; ++k) row[1 + k] /= static_cast<double>(m.size());
  }
  return Tensor::matrix(grid.size(), 4, std::move(out));
}

namespace {

double sq_dist(const Point3& a, const Point3& b) noexcept {
  const double dx = a[0] - b[0];
  const double dy = a[1] - b[1];
  const double dz = a[2] - b[2];
  return dx * dx + dy * dy + dz * dz;
}

using Cand = std::pair<double, std::uint32_t>;  // (squared distance, voxel)

void take_k(std::vector<Cand>& cand, std::size_t k) {
  const auto mid = cand.begin() + static_cast<std::ptrdiff_t>(std::min(k, cand.size()));
  std::partial_sort(cand.begin(), mid, cand.end());
  cand.resize(static_cast<std::size_t>(mid - cand.begin()));
}

std::vector<Cand> brute_force(const VoxelGrid& grid, const Point3& p, std::size_t k) {
  std::vector<Cand> cand(grid.size());
  for (std::size_t v = 0; v < grid.size(); ++v) cand[v] = {sq_dist(p, grid.centers()[v]), static_cast<std::uint32_t>(v)};
  take_k(cand, k);
  return cand;
}

// Scans rings of cells around p's cell. After ring r every unseen center is at
// least (r + 0.5) * voxel_size away, which bounds the search.
std::vector<Cand> shell_search(const VoxelGrid& grid, const Point3& p, std::size_t k) {
  const VoxelCoord c0 = voxel_of(p, grid.voxel_size());
  std::vector<Cand> cand;
  for (std::int64_t r = 0;; ++r) {
    const std::int64_t side = 2 * r + 1;
    if (side * side * side > static_cast<std::int64_t>(4 * grid.size())) return brute_force(grid, p, k);
    for (std::int64_t dx = -r; dx <= r; ++dx) {
      for (std::int64_t dy = -r; dy <= r; ++dy) {
        const bool edge = std::abs(dx) == r || std::abs(dy) == r;
        for (std::int64_t dz = -r; dz <= r; dz += (edge || r == 0) ? 1 : 2 * r) {
          const VoxelCoord c = {static_cast<std::int32_t>(c0[0] + dx), static_cast<std::int32_t>(c0[1] + dy),
                                static_cast<std::int32_t>(c0[2] + dz)};
          if (auto v = grid.find(c)) cand.emplace_back(sq_dist(p, grid.centers()[*v]), *v);
        }
      }
    }
    if (cand.size() >= k) {
      std::vector<Cand> best = cand;
      take_k(best, k);
      const double bound = (static_cast<double>(r) + 0.5) * grid.voxel_size();
      if (best.back().first < bound * bound) return best;
    }
  }
}

}  // namespace

std::vector<VoxelNeighbor> knn_voxels(const VoxelGrid& grid, const Point3& p, std::size_t K) {
  if (grid.empty()) throw InvariantError("knn_voxels: empty grid");
  if (K == 0) throw InvariantError("knn_voxels: K must be at least 1");
  const std::size_t k = std::min(K, grid.size());
  const auto best = shell_search(grid, p, k);
  std::vector<VoxelNeighbor> out(best.size());
  for (std::size_t i = 0; i < best.size(); ++i) out[i] = {best[i].second, std::sqrt(best[i].first)};
  return out;
}

std::vector<double> inverse_distance_weights(std::span<const double> d) {
  std::vector<double> w(d.size(), 0.0);
  if (d.empty()) return w;
  if (d[0] < kDevoxelGuard) {
    w[0] = 1.0;
    return w;
  }
  double total = 0.0;
  for (double x : d) total += 1.0 / x;
  for (std::size_t r = 0; r < d.size(); ++r) w[r] = (1.0 / d[r]) / total;
  return w;
}

DevoxelWeights devoxel_weights(const VoxelGrid& grid, std::span<const Point3> points, std::size_t K) {
  if (grid.empty()) throw InvariantError("devoxelize: empty grid");
  if (K == 0 || K > 64) throw InvariantError("devoxelize: K must lie in [1, 64]");
  DevoxelWeights w;
  w.k = std::min(K, grid.size());
  w.voxel.resize(points.size() * w.k);
  w.weight.assign(points.size() * w.k, 0.0);
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto nn = knn_voxels(grid, points[i], w.k);
    double d[64];
    for (std::size_t r = 0; r < w.k; ++r) {
      w.voxel[i * w.k + r] = nn[r].voxel;
      d[r] = nn[r].distance;
    }
    const auto wi = inverse_distance_weights(std::span<const double>(d, w.k));
    std::copy(wi.begin(), wi.end(), w.weight.begin() + static_cast<std::ptrdiff_t>(i * w.k));
  }
  return w;
}

Tensor devoxelize(const DevoxelWeights& w, const Tensor& voxel_features) {
  if (voxel_features.rank() != 2) throw ShapeError("devoxelize", {voxel_features.shape()}, "expected V x C");
  const std::size_t n = w.k == 0 ? 0 : w.voxel.size() / w.k;
  std::vector<std::uint32_t> owner(w.voxel.size());
  for (std::size_t r = 0; r < owner.size(); ++r) owner[r] = static_cast<std::uint32_t>(r / w.k);
  const Tensor picked = ops::gather_rows(voxel_features, w.voxel);
  const Tensor weighted = ops::mul_rows(picked, Tensor::column(w.weight));
  return ops::scatter_add_rows(weighted, owner, n);
}

Tensor devoxelize(const VoxelGrid& grid, const Tensor& voxel_features, const PointCloud& cloud, std::size_t K) {
  if (voxel_features.rank() != 2 || voxel_features.rows() != grid.size()) {
    throw ShapeError("devoxelize", {voxel_features.shape(), {grid.size()}}, "feature rows must equal voxel count");
  }
  return devoxelize(devoxel_weights(grid, cloud.points, K), voxel_features);
}

}  // namespace sctn
