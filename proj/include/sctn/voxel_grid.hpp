// Copyright Contributors to the sctn-flow project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "sctn/pointcloud.hpp"
#include "sctn/tensor.hpp"

namespace sctn {

using VoxelCoord = std::array<std::int32_t, 3>;

struct VoxelCoordHash {
  std::size_t operator()(const VoxelCoord& c) const noexcept {
    std::uint64_t h = static_cast<std::uint32_t>(c[0]);
    h = h * 0x9E3779B97F4A7C15ull ^ static_cast<std::uint32_t>(c[1]);
    h = h * 0x9E3779B97F4A7C15ull ^ static_cast<std::uint32_t>(c[2]);
    return static_cast<std::size_t>(h ^ (h >> 29));
  }
};

// Sparse set of occupied cells. Cells are kept in lexicographic coordinate
// order, so row v of any per-voxel tensor belongs to coords[v].
class VoxelGrid {
 public:
  VoxelGrid() = default;

  // Deduplicates and sorts; members stay empty.
  static VoxelGrid from_coords(std::vector<VoxelCoord> coords, double voxel_size);

  double voxel_size() const noexcept { return voxel_size_; }
  std::size_t size() const noexcept { return coords_.size(); }
  bool empty() const noexcept { return coords_.empty(); }
  const std::vector<VoxelCoord>& coords() const noexcept { return coords_; }
  const VoxelCoord& coord(std::size_t v) const { return coords_.at(v); }
  // (coord + 0.5) * voxel_size
  Point3 center(std::size_t v) const;
  const std::vector<Point3>& centers() const noexcept { return centers_; }

  // Point rows inside cell v; only set by voxelize.
  const std::vector<std::uint32_t>& members(std::size_t v) const { return members_.at(v); }
  // Cell of each point row; only set by voxelize.
  const std::vector<std::uint32_t>& point_voxel() const noexcept { return point_voxel_; }

  std::optional<std::uint32_t> find(const VoxelCoord& c) const;

 private:
  friend VoxelGrid voxelize(const PointCloud& cloud, double voxel_size);
  void build_index();

  double voxel_size_ = 0.08;
  std::vector<VoxelCoord> coords_;
  std::vector<Point3> centers_;
  std::vector<std::vector<std::uint32_t>> members_;
  std::vector<std::uint32_t> point_voxel_;
  std::unordered_map<VoxelCoord, std::uint32_t, VoxelCoordHash> index_;
};

constexpr double kDefaultVoxelSize = 0.08;
constexpr std::size_t kDefaultDevoxelK = 3;
constexpr double kDevoxelGuard = 1e-9;

VoxelCoord voxel_of(const Point3& p, double voxel_size);

VoxelGrid voxelize(const PointCloud& cloud, double voxel_size = kDefaultVoxelSize);

// V x 4: occupancy count / max count, then mean (p - center) / voxel_size.
Tensor initial_voxel_features(const VoxelGrid& grid, const PointCloud& cloud);

struct VoxelNeighbor {
  std::uint32_t voxel;
  double distance;
};

// K nearest occupied voxel centers, nearest first; ties by coordinate order.
// Returns min(K, V) entries.
std::vector<VoxelNeighbor> knn_voxels(const VoxelGrid& grid, const Point3& p, std::size_t K);

// Normalized 1/d weights, nearest first. A first distance below the guard
// gets all the weight.
std::vector<double> inverse_distance_weights(std::span<const double> distances);

// Interpolation weights for every point, n x K' with K' = min(K, V).
struct DevoxelWeights {
  std::size_t k = 0;
  std::vector<std::uint32_t> voxel;  // n * k
  std::vector<double> weight;        // n * k, each row sums to 1
};

DevoxelWeights devoxel_weights(const VoxelGrid& grid, std::span<const Point3> points, std::size_t K);

// Inverse-distance interpolation of voxel features onto points (n x C).
Tensor devoxelize(const DevoxelWeights& w, const Tensor& voxel_features);
Tensor devoxelize(const VoxelGrid& grid, const Tensor& voxel_features, const PointCloud& cloud,
                  std::size_t K = kDefaultDevoxelK);

}  // namespace sctn
