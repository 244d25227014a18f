// Copyright Contributors to the sctn-flow project
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Seeded rigid multi-object scenes with exact ground-truth flow.

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "sctn/pointcloud.hpp"

namespace sctn {

enum class ObjectKind { kBox, kSphere, kPlane };

struct SceneConfig {
  std::size_t n_objects = 2;
  std::size_t points_per_object = 128;
  std::vector<ObjectKind> kinds = {ObjectKind::kBox, ObjectKind::kSphere, ObjectKind::kPlane};
  double size_min = 0.5;         // object extent, meters
  double size_max = 0.8;
  double translation_min = 0.0;  // centroid displacement magnitude
  double translation_max = 0.3;
  double rotation_min = 0.0;     // radians, about a random axis through the centroid
  double rotation_max = 0.1;
  double occlusion_fraction = 0.05;
  double noise_sigma = 0.0;
  // Placement box for object centroids; y is height, z is depth.
  Point3 region_min = {-1.2, -0.6, 2.5};
  Point3 region_max = {1.2, 0.6, 4.5};
  double min_gap = 0.08;  // clearance between object bounding boxes
  std::uint64_t seed = 0;
};

// Throws ConfigError on invalid ranges.
void validate(const SceneConfig& cfg);

using Rotation = std::array<double, 9>;  // row-major 3x3

Rotation axis_angle(const Point3& axis, double angle);

// R p + t - p
Point3 rigid_flow(const Rotation& R, const Point3& t, const Point3& p) noexcept;

// Per-object point sets, transforms, and which P rows belong to which object.
struct GeneratedScene {
  ScenePair scene;
  std::vector<std::size_t> object_of_point;   // aligned with P
  std::vector<std::size_t> q_source;          // P row each Q row was moved from
};

GeneratedScene generate_scene_detailed(const SceneConfig& cfg);

ScenePair generate_scene(const SceneConfig& cfg);

// Writes count scenes (seeds cfg.seed + i) as scene_NNNNN.sfs plus a
// newline-separated manifest.txt of relative paths. Returns the manifest path.
std::filesystem::path generate_dataset(const SceneConfig& cfg, std::size_t count, const std::filesystem::path& dir);

// Reads a manifest and returns absolute scene paths in manifest order.
std::vector<std::filesystem::path> read_manifest(const std::filesystem::path& manifest);

}  // namespace sctn
