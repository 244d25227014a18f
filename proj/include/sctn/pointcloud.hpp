// Copyright Contributors to the sctn-flow project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "sctn/tensor.hpp"

namespace sctn {

using Point3 = std::array<double, 3>;

struct PointCloud {
  std::vector<Point3> points;

  std::size_t size() const noexcept { return points.size(); }
  // n x 3 constant tensor.
  Tensor to_tensor() const;
  static PointCloud from_tensor(const Tensor& t);
};

struct SceneMeta {
  std::uint64_t seed = 0;
};

// Two frames with ground-truth flow u* and non-occlusion mask m, both aligned
// with the rows of P.
struct ScenePair {
  PointCloud P;
  PointCloud Q;
  std::vector<Point3> gt_flow;
  std::vector<std::uint8_t> mask;
  SceneMeta meta;
};

struct FlowField {
  std::vector<Point3> flow;

  std::size_t size() const noexcept { return flow.size(); }
  Tensor to_tensor() const;
  static FlowField from_tensor(const Tensor& t);
};

// Throws InvariantError / NonFiniteError when a scene is inconsistent.
void validate_scene(const ScenePair& scene);

// .sfs scene files: "SFS1", u32 n_P, u32 n_Q, f32 P[3 n_P], f32 Q[3 n_Q],
// f32 gt_flow[3 n_P], u8 mask[n_P], u64 seed. Little-endian.
void save_scene(const ScenePair& scene, const std::filesystem::path& path);
ScenePair load_scene(const std::filesystem::path& path);

// SFF1 flow files: "SFF1", u32 n, f32 flow[3 n].
void save_flow(const FlowField& flow, const std::filesystem::path& path);
FlowField load_flow(const std::filesystem::path& path);

struct PreprocessOptions {
  std::size_t sample_n = 8192;
  double max_depth = 35.0;    // drops z > max_depth
  double min_height = -1.4;   // drops y < min_height
  std::uint64_t seed = 0;
};

struct Preprocessed {
  PointCloud cloud;
  std::vector<Point3> flow;          // empty if no flow was supplied
  std::vector<std::uint8_t> mask;    // empty if no mask was supplied
  std::vector<std::size_t> source;   // row of each output in the input
};

// Depth cut, ground cut, then seeded sampling without replacement down to
// exactly sample_n rows. flow/mask may be empty; otherwise they must align.
Preprocessed preprocess(const PointCloud& cloud, std::span<const Point3> flow,
                        std::span<const std::uint8_t> mask, const PreprocessOptions& opts);

enum class ErrorBand { kSmall, kMedium, kLarge };

// EPE < 0.05 small, < 0.3 medium, otherwise large.
ErrorBand classify_error(double epe) noexcept;
std::array<std::uint8_t, 3> band_color(ErrorBand band) noexcept;

// ASCII PLY of P, colored by per-point end-point error band.
void export_error_ply(const ScenePair& scene, const FlowField& pred, const std::filesystem::path& path);

}  // namespace sctn
