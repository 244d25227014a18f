// Copyright Contributors to the sctn-flow project
// SPDX-License-Identifier: Apache-2.0

#include "sctn/pointcloud.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <string>

#include "binary_io.hpp"
#include "sctn/random.hpp"

namespace sctn {

Tensor PointCloud::to_tensor() const {
  std::vector<double> v;
  v.reserve(points.size() * 3);
  for (const auto& p : points) v.insert(v.end(), p.begin(), p.end());
  return Tensor::matrix(points.size(), 3, std::move(v));
}

PointCloud PointCloud::from_tensor(const Tensor& t) {
  if (t.rank() != 2 || t.cols() != 3) throw ShapeError("point_cloud", {t.shape()}, "expected n x 3");
  PointCloud c;
  c.points.resize(t.rows());
  for (std::size_t i = 0; i < t.rows(); ++i) c.points[i] = {t.at(i, 0), t.at(i, 1), t.at(i, 2)};
  return c;
}

Tensor FlowField::to_tensor() const {
  std::vector<double> v;
  v.reserve(flow.size() * 3);
  for (const auto& p : flow) v.insert(v.end(), p.begin(), p.end());
  return Tensor::matrix(flow.size(), 3, std::move(v));
}

FlowField FlowField::from_tensor(const Tensor& t) {
  if (t.rank() != 2 || t.cols() != 3) throw ShapeError("flow_field", {t.shape()}, "expected n x 3");
  FlowField f;
  f.flow.resize(t.rows());
  for (std::size_t i = 0; i < t.rows(); ++i) f.flow[i] = {t.at(i, 0), t.at(i, 1), t.at(i, 2)};
  return f;
}

namespace {

void require_finite(std::span<const Point3> pts, const char* what) {
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (double v : pts[i]) {
      if (!std::isfinite(v)) throw NonFiniteError(std::string(what) + ": non-finite value in row " + std::to_string(i));
    }
  }
}

void write_points(io::Writer& w, std::span<const Point3> pts) {
  for (const auto& p : pts) {
    for (double v : p) w.f32(static_cast<float>(v));
  }
}

std::vector<Point3> read_points(io::Reader& r, std::size_t n) {
  std::vector<Point3> pts(n);
  for (auto& p : pts) {
    for (double& v : p) v = r.f32();
  }
  return pts;
}

}  // namespace

void validate_scene(const ScenePair& scene) {
  if (scene.P.size() == 0 || scene.Q.size() == 0) throw InvariantError("scene: point clouds must be non-empty");
  if (scene.gt_flow.size() != scene.P.size()) {
    throw InvariantError("scene: gt_flow has " + std::to_string(scene.gt_flow.size()) + " rows, P has " +
                         std::to_string(scene.P.size()));
  }
  if (scene.mask.size() != scene.P.size()) {
    throw InvariantError("scene: mask length " + std::to_string(scene.mask.size()) + " does not match n_P " +
                         std::to_string(scene.P.size()));
  }
  for (std::size_t i = 0; i < scene.mask.size(); ++i) {
    if (scene.mask[i] > 1) throw InvariantError("scene: mask value at row " + std::to_string(i) + " is not 0/1");
  }
  require_finite(scene.P.points, "P");
  require_finite(scene.Q.points, "Q");
  require_finite(scene.gt_flow, "gt_flow");
}

void save_scene(const ScenePair& scene, const std::filesystem::path& path) {
  validate_scene(scene);
  io::Writer w;
  w.bytes("SFS1");
  w.u32(static_cast<std::uint32_t>(scene.P.size()));
  w.u32(static_cast<std::uint32_t>(scene.Q.size()));
  write_points(w, scene.P.points);
  write_points(w, scene.Q.points);
  write_points(w, scene.gt_flow);
  for (auto m : scene.mask) w.u8(m);
  w.u64(scene.meta.seed);
  w.save(path);
}

ScenePair load_scene(const std::filesystem::path& path) {
  io::Reader r(path);
  r.expect_magic("SFS1");
  const std::size_t np = r.u32();
  const std::size_t nq = r.u32();
  ScenePair s;
  s.P.points = read_points(r, np);
  s.Q.points = read_points(r, nq);
  s.gt_flow = read_points(r, np);
  if (r.remaining() < 8) r.fail("truncated payload (mask/seed missing)");
  const std::size_t mask_len = r.remaining() - 8;
  if (mask_len != np) {
    throw InvariantError(path.string() + ": mask length " + std::to_string(mask_len) + " does not match n_P " +
                         std::to_string(np));
  }
  s.mask.resize(np);
  for (auto& m : s.mask) m = r.u8();
  s.meta.seed = r.u64();
  try {
    validate_scene(s);
  } catch (const Error& e) {
    throw FormatError(path.string(), e.what());
  }
  return s;
}

void save_flow(const FlowField& flow, const std::filesystem::path& path) {
  require_finite(flow.flow, "flow");
  io::Writer w;
  w.bytes("SFF1");
  w.u32(static_cast<std::uint32_t>(flow.size()));
  write_points(w, flow.flow);
  w.save(path);
}

FlowField load_flow(const std::filesystem::path& path) {
  io::Reader r(path);
  r.expect_magic("SFF1");
  FlowField f;
  f.flow = read_points(r, r.u32());
  if (r.remaining() != 0) r.fail("trailing bytes after flow payload");
  require_finite(f.flow, "flow");
  return f;
}

Preprocessed preprocess(const PointCloud& cloud, std::span<const Point3> flow, std::span<const std::uint8_t> mask,
                        const PreprocessOptions& opts) {
  if (opts.sample_n == 0) throw InvariantError("preprocess: sample_n must be at least 1");
  if (!flow.empty() && flow.size() != cloud.size()) throw InvariantError("preprocess: flow rows do not match cloud");
  if (!mask.empty() && mask.size() != cloud.size()) throw InvariantError("preprocess: mask rows do not match cloud");

  std::vector<std::size_t> keep;
  keep.reserve(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto& p = cloud.points[i];
    if (p[2] > opts.max_depth) continue;
    if (p[1] < opts.min_height) continue;
    keep.push_back(i);
  }
  if (keep.size() < opts.sample_n) {
    throw InvariantError("preprocess: " + std::to_string(keep.size()) + " points survive the filters, " +
                         std::to_string(opts.sample_n) + " requested");
  }
  // Fisher-Yates prefix of length sample_n.
  Rng rng(opts.seed);
  for (std::size_t i = 0; i < opts.sample_n; ++i) {
    const std::size_t j = i + uniform_index(rng, keep.size() - i);
    std::swap(keep[i], keep[j]);
  }
  keep.resize(opts.sample_n);

  Preprocessed out;
  out.source = keep;
  out.cloud.points.reserve(keep.size());
  for (auto i : keep) {
    out.cloud.points.push_back(cloud.points[i]);
    if (!flow.empty()) out.flow.push_back(flow[i]);
    if (!mask.empty()) out.mask.push_back(mask[i]);
  }
  return out;
}

ErrorBand classify_error(double epe) noexcept {
  if (epe < 0.05) return ErrorBand::kSmall;
  if (epe < 0.3) return ErrorBand::kMedium;
  return ErrorBand::kLarge;
}

std::array<std::uint8_t, 3> band_color(ErrorBand band) noexcept {
  switch (band) {
    case ErrorBand::kSmall: return {128, 128, 128};
    case ErrorBand::kMedium: return {255, 0, 0};
    case ErrorBand::kLarge: return {0, 0, 255};
  }
  return {0, 0, 0};
}

void export_error_ply(const ScenePair& scene, const FlowField& pred, const std::filesystem::path& path) {
  if (pred.size() != scene.P.size()) {
    throw InvariantError("export_error_ply: prediction has " + std::to_string(pred.size()) + " rows, P has " +
                         std::to_string(scene.P.size()));
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "ply\nformat ascii 1.0\nelement vertex " << scene.P.size()
      << "\nproperty float x\nproperty float y\nproperty float z\n"
         "property uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n";
  char line[160];
  for (std::size_t i = 0; i < scene.P.size(); ++i) {
    double sq = 0.0;
    for (int k = 0; k < 3; ++k) {
      const double d = pred.flow[i][k] - scene.gt_flow[i][k];
      sq += d * d;
    }
    const auto c = band_color(classify_error(std::sqrt(sq)));
    const auto& p = scene.P.points[i];
    std::snprintf(line, sizeof(line), "%.9g %.9g %.9g %u %u %u\n", p[0], p[1], p[2], unsigned{c[0]},
                  unsigned{c[1]}, unsigned{c[2]});
    out << line;
  }
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace sctn
