// Copyright Contributors to the sctn-flow project
// SPDX-License-Identifier: Apache-2.0

#include "sctn/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <string>

#include "sctn/random.hpp"

namespace sctn {
namespace {

constexpr int kPlacementAttempts = 2000;

Point3 random_unit(Rng& rng) {
  for (;;) {
    Point3 v = {standard_normal(rng), standard_normal(rng), standard_normal(rng)};
    const double n = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
    if (n > 1e-9) return {v[0] / n, v[1] / n, v[2] / n};
  }
}

Point3 rotate(const Rotation& R, const Point3& p) noexcept {
  return {R[0] * p[0] + R[1] * p[1] + R[2] * p[2], R[3] * p[0] + R[4] * p[1] + R[5] * p[2],
          R[6] * p[0] + R[7] * p[1] + R[8] * p[2]};
}

double to_f32(double v) { return static_cast<double>(static_cast<float>(v)); }

std::vector<Point3> sample_shape(ObjectKind kind, double size, std::size_t n, Rng& rng) {
  std::vector<Point3> pts(n);
  switch (kind) {
    case ObjectKind::kBox: {
      const Point3 half = {0.5 * size * uniform(rng, 0.6, 1.0), 0.5 * size * uniform(rng, 0.6, 1.0),
                           0.5 * size * uniform(rng, 0.6, 1.0)};
      // Face pairs weighted by area: normal along x, y, z.
      const double ax = half[1] * half[2];
      const double ay = half[0] * half[2];
      const double az = half[0] * half[1];
      for (auto& p : pts) {
        const double u = uniform(rng, 0.0, ax + ay + az);
        const int axis = u < ax ? 0 : (u < ax + ay ? 1 : 2);
        const double side = uniform01(rng) < 0.5 ? -1.0 : 1.0;
        for (int k = 0; k < 3; ++k) p[k] = uniform(rng, -half[k], half[k]);
        p[axis] = side * half[axis];
      }
      break;
    }
    case ObjectKind::kSphere: {
      for (auto& p : pts) {
        const Point3 d = random_unit(rng);
        p = {0.5 * size * d[0], 0.5 * size * d[1], 0.5 * size * d[2]};
      }
      break;
    }
    case ObjectKind::kPlane: {
      for (auto& p : pts) p = {uniform(rng, -0.5, 0.5) * size, 0.0, uniform(rng, -0.5, 0.5) * size};
      break;
    }
  }
  const Rotation pose = axis_angle(random_unit(rng), uniform(rng, 0.0, std::numbers::pi));
  for (auto& p : pts) p = rotate(pose, p);
  return pts;
}

struct Box {
  Point3 lo;
  Point3 hi;
};

Box bounds(std::span<const Point3> a, std::span<const Point3> b) {
  Box box{{INFINITY, INFINITY, INFINITY}, {-INFINITY, -INFINITY, -INFINITY}};
  for (auto span : {a, b}) {
    for (const auto& p : span) {
      for (int k = 0; k < 3; ++k) {
        box.lo[k] = std::min(box.lo[k], p[k]);
        box.hi[k] = std::max(box.hi[k], p[k]);
      }
    }
  }
  return box;
}

bool separated(const Box& a, const Box& b, double gap) {
  for (int k = 0; k < 3; ++k) {
    if (a.hi[k] + gap <= b.lo[k] || b.hi[k] + gap <= a.lo[k]) return true;
  }
  return false;
}

}  // namespace

void validate(const SceneConfig& cfg) {
  auto range = [](double lo, double hi, const char* name) {
    if (!(lo >= 0.0) || !(hi >= lo)) throw ConfigError(std::string("scene: invalid range for ") + name);
  };
  range(cfg.size_min, cfg.size_max, "object size");
  range(cfg.translation_min, cfg.translation_max, "translation");
  range(cfg.rotation_min, cfg.rotation_max, "rotation");
  if (!(cfg.occlusion_fraction >= 0.0 && cfg.occlusion_fraction < 1.0)) {
    throw ConfigError("scene: occlusion fraction must lie in [0, 1)");
  }
  if (!(cfg.noise_sigma >= 0.0)) throw ConfigError("scene: noise sigma must be nonnegative");
  if (!(cfg.min_gap >= 0.0)) throw ConfigError("scene: min_gap must be nonnegative");
  if (cfg.kinds.empty()) throw ConfigError("scene: at least one object kind is required");
  for (int k = 0; k < 3; ++k) {
    if (cfg.region_max[k] < cfg.region_min[k]) throw ConfigError("scene: region_max below region_min");
  }
}

Rotation axis_angle(const Point3& axis, double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  const double t = 1.0 - c;
  const double x = axis[0];
  const double y = axis[1];
  const double z = axis[2];
  return {t * x * x + c,     t * x * y - s * z, t * x * z + s * y,  //
          t * x * y + s * z, t * y * y + c,     t * y * z - s * x,  //
          t * x * z - s * y, t * y * z + s * x, t * z * z + c};
}

Point3 rigid_flow(const Rotation& R, const Point3& t, const Point3& p) noexcept {
  const Point3 rp = rotate(R, p);
  return {rp[0] + t[0] - p[0], rp[1] + t[1] - p[1], rp[2] + t[2] - p[2]};
}

GeneratedScene generate_scene_detailed(const SceneConfig& cfg) {
  validate(cfg);
  const std::size_t n_points = cfg.n_objects * cfg.points_per_object;
  if (n_points == 0) throw InvariantError("generate_scene: configuration yields zero points");

  Rng rng(cfg.seed);
  GeneratedScene out;
  ScenePair& s = out.scene;
  s.meta.seed = cfg.seed;
  std::vector<Point3> moved;  // exact second-frame positions before noise
  std::vector<Box> placed;

  for (std::size_t o = 0; o < cfg.n_objects; ++o) {
    const ObjectKind kind = cfg.kinds[uniform_index(rng, cfg.kinds.size())];
    const double size = uniform(rng, cfg.size_min, cfg.size_max);
    const std::vector<Point3> local = sample_shape(kind, size, cfg.points_per_object, rng);
    const Rotation R = axis_angle(random_unit(rng), uniform(rng, cfg.rotation_min, cfg.rotation_max));
    const Point3 dir = random_unit(rng);
    const double mag = uniform(rng, cfg.translation_min, cfg.translation_max);
    const Point3 t = {dir[0] * mag, dir[1] * mag, dir[2] * mag};

    bool ok = false;
    std::vector<Point3> p_obj(local.size());
    std::vector<Point3> flow_obj(local.size());
    std::vector<Point3> m_obj(local.size());
    for (int attempt = 0; attempt < kPlacementAttempts && !ok; ++attempt) {
      Point3 c;
      for (int k = 0; k < 3; ++k) c[k] = uniform(rng, cfg.region_min[k], cfg.region_max[k]);
      for (std::size_t i = 0; i < local.size(); ++i) {
        Point3 p;
        for (int k = 0; k < 3; ++k) p[k] = to_f32(local[i][k] + c[k]);
        // Rotation about the centroid: flow = R d - d + t with d = p - c.
        const Point3 d = {p[0] - c[0], p[1] - c[1], p[2] - c[2]};
        const Point3 f = rigid_flow(R, t, d);
        p_obj[i] = p;
        for (int k = 0; k < 3; ++k) {
          flow_obj[i][k] = to_f32(f[k]);
          m_obj[i][k] = p[k] + f[k];
        }
      }
      const Box box = bounds(p_obj, m_obj);
      ok = std::all_of(placed.begin(), placed.end(), [&](const Box& b) { return separated(box, b, cfg.min_gap); });
      if (ok) placed.push_back(box);
    }
    if (!ok) throw InvariantError("generate_scene: could not place object " + std::to_string(o) + " without overlap");
    for (std::size_t i = 0; i < local.size(); ++i) {
      s.P.points.push_back(p_obj[i]);
      s.gt_flow.push_back(flow_obj[i]);
      moved.push_back(m_obj[i]);
      out.object_of_point.push_back(o);
    }
  }

  // Occluded rows lose their correspondent in Q.
  s.mask.assign(n_points, 1);
  const auto n_occ = static_cast<std::size_t>(std::llround(cfg.occlusion_fraction * static_cast<double>(n_points)));
  std::vector<std::size_t> order(n_points);
  for (std::size_t i = 0; i < n_points; ++i) order[i] = i;
  for (std::size_t i = 0; i < n_occ; ++i) {
    const std::size_t j = i + uniform_index(rng, n_points - i);
    std::swap(order[i], order[j]);
    s.mask[order[i]] = 0;
  }
  if (n_occ >= n_points) throw InvariantError("generate_scene: occlusion removes every point");

  for (std::size_t i = 0; i < n_points; ++i) {
    if (s.mask[i] == 0) continue;
    Point3 q;
    for (int k = 0; k < 3; ++k) {
      const double noise = cfg.noise_sigma > 0.0 ? cfg.noise_sigma * standard_normal(rng) : 0.0;
      q[k] = to_f32(moved[i][k] + noise);
    }
    s.Q.points.push_back(q);
    out.q_source.push_back(i);
  }
  for (std::size_t i = s.Q.size(); i > 1; --i) {
    const std::size_t j = uniform_index(rng, i);
    std::swap(s.Q.points[i - 1], s.Q.points[j]);
    std::swap(out.q_source[i - 1], out.q_source[j]);
  }
  return out;
}

ScenePair generate_scene(const SceneConfig& cfg) { return generate_scene_detailed(cfg).scene; }

std::filesystem::path generate_dataset(const SceneConfig& cfg, std::size_t count, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  std::string manifest;
  for (std::size_t i = 0; i < count; ++i) {
    SceneConfig c = cfg;
    c.seed = cfg.seed + i;
    char name[32];
    std::snprintf(name, sizeof(name), "scene_%05zu.sfs", i);
    save_scene(generate_scene(c), dir / name);
    manifest += name;
    manifest += '\n';
  }
  const auto path = dir / "manifest.txt";
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << manifest;
  return path;
}

std::vector<std::filesystem::path> read_manifest(const std::filesystem::path& manifest) {
  std::ifstream in(manifest);
  if (!in) throw IoError("cannot open manifest " + manifest.string());
  std::vector<std::filesystem::path> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    out.push_back(manifest.parent_path() / line);
  }
  return out;
}

}  // namespace sctn
