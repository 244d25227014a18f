// Copyright Contributors to the sctn-flow project
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <numbers>
#include <set>

#include "sctn/synthetic.hpp"
#include "test_util.hpp"

namespace sctn {
namespace {

double dist(const Point3& a, const Point3& b) {
  return std::sqrt((a[0] - b[0]) * (a[0] - b[0]) + (a[1] - b[1]) * (a[1] - b[1]) + (a[2] - b[2]) * (a[2] - b[2]));
}

TEST(RigidFlow, QuarterTurnAboutZ) {
  const Rotation R = axis_angle({0, 0, 1}, std::numbers::pi / 2);
  const Point3 f = rigid_flow(R, {0, 0, 0}, {1, 0, 0});
  EXPECT_NEAR(f[0], -1.0, 1e-15);
  EXPECT_NEAR(f[1], 1.0, 1e-15);
  EXPECT_NEAR(f[2], 0.0, 1e-15);
}

TEST(RigidFlow, PureTranslation) {
  const Rotation I = axis_angle({0, 0, 1}, 0.0);
  for (const Point3 p : {Point3{0.3, -2.0, 7.5}, Point3{0, 0, 0}, Point3{-10.0, 4, 0.1}}) {
    const Point3 f = rigid_flow(I, {0.1, 0, 0}, p);
    EXPECT_NEAR(f[0], 0.1, 1e-14);
    EXPECT_EQ(f[1], 0.0);
    EXPECT_EQ(f[2], 0.0);
  }
}

TEST(Generate, IdentityTransformsGiveZeroFlow) {
  SceneConfig cfg;
  cfg.translation_max = 0.0;
  cfg.rotation_max = 0.0;
  cfg.occlusion_fraction = 0.0;
  cfg.n_objects = 3;
  cfg.seed = 7;
  const auto g = generate_scene_detailed(cfg);
  for (const auto& f : g.scene.gt_flow) EXPECT_EQ(f, (Point3{0, 0, 0}));
  for (auto m : g.scene.mask) EXPECT_EQ(m, 1);
  ASSERT_EQ(g.scene.Q.size(), g.scene.P.size());
  for (std::size_t j = 0; j < g.scene.Q.size(); ++j) EXPECT_EQ(g.scene.Q.points[j], g.scene.P.points[g.q_source[j]]);
}

TEST(Generate, SingleObjectTranslationOnly) {
  SceneConfig cfg;
  cfg.n_objects = 1;
  cfg.translation_min = cfg.translation_max = 0.1;
  cfg.rotation_max = 0.0;
  cfg.seed = 21;
  const auto s = generate_scene(cfg);
  const Point3 first = s.gt_flow[0];
  EXPECT_NEAR(std::sqrt(first[0] * first[0] + first[1] * first[1] + first[2] * first[2]), 0.1, 1e-7);
  for (const auto& f : s.gt_flow) EXPECT_EQ(f, first);
}

TEST(Generate, DistancesPreservedWithinObjects) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    SceneConfig cfg;
    cfg.seed = seed;
    cfg.rotation_max = 0.5;
    cfg.n_objects = 3;
    cfg.points_per_object = 40;
    const auto g = generate_scene_detailed(cfg);
    const auto& P = g.scene.P.points;
    double worst = 0.0;
    for (std::size_t i = 0; i < P.size(); ++i) {
      for (std::size_t j = i + 1; j < P.size(); ++j) {
        if (g.object_of_point[i] != g.object_of_point[j]) continue;
        Point3 a, b;
        for (int k = 0; k < 3; ++k) {
          a[k] = P[i][k] + g.scene.gt_flow[i][k];
          b[k] = P[j][k] + g.scene.gt_flow[j][k];
        }
        worst = std::max(worst, std::abs(dist(a, b) - dist(P[i], P[j])));
      }
    }
    EXPECT_LT(worst, 1e-6) << "seed " << seed;
  }
}

TEST(Generate, MaskMarksExactlyDeletedCorrespondents) {
  SceneConfig cfg;
  cfg.occlusion_fraction = 0.2;
  cfg.seed = 5;
  const auto g = generate_scene_detailed(cfg);
  const auto& s = g.scene;
  const std::size_t n = s.P.size();
  EXPECT_EQ(s.Q.size(), n - static_cast<std::size_t>(std::llround(0.2 * double(n))));
  std::set<std::size_t> present(g.q_source.begin(), g.q_source.end());
  EXPECT_EQ(present.size(), s.Q.size());
  for (std::size_t i = 0; i < n; ++i) EXPECT_EQ(s.mask[i] == 1, present.count(i) == 1) << i;
  // Q rows are the moved points (noise is zero).
  for (std::size_t j = 0; j < s.Q.size(); ++j) {
    const auto i = g.q_source[j];
    for (int k = 0; k < 3; ++k) EXPECT_NEAR(s.Q.points[j][k], s.P.points[i][k] + s.gt_flow[i][k], 1e-6);
  }
}

TEST(Generate, DeterministicAndSeeded) {
  SceneConfig cfg;
  cfg.seed = 42;
  cfg.noise_sigma = 0.02;
  const auto a = generate_scene(cfg);
  const auto b = generate_scene(cfg);
  EXPECT_EQ(a.P.points, b.P.points);
  EXPECT_EQ(a.Q.points, b.Q.points);
  EXPECT_EQ(a.mask, b.mask);
  cfg.seed = 43;
  EXPECT_NE(generate_scene(cfg).P.points, a.P.points);
}

TEST(Generate, ObjectsKeepClearance) {
  SceneConfig cfg;
  cfg.n_objects = 4;
  cfg.seed = 1;
  const auto g = generate_scene_detailed(cfg);
  const auto& P = g.scene.P.points;
  double closest = INFINITY;
  for (std::size_t i = 0; i < P.size(); ++i) {
    for (std::size_t j = 0; j < P.size(); ++j) {
      if (g.object_of_point[i] != g.object_of_point[j]) closest = std::min(closest, dist(P[i], P[j]));
    }
  }
  EXPECT_GE(closest, cfg.min_gap - 1e-6);
}

TEST(Generate, Errors) {
  SceneConfig cfg;
  cfg.n_objects = 0;
  EXPECT_THROW(generate_scene(cfg), InvariantError);
  cfg = {};
  cfg.occlusion_fraction = 1.0;
  EXPECT_THROW(generate_scene(cfg), ConfigError);
  cfg = {};
  cfg.translation_min = -0.1;
  EXPECT_THROW(generate_scene(cfg), ConfigError);
  cfg = {};
  cfg.n_objects = 40;
  cfg.size_min = cfg.size_max = 1.0;
  EXPECT_THROW(generate_scene(cfg), InvariantError);
}

TEST(Dataset, EmptyManifest) {
  const auto dir = testing::scratch_dir("ds0");
  const auto m = generate_dataset(SceneConfig{}, 0, dir);
  EXPECT_TRUE(std::filesystem::exists(m));
  EXPECT_EQ(std::filesystem::file_size(m), 0u);
  EXPECT_TRUE(read_manifest(m).empty());
}

TEST(Dataset, FiveScenesInOrderAndReproducible) {
  SceneConfig cfg;
  cfg.seed = 100;
  cfg.points_per_object = 32;
  const auto d1 = testing::scratch_dir("ds5a");
  const auto d2 = testing::scratch_dir("ds5b");
  const auto files = read_manifest(generate_dataset(cfg, 5, d1));
  const auto again = read_manifest(generate_dataset(cfg, 5, d2));
  ASSERT_EQ(files.size(), 5u);
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_EQ(load_scene(files[i]).meta.seed, 100 + i);
    EXPECT_EQ(testing::read_bytes(files[i]), testing::read_bytes(again[i]));
  }
  std::ifstream in(d1 / "manifest.txt");
  std::string first;
  std::getline(in, first);
  EXPECT_EQ(first, "scene_00000.sfs");
}

}  // namespace
}  // namespace sctn
