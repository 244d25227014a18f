// Copyright Contributors to the sctn-flow project
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <cstring>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <string>

#include "sctn/pointcloud.hpp"
#include "sctn/synthetic.hpp"
#include "test_util.hpp"

namespace sctn {
namespace {

ScenePair tiny_scene() {
  ScenePair s;
  s.P.points = {{0.0, 0.0, 0.0}, {1.0, 2.0, 3.0}};
  s.Q.points = {{0.5, 0.0, 0.0}};
  s.gt_flow = {{0.5, 0.0, 0.0}, {0.0, 0.0, 0.0}};
  s.mask = {1, 0};
  s.meta.seed = 99;
  return s;
}

TEST(SceneIo, RoundTripHundredScenesByteIdentical) {
  const auto dir = testing::scratch_dir("roundtrip");
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    SceneConfig cfg;
    cfg.seed = seed;
    cfg.points_per_object = 24;
    cfg.noise_sigma = 0.01;
    const ScenePair s = generate_scene(cfg);
    const auto a = dir / "a.sfs";
    const auto b = dir / "b.sfs";
    save_scene(s, a);
    const ScenePair back = load_scene(a);
    ASSERT_EQ(back.P.points, s.P.points);
    ASSERT_EQ(back.Q.points, s.Q.points);
    ASSERT_EQ(back.gt_flow, s.gt_flow);
    ASSERT_EQ(back.mask, s.mask);
    ASSERT_EQ(back.meta.seed, seed);
    save_scene(back, b);
    ASSERT_EQ(testing::read_bytes(a), testing::read_bytes(b));
  }
}

TEST(SceneIo, LayoutMatchesFormat) {
  const auto dir = testing::scratch_dir("layout");
  save_scene(tiny_scene(), dir / "t.sfs");
  const auto bytes = testing::read_bytes(dir / "t.sfs");
  // magic + 2 u32 + f32 (6 + 3 + 6) + 2 mask + u64
  EXPECT_EQ(bytes.size(), 4u + 8u + 4u * 15u + 2u + 8u);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "SFS1");
  EXPECT_EQ(bytes[4], 2);
  EXPECT_EQ(bytes[8], 1);
}

TEST(SceneIo, WrongMagicNamesFile) {
  const auto dir = testing::scratch_dir("magic");
  const auto path = dir / "bad.sfs";
  save_scene(tiny_scene(), path);
  auto bytes = testing::read_bytes(path);
  bytes[0] = 'X';
  std::ofstream(path, std::ios::binary).write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  try {
    load_scene(path);
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("bad.sfs"), std::string::npos);
    EXPECT_EQ(e.path(), path.string());
  }
}

TEST(SceneIo, MaskLengthMismatchIsInvariantError) {
  const auto dir = testing::scratch_dir("mask");
  const auto path = dir / "m.sfs";
  save_scene(tiny_scene(), path);
  auto bytes = testing::read_bytes(path);
  bytes.insert(bytes.end() - 8, char{1});  // one extra mask byte
  std::ofstream(path, std::ios::binary).write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  EXPECT_THROW(load_scene(path), InvariantError);

  ScenePair s = tiny_scene();
  s.mask.push_back(1);
  EXPECT_THROW(save_scene(s, dir / "x.sfs"), InvariantError);
}

TEST(SceneIo, TruncatedPayloadIsFormatError) {
  const auto dir = testing::scratch_dir("trunc");
  const auto path = dir / "t.sfs";
  save_scene(tiny_scene(), path);
  auto bytes = testing::read_bytes(path);
  bytes.resize(20);
  std::ofstream(path, std::ios::binary).write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  EXPECT_THROW(load_scene(path), FormatError);
}

TEST(SceneIo, NonFiniteRejected) {
  ScenePair s = tiny_scene();
  s.P.points[1][2] = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(save_scene(s, testing::scratch_dir("nan") / "n.sfs"), NonFiniteError);

  // A NaN written behind the writer's back is caught on load.
  const auto dir = testing::scratch_dir("nan2");
  const auto path = dir / "n.sfs";
  save_scene(tiny_scene(), path);
  auto bytes = testing::read_bytes(path);
  const float nan = std::numeric_limits<float>::quiet_NaN();
  std::memcpy(bytes.data() + 12, &nan, 4);
  std::ofstream(path, std::ios::binary).write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  EXPECT_THROW(load_scene(path), FormatError);
}

TEST(FlowIo, RoundTrip) {
  const auto dir = testing::scratch_dir("flow");
  FlowField f;
  f.flow = {{0.25, -1.0, 3.5}, {0.0, 0.125, 2.0}};
  save_flow(f, dir / "f.sff");
  EXPECT_EQ(load_flow(dir / "f.sff").flow, f.flow);
  const auto bytes = testing::read_bytes(dir / "f.sff");
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "SFF1");
  EXPECT_EQ(bytes.size(), 8u + 24u);
}

TEST(Preprocess, DefaultsFollowDatasetProtocol) {
  PreprocessOptions o;
  EXPECT_EQ(o.sample_n, 8192u);
  EXPECT_DOUBLE_EQ(o.max_depth, 35.0);
  EXPECT_DOUBLE_EQ(o.min_height, -1.4);
}

TEST(Preprocess, FullSampleIsPermutation) {
  PointCloud c;
  for (int i = 0; i < 20; ++i) c.points.push_back({double(i), 0.0, 1.0});
  PreprocessOptions o;
  o.sample_n = 20;
  o.seed = 3;
  const auto r = preprocess(c, {}, {}, o);
  std::vector<std::size_t> src = r.source;
  std::sort(src.begin(), src.end());
  for (std::size_t i = 0; i < 20; ++i) EXPECT_EQ(src[i], i);
  for (std::size_t i = 0; i < 20; ++i) EXPECT_EQ(r.cloud.points[i], c.points[r.source[i]]);
  EXPECT_TRUE(r.flow.empty());
}

TEST(Preprocess, GroundFilterKeepsExactlySurvivors) {
  // 10 points, rows 1, 4, 6, 9 below the ground cut.
  PointCloud c;
  std::vector<Point3> flow;
  std::vector<std::uint8_t> mask;
  const std::set<int> ground = {1, 4, 6, 9};
  for (int i = 0; i < 10; ++i) {
    c.points.push_back({double(i), ground.count(i) ? -2.0 : 0.5, 5.0});
    flow.push_back({double(i) * 10.0, 0.0, 0.0});
    mask.push_back(static_cast<std::uint8_t>(i % 2));
  }
  PreprocessOptions o;
  o.sample_n = 6;
  o.seed = 11;
  const auto r = preprocess(c, flow, mask, o);
  std::vector<std::size_t> src = r.source;
  std::sort(src.begin(), src.end());
  EXPECT_EQ(src, (std::vector<std::size_t>{0, 2, 3, 5, 7, 8}));
  for (std::size_t i = 0; i < 6; ++i) {
    EXPECT_EQ(r.flow[i][0], 10.0 * c.points[r.source[i]][0]);
    EXPECT_EQ(r.mask[i], r.source[i] % 2);
  }
}

TEST(Preprocess, DepthFilterAndErrors) {
  PointCloud c;
  c.points = {{0, 0, 10}, {0, 0, 36}, {0, 0, 35}};
  PreprocessOptions o;
  o.sample_n = 2;
  auto r = preprocess(c, {}, {}, o);
  std::vector<std::size_t> src = r.source;
  std::sort(src.begin(), src.end());
  EXPECT_EQ(src, (std::vector<std::size_t>{0, 2}));

  o.sample_n = 3;
  try {
    preprocess(c, {}, {}, o);
    FAIL();
  } catch (const InvariantError& e) {
    EXPECT_NE(std::string(e.what()).find("2 points survive"), std::string::npos);
  }
  o.sample_n = 0;
  EXPECT_THROW(preprocess(c, {}, {}, o), InvariantError);
}

TEST(Preprocess, DeterministicAndSeedSensitive) {
  PointCloud c;
  for (int i = 0; i < 100; ++i) c.points.push_back({double(i), 0.0, 0.0});
  PreprocessOptions o;
  o.sample_n = 10;
  o.seed = 5;
  const auto a = preprocess(c, {}, {}, o);
  const auto b = preprocess(c, {}, {}, o);
  EXPECT_EQ(a.source, b.source);
  o.seed = 6;
  EXPECT_NE(preprocess(c, {}, {}, o).source, a.source);
}

std::vector<std::string> ply_body(const std::filesystem::path& path) {
  std::ifstream in(path);
  std::string line;
  while (std::getline(in, line) && line != "end_header") {
  }
  std::vector<std::string> rows;
  while (std::getline(in, line)) rows.push_back(line);
  return rows;
}

std::string color_of(const std::string& row) {
  std::istringstream ss(row);
  double x, y, z;
  int r, g, b;
  ss >> x >> y >> z >> r >> g >> b;
  return std::to_string(r) + "," + std::to_string(g) + "," + std::to_string(b);
}

TEST(ErrorPly, BandsAndColors) {
  ScenePair s;
  s.P.points = {{0, 0, 0}, {1, 0, 0}, {2, 0, 0}};
  s.Q.points = {{0, 0, 0}};
  s.gt_flow = {{0, 0, 0}, {0, 0, 0}, {0, 0, 0}};
  s.mask = {1, 1, 1};
  const auto dir = testing::scratch_dir("ply");

  FlowField pred;
  pred.flow = s.gt_flow;
  export_error_ply(s, pred, dir / "zero.ply");
  for (const auto& row : ply_body(dir / "zero.ply")) EXPECT_EQ(color_of(row), "128,128,128");

  pred.flow[1] = {0.10, 0.0, 0.0};
  pred.flow[2] = {0.0, 0.31, 0.0};
  export_error_ply(s, pred, dir / "err.ply");
  const auto rows = ply_body(dir / "err.ply");
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(color_of(rows[0]), "128,128,128");
  EXPECT_EQ(color_of(rows[1]), "255,0,0");
  EXPECT_EQ(color_of(rows[2]), "0,0,255");

  std::ifstream in(dir / "err.ply");
  std::string head((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  EXPECT_EQ(head.rfind("ply\nformat ascii 1.0\nelement vertex 3\n", 0), 0u);
  EXPECT_NE(head.find("property uchar red"), std::string::npos);

  pred.flow.pop_back();
  EXPECT_THROW(export_error_ply(s, pred, dir / "bad.ply"), InvariantError);
}

TEST(ErrorPly, ThresholdEdges) {
  EXPECT_EQ(classify_error(0.0499), ErrorBand::kSmall);
  EXPECT_EQ(classify_error(0.05), ErrorBand::kMedium);
  EXPECT_EQ(classify_error(0.2999), ErrorBand::kMedium);
  EXPECT_EQ(classify_error(0.3), ErrorBand::kLarge);
}

TEST(PointCloudTensor, RoundTrip) {
  PointCloud c;
  c.points = {{1, 2, 3}, {4, 5, 6}};
  const Tensor t = c.to_tensor();
  EXPECT_EQ(t.shape(), (Shape{2, 3}));
  EXPECT_EQ(PointCloud::from_tensor(t).points, c.points);
  EXPECT_THROW(PointCloud::from_tensor(Tensor::zeros({2, 2})), ShapeError);
}

}  // namespace
}  // namespace sctn
