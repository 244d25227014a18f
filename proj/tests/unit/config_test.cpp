// Copyright Contributors to the sctn-flow project
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <fstream>

#include "sctn/config.hpp"
#include "test_util.hpp"

namespace sctn {
namespace {

TEST(Config, DefaultsRoundTrip) {
  const RunConfig d;
  const std::string text = to_json(d);
  EXPECT_EQ(to_json(apply_json(d, text)), text);
  EXPECT_NE(text.find("\"epsilon\": 0.03"), std::string::npos);
  EXPECT_NE(text.find("\"voxel_size\": 0.08"), std::string::npos);
  EXPECT_NO_THROW(validate(d));
}

TEST(Config, PartialDocumentOverlaysDefaults) {
  const RunConfig c = apply_json(RunConfig{}, R"({"ot": {"iters": 80}, "scene": {"kinds": ["box"]}})");
  EXPECT_EQ(c.model.ot.iters, 80u);
  EXPECT_EQ(c.model.ot.epsilon, 0.03);
  ASSERT_EQ(c.scene.kinds.size(), 1u);
  EXPECT_EQ(c.scene.kinds[0], ObjectKind::kBox);
}

TEST(Config, UnknownKeysAndBadTypesRejected) {
  try {
    apply_json(RunConfig{}, R"({"ot": {"epsilonn": 0.1}})");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("ot.epsilonn"), std::string::npos);
  }
  EXPECT_THROW(apply_json(RunConfig{}, R"({"bogus": 1})"), ConfigError);
  EXPECT_THROW(apply_json(RunConfig{}, R"({"ot": {"iters": -3}})"), ConfigError);
  EXPECT_THROW(apply_json(RunConfig{}, R"({"ot": {"iters": "many"}})"), ConfigError);
  EXPECT_THROW(apply_json(RunConfig{}, R"({"train": {"stop_similarity": 1}})"), ConfigError);
  EXPECT_THROW(apply_json(RunConfig{}, R"({"unet": {"channels": [8, 16]}})"), ConfigError);
  EXPECT_THROW(apply_json(RunConfig{}, R"({"scene": {"kinds": ["cone"]}})"), ConfigError);
  EXPECT_THROW(apply_json(RunConfig{}, "{not json"), ConfigError);
}

TEST(Config, IntegersAcceptedForReals) {
  const RunConfig c = apply_json(RunConfig{}, R"({"fsc": {"epsilon_g": 20}})");
  EXPECT_EQ(c.fsc.epsilon_g, 20.0);
  EXPECT_NE(to_json(c).find("\"epsilon_g\": 20"), std::string::npos);
}

TEST(Config, DottedOverrides) {
  RunConfig c = apply_override(RunConfig{}, "ot.epsilon=0.01");
  EXPECT_EQ(c.model.ot.epsilon, 0.01);
  EXPECT_NE(to_json(c).find("\"epsilon\": 0.01"), std::string::npos);
  c = apply_override(c, "unet.channels=[16,32,64]");
  EXPECT_EQ(c.model.unet.channels[2], 64u);
  c = apply_override(c, "train.stop_similarity=false");
  EXPECT_FALSE(c.train.stop_similarity);
  EXPECT_THROW(apply_override(c, "ot.nope=1"), ConfigError);
  EXPECT_THROW(apply_override(c, "ot.epsilon"), ConfigError);
  EXPECT_THROW(apply_override(c, "ot..epsilon=1"), ConfigError);
  EXPECT_THROW(apply_override(c, "ot=1"), ConfigError);
}

TEST(Config, LoadFileThenOverridesThenValidate) {
  const auto dir = testing::scratch_dir("config");
  {
    std::ofstream(dir / "c.json") << R"({"train": {"epochs_stage1": 3, "epochs_stage2": 1}})";
  }
  const RunConfig c = load_run_config(dir / "c.json", {"train.epochs_stage2=2"});
  EXPECT_EQ(c.train.epochs_stage1, 3u);
  EXPECT_EQ(c.train.epochs_stage2, 2u);
  EXPECT_THROW(load_run_config(dir / "c.json", {"ot.epsilon=0"}), ConfigError);
  EXPECT_THROW(load_run_config(dir / "missing.json", {}), ConfigError);
  EXPECT_THROW(load_run_config({}, {"transformer.channels=16"}), ConfigError);
}

}  // namespace
}  // namespace sctn
