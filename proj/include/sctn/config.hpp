// Copyright Contributors to the sctn-flow project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "sctn/losses.hpp"
#include "sctn/model.hpp"
#include "sctn/synthetic.hpp"
#include "sctn/trainer.hpp"

namespace sctn {

struct RunConfig {
  SceneConfig scene;
  std::size_t dataset_count = 64;
  ModelConfig model;
  FscConfig fsc;
  TrainConfig train;
};

// Throws ConfigError on any invalid section.
void validate(const RunConfig& cfg);

// Canonical JSON: every key, sorted, two-space indent, trailing newline.
std::string to_json(const RunConfig& cfg);

// Overlays a JSON document onto `base`. Keys must already exist in the
// canonical form and values must keep their JSON type; anything else is a
// ConfigError naming the dotted key.
RunConfig apply_json(const RunConfig& base, std::string_view json_text);

// One "a.b=value" override. The value is parsed as JSON, falling back to a
// plain string.
RunConfig apply_override(const RunConfig& base, std::string_view assignment);

// Defaults, then the file (if given), then overrides in order; validated.
RunConfig load_run_config(const std::filesystem::path& file, const std::vector<std::string>& overrides);

}  // namespace sctn
