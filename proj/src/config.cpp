// Copyright Contributors to the sctn-flow project
// SPDX-License-Identifier: Apache-2.0

#include "sctn/config.hpp"

#include <array>
#include <fstream>
#include <iterator>

#include "json.hpp"

namespace sctn {

using nlohmann::json;

namespace {

const char* kind_name(ObjectKind k) {
  switch (k) {
    case ObjectKind::kBox: return "box";
    case ObjectKind::kSphere: return "sphere";
    case ObjectKind::kPlane: return "plane";
  }
  return "box";
}

ObjectKind kind_from(const std::string& s) {
  if (s == "box") return ObjectKind::kBox;
  if (s == "sphere") return ObjectKind::kSphere;
  if (s == "plane") return ObjectKind::kPlane;
  throw ConfigError("scene.kinds: unknown object kind \"" + s + "\"");
}

json encode(const RunConfig& c) {
  json j;
  auto& s = j["scene"];
  s["n_objects"] = c.scene.n_objects;
  s["points_per_object"] = c.scene.points_per_object;
  s["kinds"] = json::array();
  for (auto k : c.scene.kinds) s["kinds"].push_back(kind_name(k));
  s["size_min"] = c.scene.size_min;
  s["size_max"] = c.scene.size_max;
  s["translation_min"] = c.scene.translation_min;
  s["translation_max"] = c.scene.translation_max;
  s["rotation_min"] = c.scene.rotation_min;
  s["rotation_max"] = c.scene.rotation_max;
  s["occlusion_fraction"] = c.scene.occlusion_fraction;
  s["noise_sigma"] = c.scene.noise_sigma;
  s["region_min"] = c.scene.region_min;
  s["region_max"] = c.scene.region_max;
  s["min_gap"] = c.scene.min_gap;
  s["seed"] = c.scene.seed;
  j["dataset"]["count"] = c.dataset_count;

  j["model"]["voxel_size"] = c.model.voxel_size;
  j["model"]["devoxel_k"] = c.model.devoxel_k;
  j["unet"]["in_channels"] = c.model.unet.in_channels;
  j["unet"]["channels"] = c.model.unet.channels;
  j["unet"]["convs_per_level"] = c.model.unet.convs_per_level;
  j["transformer"]["channels"] = c.model.transformer.channels;
  j["transformer"]["attn_dim"] = c.model.transformer.attn_dim;
  j["transformer"]["max_points"] = c.model.transformer.max_points;
  j["ot"]["epsilon"] = c.model.ot.epsilon;
  j["ot"]["iters"] = c.model.ot.iters;
  j["refine"]["hidden"] = c.model.refine.hidden;
  j["refine"]["k_neighbors"] = c.model.refine.k_neighbors;

  j["fsc"]["tau"] = c.fsc.tau;
  j["fsc"]["epsilon_g"] = c.fsc.epsilon_g;
  j["fsc"]["k_neighbors"] = c.fsc.k_neighbors;
  j["fsc"]["lambda"] = c.fsc.lambda;

  auto& t = j["train"];
  t["lr_initial"] = c.train.lr_initial;
  t["lr_drop_to"] = c.train.lr_drop_to;
  t["drop_at_fraction"] = c.train.drop_at_fraction;
  t["epochs_stage1"] = c.train.epochs_stage1;
  t["epochs_stage2"] = c.train.epochs_stage2;
  t["batch"] = c.train.batch;
  t["seed"] = c.train.seed;
  t["beta1"] = c.train.beta1;
  t["beta2"] = c.train.beta2;
  t["adam_eps"] = c.train.adam_eps;
  t["clip_norm"] = c.train.clip_norm;
  t["stop_similarity"] = c.train.stop_similarity;
  t["augment"] = c.train.augment;
  t["augment_yaw"] = c.train.augment_yaw;
  t["augment_shift"] = c.train.augment_shift;
  return j;
}

template <typename T>
T get(const json& j, const char* section, const char* key) {
  try {
    return j.at(section).at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string(section) + "." + key + ": " + e.what());
  }
}

RunConfig decode(const json& j) {
  RunConfig c;
  auto& s = c.scene;
  s.n_objects = get<std::size_t>(j, "scene", "n_objects");
  s.points_per_object = get<std::size_t>(j, "scene", "points_per_object");
  s.kinds.clear();
  for (const auto& k : get<std::vector<std::string>>(j, "scene", "kinds")) s.kinds.push_back(kind_from(k));
  s.size_min = get<double>(j, "scene", "size_min");
  s.size_max = get<double>(j, "scene", "size_max");
  s.translation_min = get<double>(j, "scene", "translation_min");
  s.translation_max = get<double>(j, "scene", "translation_max");
  s.rotation_min = get<double>(j, "scene", "rotation_min");
  s.rotation_max = get<double>(j, "scene", "rotation_max");
  s.occlusion_fraction = get<double>(j, "scene", "occlusion_fraction");
  s.noise_sigma = get<double>(j, "scene", "noise_sigma");
  s.region_min = get<Point3>(j, "scene", "region_min");
  s.region_max = get<Point3>(j, "scene", "region_max");
  s.min_gap = get<double>(j, "scene", "min_gap");
  s.seed = get<std::uint64_t>(j, "scene", "seed");
  c.dataset_count = get<std::size_t>(j, "dataset", "count");

  auto& m = c.model;
  m.voxel_size = get<double>(j, "model", "voxel_size");
  m.devoxel_k = get<std::size_t>(j, "model", "devoxel_k");
  m.unet.in_channels = get<std::size_t>(j, "unet", "in_channels");
  m.unet.channels = get<std::array<std::size_t, 3>>(j, "unet", "channels");
  m.unet.convs_per_level = get<std::size_t>(j, "unet", "convs_per_level");
  m.transformer.channels = get<std::size_t>(j, "transformer", "channels");
  m.transformer.attn_dim = get<std::size_t>(j, "transformer", "attn_dim");
  m.transformer.max_points = get<std::size_t>(j, "transformer", "max_points");
  m.ot.epsilon = get<double>(j, "ot", "epsilon");
  m.ot.iters = get<std::size_t>(j, "ot", "iters");
  m.refine.hidden = get<std::size_t>(j, "refine", "hidden");
  m.refine.k_neighbors = get<std::size_t>(j, "refine", "k_neighbors");

  c.fsc.tau = get<double>(j, "fsc", "tau");
  c.fsc.epsilon_g = get<double>(j, "fsc", "epsilon_g");
  c.fsc.k_neighbors = get<std::size_t>(j, "fsc", "k_neighbors");
  c.fsc.lambda = get<double>(j, "fsc", "lambda");

  auto& t = c.train;
  t.lr_initial = get<double>(j, "train", "lr_initial");
  t.lr_drop_to = get<double>(j, "train", "lr_drop_to");
  t.drop_at_fraction = get<double>(j, "train", "drop_at_fraction");
  t.epochs_stage1 = get<std::size_t>(j, "train", "epochs_stage1");
  t.epochs_stage2 = get<std::size_t>(j, "train", "epochs_stage2");
  t.batch = get<std::size_t>(j, "train", "batch");
  t.seed = get<std::uint64_t>(j, "train", "seed");
  t.beta1 = get<double>(j, "train", "beta1");
  t.beta2 = get<double>(j, "train", "beta2");
  t.adam_eps = get<double>(j, "train", "adam_eps");
  t.clip_norm = get<double>(j, "train", "clip_norm");
  t.stop_similarity = get<bool>(j, "train", "stop_similarity");
  t.augment = get<bool>(j, "train", "augment");
  t.augment_yaw = get<double>(j, "train", "augment_yaw");
  t.augment_shift = get<double>(j, "train", "augment_shift");
  return c;
}

bool is_number(const json& v) { return v.is_number(); }

// Integers may stand in for reals, and non-negative integers for unsigned
// counts; otherwise the JSON type must be unchanged.
void check_type(const json& schema, const json& value, const std::string& key) {
  if (schema.is_number_float() && is_number(value)) return;
  if (schema.is_number_unsigned() || schema.is_number_integer()) {
    if (value.is_number_unsigned() || (value.is_number_integer() && value.get<std::int64_t>() >= 0)) return;
    throw ConfigError(key + ": expected a non-negative integer, got " + value.dump());
  }
  if (schema.type() != value.type()) {
    throw ConfigError(key + ": expected " + std::string(schema.type_name()) + ", got " + value.dump());
  }
}

void merge(json& target, const json& patch, const std::string& prefix) {
  if (!patch.is_object()) throw ConfigError((prefix.empty() ? std::string("config") : prefix) + ": expected an object");
  for (const auto& [key, value] : patch.items()) {
    const std::string dotted = prefix.empty() ? key : prefix + "." + key;
    if (!target.contains(key)) throw ConfigError("unknown config key \"" + dotted + "\"");
    json& slot = target[key];
    if (slot.is_object()) {
      merge(slot, value, dotted);
    } else {
      check_type(slot, value, dotted);
      if (slot.is_array() && !slot.empty()) {
        for (const auto& item : value) check_type(slot.front(), item, dotted + "[]");
      }
      slot = value;
    }
  }
}

}  // namespace

void validate(const RunConfig& cfg) {
  validate(cfg.scene);
  validate(cfg.model);
  validate(cfg.fsc);
  validate(cfg.train);
}

std::string to_json(const RunConfig& cfg) { return encode(cfg).dump(2) + "\n"; }

RunConfig apply_json(const RunConfig& base, std::string_view json_text) {
  json patch;
  try {
    patch = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  json j = encode(base);
  merge(j, patch, "");
  return decode(j);
}

RunConfig apply_override(const RunConfig& base, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw ConfigError("override \"" + std::string(assignment) + "\" is not key=value");
  }
  const std::string key(assignment.substr(0, eq));
  const std::string text(assignment.substr(eq + 1));
  json value;
  try {
    value = json::parse(text);
  } catch (const json::parse_error&) {
    value = text;
  }
  // Rebuild the dotted path as a nested patch.
  json patch = value;
  std::size_t end = key.size();
  while (true) {
    const auto dot = key.rfind('.', end - 1);
    const std::string part = key.substr(dot == std::string::npos ? 0 : dot + 1,
                                        end - (dot == std::string::npos ? 0 : dot + 1));
    if (part.empty()) throw ConfigError("override key \"" + key + "\" has an empty component");
    json wrapped;
    wrapped[part] = std::move(patch);
    patch = std::move(wrapped);
    if (dot == std::string::npos) break;
    end = dot;
  }
  json j = encode(base);
  merge(j, patch, "");
  return decode(j);
}

RunConfig load_run_config(const std::filesystem::path& file, const std::vector<std::string>& overrides) {
  RunConfig cfg;
  if (!file.empty()) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw ConfigError("cannot read config " + file.string());
    const std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    cfg = apply_json(cfg, text);
  }
  for (const auto& o : overrides) cfg = apply_override(cfg, o);
  validate(cfg);
  return cfg;
}

}  // namespace sctn
