// Copyright Contributors to the sctn-flow project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>

#include "sctn/ot_matcher.hpp"
#include "sctn/params.hpp"
#include "sctn/pointcloud.hpp"
#include "sctn/sparse_unet.hpp"
#include "sctn/transformer.hpp"

namespace sctn {

struct ModelConfig {
  double voxel_size = 0.08;
  std::size_t devoxel_k = 3;
  UNetConfig unet;
  TransformerConfig transformer;
  OtConfig ot;
  RefineConfig refine;
};

// Also checks that the U-Net output width equals the transformer width.
void validate(const ModelConfig& cfg);

// Fresh weights for every block, seeded.
ParamSet init_model(const ModelConfig& cfg, std::uint64_t seed);

// Per-point features of one frame: voxelize, U-Net, devoxelize, transformer,
// fuse. n x C.
Tensor point_features(const ModelConfig& cfg, const ParamSet& params, const PointCloud& cloud);

struct MatchResult {
  Tensor cost;
  Tensor plan;
  Tensor flow;  // before refinement
};

MatchResult match_features(const OtConfig& ot, const Tensor& FP, const Tensor& FQ, const Tensor& P, const Tensor& Q);

struct ModelOutput {
  Tensor FP, FQ;
  MatchResult match;
  Tensor flow;  // refined
};

ModelOutput forward(const ModelConfig& cfg, const ParamSet& params, const PointCloud& P, const PointCloud& Q);

}  // namespace sctn
