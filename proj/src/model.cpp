// Copyright Contributors to the sctn-flow project
// SPDX-License-Identifier: Apache-2.0

#include "sctn/model.hpp"

#include <string>

#include "sctn/voxel_grid.hpp"

namespace sctn {

void validate(const ModelConfig& cfg) {
  if (!(cfg.voxel_size > 0.0)) throw ConfigError("model: voxel_size must be positive");
  if (cfg.devoxel_k == 0 || cfg.devoxel_k > 64) throw ConfigError("model: devoxel_k must be in [1, 64]");
  validate(cfg.unet);
  validate(cfg.transformer);
  validate(cfg.ot);
  validate(cfg.refine);
  if (cfg.unet.channels.empty() || cfg.unet.channels.front() != cfg.transformer.channels) {
    throw ConfigError("model: unet.channels[0] must equal transformer.channels");
  }
}

ParamSet init_model(const ModelConfig& cfg, std::uint64_t seed) {
  validate(cfg);
  ParamSet params;
  // Separate streams keep each block's init independent of the others' sizes.
  Rng unet_rng(seed);
  Rng tf_rng(seed ^ 0x7472616e73666f72ull);
  Rng refine_rng(seed ^ 0x726566696e650000ull);
  init_unet(cfg.unet, params, unet_rng);
  init_transformer(cfg.transformer, params, tf_rng);
  init_refine(cfg.refine, cfg.transformer.channels, params, refine_rng);
  return params;
}

Tensor point_features(const ModelConfig& cfg, const ParamSet& params, const PointCloud& cloud) {
  if (cloud.size() == 0) throw InvariantError("model: empty point cloud");
  if (cloud.size() > cfg.transformer.max_points) {
    throw InvariantError("model: " + std::to_string(cloud.size()) + " points exceed transformer.max_points = " +
                         std::to_string(cfg.transformer.max_points));
  }
  const VoxelGrid grid = voxelize(cloud, cfg.voxel_size);
  const UNetPlan plan = plan_unet(cfg.unet, grid);
  const Tensor voxel_features = unet_forward(cfg.unet, params, plan, initial_voxel_features(grid, cloud));
  const Tensor FS = devoxelize(devoxel_weights(grid, cloud.points, cfg.devoxel_k), voxel_features);
  return transformer_forward(params, FS, cloud.to_tensor());
}

MatchResult match_features(const OtConfig& ot, const Tensor& FP, const Tensor& FQ, const Tensor& P, const Tensor& Q) {
  MatchResult r;
  r.cost = correlation_matrix(FP, FQ);
  r.plan = sinkhorn(r.cost, ot.epsilon, ot.iters);
  r.flow = extract_flow(r.plan, P, Q);
  return r;
}

ModelOutput forward(const ModelConfig& cfg, const ParamSet& params, const PointCloud& P, const PointCloud& Q) {
  ModelOutput out;
  out.FP = point_features(cfg, params, P);
  out.FQ = point_features(cfg, params, Q);
  const Tensor Pt = P.to_tensor();
  out.match = match_features(cfg.ot, out.FP, out.FQ, Pt, Q.to_tensor());
  out.flow = refine_flow(params, cfg.refine, out.match.flow, out.FP, Pt);
  return out;
}

}  // namespace sctn
