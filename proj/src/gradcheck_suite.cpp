// Copyright Contributors to the sctn-flow project
// SPDX-License-Identifier: Apache-2.0

#include "sctn/gradcheck_suite.hpp"

#include <chrono>
#include <functional>

#include "sctn/gradcheck.hpp"
#include "sctn/losses.hpp"
#include "sctn/model.hpp"
#include "sctn/voxel_grid.hpp"

namespace sctn {

namespace {

Tensor rand_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  std::vector<double> v(n);
  for (auto& x : v) x = uniform(rng, lo, hi);
  return Tensor(std::move(shape), std::move(v));
}

PointCloud rand_cloud(std::size_t n, Rng& rng, double extent) {
  PointCloud c;
  for (std::size_t i = 0; i < n; ++i) c.points.push_back({uniform(rng, 0, extent), uniform(rng, 0, extent), uniform(rng, 0, extent)});
  return c;
}

// Weighted sum so every output coordinate matters.
Tensor probe(const Tensor& y, const Tensor& mix) { return ops::sum(ops::mul(y, mix)); }

// Rebuilds `params` with the listed names taken from t[offset...].
ParamSet with(const ParamSet& base, const std::vector<std::string>& names, std::span<const Tensor> t,
              std::size_t offset) {
  ParamSet p = base;
  for (std::size_t k = 0; k < names.size(); ++k) p.set(names[k], t[offset + k]);
  return p;
}

void randomize_biases(ParamSet& params, Rng& rng) {
  for (const auto& name : params.names()) {
    if (name.size() > 2 && name.compare(name.size() - 2, 2, ".b") == 0) {
      params.set(name, rand_tensor(params.get(name).shape(), rng, -0.3, 0.3));
    }
  }
}

}  // namespace

std::vector<GradCheckResult> run_gradcheck_suite(std::uint64_t seed, double tolerance) {
  std::vector<GradCheckResult> out;
  auto run = [&](const std::string& name, const ScalarFn& f, std::vector<Tensor> inputs, GradCheckOptions opts = {}) {
    const auto t0 = std::chrono::steady_clock::now();
    const double err = grad_check(f, inputs, opts);
    const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out.push_back({name, err, tolerance, dt});
  };
  Rng rng(seed);

  {
    const PointCloud cloud = rand_cloud(16, rng, 0.6);
    const VoxelGrid grid = voxelize(cloud, 0.2);
    const DevoxelWeights w = devoxel_weights(grid, cloud.points, 3);
    const Tensor mix = rand_tensor({16, 5}, rng);
    run("devoxelize", [&](std::span<const Tensor> t) { return probe(devoxelize(w, t[0]), mix); },
        {rand_tensor({grid.size(), 5}, rng)});
  }

  {
    UNetConfig cfg;
    cfg.channels = {3, 4, 5};
    cfg.convs_per_level = 1;
    ParamSet params;
    init_unet(cfg, params, rng);
    // Zero biases put pre-activations of all-zero inputs exactly on the relu
    // kink, where central differences see half the slope.
    randomize_biases(params, rng);
    const PointCloud cloud = rand_cloud(16, rng, 0.5);
    const VoxelGrid grid = voxelize(cloud, 0.1);
    const UNetPlan plan = plan_unet(cfg, grid);
    const Tensor x0 = initial_voxel_features(grid, cloud);
    const Tensor mix = rand_tensor({grid.size(), 3}, rng);
    const std::vector<std::string> names = {"unet.enc0.conv0.w", "unet.down1.w", "unet.enc2.conv0.b", "unet.up0.w",
                                            "unet.dec0.conv0.w"};
    std::vector<Tensor> in = {x0};
    for (const auto& n : names) in.push_back(params.get(n));
    GradCheckOptions opts;
    opts.max_coords = 40;
    opts.seed = seed;
    run("sparse_unet",
        [&](std::span<const Tensor> t) { return probe(unet_forward(cfg, with(params, names, t, 1), plan, t[0]), mix); },
        in, opts);
  }

  {
    TransformerConfig cfg;
    cfg.channels = 6;
    cfg.attn_dim = 4;
    ParamSet params;
    init_transformer(cfg, params, rng);
    const Tensor pts = rand_tensor({10, 3}, rng);
    const Tensor mix = rand_tensor({10, 6}, rng);
    const std::vector<std::string> names = {"tf.phi0.w", "tf.phi1.b", "tf.wq", "tf.wk", "tf.wv"};
    std::vector<Tensor> in = {rand_tensor({10, 6}, rng)};
    for (const auto& n : names) in.push_back(params.get(n));
    run("attention_aggregate",
        [&](std::span<const Tensor> t) {
          const ParamSet p = with(params, names, t, 1);
          const Tensor G = encode_position(p, pts);
          return probe(transformer_aggregate(p, t[0], G, attention_matrix(p, t[0], G)), mix);
        },
        in);
  }

  {
    const Tensor mix = rand_tensor({8, 9}, rng);
    run("correlation", [&](std::span<const Tensor> t) { return probe(correlation_matrix(t[0], t[1]), mix); },
        {rand_tensor({8, 5}, rng), rand_tensor({9, 5}, rng)});
  }

  {
    const Tensor P = rand_tensor({8, 3}, rng);
    const Tensor Q = rand_tensor({9, 3}, rng);
    const Tensor mix = rand_tensor({8, 3}, rng);
    run("sinkhorn_extract_flow",
        [&](std::span<const Tensor> t) {
          return probe(extract_flow(sinkhorn(correlation_matrix(t[0], t[1]), 0.1, 30), P, Q), mix);
        },
        {rand_tensor({8, 5}, rng), rand_tensor({9, 5}, rng)});
  }

  {
    RefineConfig cfg;
    cfg.hidden = 8;
    cfg.k_neighbors = 4;
    ParamSet params;
    init_refine(cfg, 5, params, rng);
    randomize_biases(params, rng);
    params.set("refine.l2.w", rand_tensor(params.get("refine.l2.w").shape(), rng, -0.5, 0.5));
    const Tensor P = rand_tensor({10, 3}, rng);
    const NeighborTable nbrs = refine_neighbors(P, cfg.k_neighbors);
    const Tensor mix = rand_tensor({10, 3}, rng);
    const std::vector<std::string> names = {"refine.l0.w", "refine.l1.b", "refine.l2.w"};
    std::vector<Tensor> in = {rand_tensor({10, 3}, rng), rand_tensor({10, 5}, rng)};
    for (const auto& n : names) in.push_back(params.get(n));
    run("refine_flow",
        [&](std::span<const Tensor> t) { return probe(refine_flow(with(params, names, t, 2), nbrs, t[0], t[1]), mix); },
        in);
  }

  {
    const Tensor us = rand_tensor({12, 3}, rng);
    std::vector<std::uint8_t> mask(12, 1);
    mask[3] = mask[7] = 0;
    // Offsets bounded away from zero keep |.| off its kink.
    Tensor u = rand_tensor({12, 3}, rng, 0.1, 1.0);
    u = ops::add(us, ops::mul(u, rand_tensor({12, 3}, rng, -1.0, 1.0)));
    run("supervised_loss", [&](std::span<const Tensor> t) { return supervised_loss(t[0], us, mask); }, {u});
  }

  {
    FscConfig cfg;
    cfg.k_neighbors = 4;
    const Tensor P = rand_tensor({12, 3}, rng);
    const Tensor F = rand_tensor({12, 4}, rng, 0.0, 1.0);
    const Tensor us = rand_tensor({12, 3}, rng);
    run("fsc_loss", [&](std::span<const Tensor> t) { return fsc_loss(t[0], us, F, P, cfg); },
        {rand_tensor({12, 3}, rng, -2.0, 2.0)});
  }

  {
    ModelConfig cfg;
    cfg.voxel_size = 0.15;
    cfg.unet.channels = {4, 6, 8};
    cfg.unet.convs_per_level = 1;
    cfg.transformer.channels = 4;
    cfg.transformer.attn_dim = 4;
    cfg.refine.hidden = 8;
    cfg.refine.k_neighbors = 4;
    cfg.ot = {0.1, 20};
    ParamSet params = init_model(cfg, seed);
    randomize_biases(params, rng);
    params.set("refine.l2.w", rand_tensor(params.get("refine.l2.w").shape(), rng, -0.5, 0.5));
    const PointCloud P = rand_cloud(14, rng, 0.6);
    PointCloud Q = P;
    for (auto& q : Q.points) q[0] += 0.1;
    const Tensor mix = rand_tensor({14, 3}, rng);
    const std::vector<std::string> names = {"unet.enc0.conv0.w", "unet.dec0.conv0.b", "tf.phi0.w", "tf.wq",
                                            "refine.l1.w"};
    std::vector<Tensor> in;
    for (const auto& n : names) in.push_back(params.get(n));
    GradCheckOptions opts;
    opts.max_coords = 12;
    opts.seed = seed;
    run("full_model",
        [&](std::span<const Tensor> t) { return probe(forward(cfg, with(params, names, t, 0), P, Q).flow, mix); }, in,
        opts);
  }
  return out;
}

}  // namespace sctn
