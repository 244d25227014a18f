// Copyright Contributors to the sctn-flow project
// SPDX-License-Identifier: Apache-2.0

#include "sctn/sparse_unet.hpp"

#include <cmath>
#include <string>

#include "sctn/kernels.hpp"

namespace sctn {

VoxelCoord kernel_offset(std::size_t o) noexcept {
  const auto i = static_cast<std::int32_t>(o);
  return {i / 9 - 1, (i / 3) % 3 - 1, i % 3 - 1};
}

std::size_t Rulebook::total_pairs() const noexcept {
  std::size_t n = 0;
  for (const auto& p : pairs) n += p.size();
  return n;
}

namespace {

VoxelCoord half(const VoxelCoord& c) noexcept { return {c[0] >> 1, c[1] >> 1, c[2] >> 1}; }

}  // namespace

VoxelGrid downsample(const VoxelGrid& fine) {
  std::vector<VoxelCoord> coarse;
  coarse.reserve(fine.size());
  for (const auto& c : fine.coords()) coarse.push_back(half(c));
  return VoxelGrid::from_coords(std::move(coarse), 2.0 * fine.voxel_size());
}

std::vector<std::uint32_t> parent_index(const VoxelGrid& fine, const VoxelGrid& coarse) {
  std::vector<std::uint32_t> out(fine.size());
  for (std::size_t v = 0; v < fine.size(); ++v) {
    const auto p = coarse.find(half(fine.coord(v)));
    if (!p) throw InvariantError("parent_index: coarse grid misses a parent cell");
    out[v] = *p;
  }
  return out;
}

Rulebook build_rulebook(const VoxelGrid& in, const VoxelGrid& out, int stride) {
  if (stride != 1 && stride != 2) throw InvariantError("sparse_conv: stride must be 1 or 2");
  Rulebook rb;
  rb.n_in = in.size();
  rb.n_out = out.size();
  for (std::size_t o = 0; o < kKernelVolume; ++o) {
    const VoxelCoord d = kernel_offset(o);
    for (std::size_t v = 0; v < out.size(); ++v) {
      const auto& c = out.coord(v);
      const VoxelCoord src = {stride * c[0] + d[0], stride * c[1] + d[1], stride * c[2] + d[2]};
      if (auto i = in.find(src)) rb.pairs[o].emplace_back(*i, static_cast<std::uint32_t>(v));
    }
  }
  return rb;
}

Tensor sparse_conv(const std::shared_ptr<const Rulebook>& rb, const Tensor& in, const Tensor& weight,
                   const Tensor& bias) {
  if (in.rank() != 2 || in.rows() != rb->n_in) {
    throw ShapeError("sparse_conv", {in.shape(), weight.shape()}, "input rows must equal the input voxel count");
  }
  const std::size_t cin = in.cols();
  if (weight.rank() != 2 || weight.rows() != kKernelVolume * cin) {
    throw ShapeError("sparse_conv", {in.shape(), weight.shape()}, "weight must be (27 * C_in) x C_out");
  }
  const std::size_t cout = weight.cols();
  if (bias.numel() != cout) throw ShapeError("sparse_conv", {weight.shape(), bias.shape()}, "bias length != C_out");

  const auto& K = kernels::active();
  std::vector<double> out(rb->n_out * cout);
  const auto b = bias.data();
  for (std::size_t v = 0; v < rb->n_out; ++v) std::copy(b.begin(), b.end(), out.begin() + static_cast<std::ptrdiff_t>(v * cout));
  const double* x = in.data().data();
  const double* w = weight.data().data();
  for (std::size_t o = 0; o < kKernelVolume; ++o) {
    const double* wo = w + o * cin * cout;
    for (const auto& [i, v] : rb->pairs[o]) {
      double* y = out.data() + v * cout;
      const double* xi = x + i * cin;
      for (std::size_t c = 0; c < cin; ++c) {
        if (xi[c] != 0.0) K.axpy(y, xi[c], wo + c * cout, cout);
      }
    }
  }

  return make_result(OpKind::kSparseConv, {&in, &weight, &bias}, {rb->n_out, cout}, std::move(out),
                     [rb, in = in.detached(), weight = weight.detached(), cin, cout](std::span<const double> g,
                                                                                     GradSink& sink) {
                       const auto& K = kernels::active();
                       const double* x = in.data().data();
                       const double* w = weight.data().data();
                       auto gin = sink.grad(0);
                       auto gw = sink.grad(1);
                       auto gb = sink.grad(2);
                       for (std::size_t o = 0; o < kKernelVolume; ++o) {
                         const double* wo = w + o * cin * cout;
                         for (const auto& [i, v] : rb->pairs[o]) {
                           const double* gv = g.data() + v * cout;
                           if (!gin.empty()) {
                             double* gi = gin.data() + i * cin;
                             for (std::size_t c = 0; c < cin; ++c) gi[c] += K.dot(wo + c * cout, gv, cout);
                           }
                           if (!gw.empty()) {
                             const double* xi = x + i * cin;
                             double* gwo = gw.data() + o * cin * cout;
                             for (std::size_t c = 0; c < cin; ++c) {
                               if (xi[c] != 0.0) K.axpy(gwo + c * cout, xi[c], gv, cout);
                             }
                           }
                         }
                       }
                       if (!gb.empty()) {
                         for (std::size_t v = 0; v < rb->n_out; ++v) K.axpy(gb.data(), 1.0, g.data() + v * cout, cout);
                       }
                     });
}

SparseConvLayer init_sparse_conv(std::size_t c_in, std::size_t c_out, int stride, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(c_in * kKernelVolume + c_out));
  return {uniform_tensor({kKernelVolume * c_in, c_out}, bound, rng), Tensor::zeros({1, c_out}), stride};
}

void validate(const UNetConfig& cfg) {
  if (cfg.in_channels == 0 || cfg.convs_per_level == 0) throw ConfigError("unet: channel and conv counts must be positive");
  for (std::size_t l = 0; l < cfg.channels.size(); ++l) {
    if (cfg.channels[l] == 0 || (l > 0 && cfg.channels[l] <= cfg.channels[l - 1])) {
      throw ConfigError("unet: channels must strictly increase with depth");
    }
  }
}

namespace {

constexpr std::size_t kLevels = 3;

void add_conv(ParamSet& params, const std::string& name, std::size_t cin, std::size_t cout, int stride, Rng& rng) {
  auto layer = init_sparse_conv(cin, cout, stride, rng);
  params.add(name + ".w", std::move(layer.weight));
  params.add(name + ".b", std::move(layer.bias));
}

std::string enc(std::size_t l, std::size_t k) { return "unet.enc" + std::to_string(l) + ".conv" + std::to_string(k); }
std::string dec(std::size_t l, std::size_t k) { return "unet.dec" + std::to_string(l) + ".conv" + std::to_string(k); }
std::string down(std::size_t l) { return "unet.down" + std::to_string(l); }
std::string up(std::size_t l) { return "unet.up" + std::to_string(l); }

Tensor conv(const ParamSet& p, const std::string& name, const std::shared_ptr<const Rulebook>& rb, const Tensor& x,
            bool relu) {
  Tensor y = sparse_conv(rb, x, p.get(name + ".w"), p.get(name + ".b"));
  return relu ? ops::relu(y) : y;
}

}  // namespace

void init_unet(const UNetConfig& cfg, ParamSet& params, Rng& rng) {
  validate(cfg);
  const auto& ch = cfg.channels;
  // Encoder: level 0 starts from the input features, deeper levels from a
  // stride-2 conv of the level above.
  for (std::size_t l = 0; l < kLevels; ++l) {
    if (l > 0) add_conv(params, down(l), ch[l - 1], ch[l], 2, rng);
    for (std::size_t k = 0; k < cfg.convs_per_level; ++k) {
      const std::size_t cin = (l == 0 && k == 0) ? cfg.in_channels : ch[l];
      add_conv(params, enc(l, k), cin, ch[l], 1, rng);
    }
  }
  // Decoder: upsampled coarse features are reduced, added to the skip, then
  // refined by the level convs.
  for (std::size_t l = kLevels - 1; l-- > 0;) {
    add_conv(params, up(l), ch[l + 1], ch[l], 1, rng);
    for (std::size_t k = 0; k < cfg.convs_per_level; ++k) add_conv(params, dec(l, k), ch[l], ch[l], 1, rng);
  }
}

UNetPlan plan_unet(const UNetConfig& cfg, const VoxelGrid& grid) {
  (void)cfg;
  if (grid.empty()) throw InvariantError("unet: empty grid");
  UNetPlan plan;
  plan.grids.push_back(grid);
  for (std::size_t l = 1; l < kLevels; ++l) plan.grids.push_back(downsample(plan.grids.back()));
  for (std::size_t l = 0; l < kLevels; ++l) {
    plan.same.push_back(std::make_shared<const Rulebook>(build_rulebook(plan.grids[l], plan.grids[l], 1)));
    if (l + 1 < kLevels) {
      plan.down.push_back(std::make_shared<const Rulebook>(build_rulebook(plan.grids[l], plan.grids[l + 1], 2)));
      plan.parent.push_back(parent_index(plan.grids[l], plan.grids[l + 1]));
    }
  }
  return plan;
}

Tensor unet_forward(const UNetConfig& cfg, const ParamSet& params, const UNetPlan& plan, const Tensor& init_features) {
  if (plan.grids.empty() || plan.grids[0].empty()) throw InvariantError("unet: empty grid");
  if (init_features.rank() != 2 || init_features.rows() != plan.grids[0].size() ||
      init_features.cols() != cfg.in_channels) {
    throw ShapeError("unet_forward", {init_features.shape()}, "expected V x in_channels");
  }
  std::vector<Tensor> skip(kLevels);
  Tensor x = init_features;
  for (std::size_t l = 0; l < kLevels; ++l) {
    if (l > 0) x = conv(params, down(l), plan.down[l - 1], x, true);
    for (std::size_t k = 0; k < cfg.convs_per_level; ++k) x = conv(params, enc(l, k), plan.same[l], x, true);
    skip[l] = x;
  }
  for (std::size_t l = kLevels - 1; l-- > 0;) {
    // Nearest upsampling: each cell takes its parent's row.
    x = ops::gather_rows(x, plan.parent[l]);
    x = ops::add(conv(params, up(l), plan.same[l], x, true), skip[l]);
    for (std::size_t k = 0; k < cfg.convs_per_level; ++k) {
      const bool last = l == 0 && k + 1 == cfg.convs_per_level;
      x = conv(params, dec(l, k), plan.same[l], x, !last);
    }
  }
  return x;
}

}  // namespace sctn
