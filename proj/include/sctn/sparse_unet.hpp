// Copyright Contributors to the sctn-flow project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "sctn/params.hpp"
#include "sctn/voxel_grid.hpp"

namespace sctn {

constexpr std::size_t kKernelVolume = 27;

// Offset index o in [0, 27) <-> (dx, dy, dz) in {-1, 0, 1}^3, x slowest.
VoxelCoord kernel_offset(std::size_t o) noexcept;

// (input row, output row) pairs per kernel offset, output-major within an
// offset so accumulation order never depends on absolute coordinates.
struct Rulebook {
  std::size_t n_in = 0;
  std::size_t n_out = 0;
  std::array<std::vector<std::pair<std::uint32_t, std::uint32_t>>, kKernelVolume> pairs;
  std::size_t total_pairs() const noexcept;
};

// Coarse grid of floor(c / 2) cells, same voxel size scaled by 2.
VoxelGrid downsample(const VoxelGrid& fine);
// Row of each fine cell's parent in `coarse`.
std::vector<std::uint32_t> parent_index(const VoxelGrid& fine, const VoxelGrid& coarse);

// stride 1: out coords == in coords, input at c + o.
// stride 2: output c reads inputs at 2c + o.
Rulebook build_rulebook(const VoxelGrid& in, const VoxelGrid& out, int stride);

// out[v] = bias + sum_o sum_{(i, v) in pairs_o} in[i] * W_o, with W stacked as
// (27 * C_in) x C_out, block o in rows [o * C_in, (o + 1) * C_in).
Tensor sparse_conv(const std::shared_ptr<const Rulebook>& rb, const Tensor& in, const Tensor& weight,
                   const Tensor& bias);

struct SparseConvLayer {
  Tensor weight;  // (27 * C_in) x C_out
  Tensor bias;    // 1 x C_out
  int stride = 1;
};

SparseConvLayer init_sparse_conv(std::size_t c_in, std::size_t c_out, int stride, Rng& rng);

struct UNetConfig {
  std::size_t in_channels = 4;
  std::array<std::size_t, 3> channels = {32, 64, 128};
  std::size_t convs_per_level = 2;
};

void validate(const UNetConfig& cfg);

// Registers "unet.*" weights and biases.
void init_unet(const UNetConfig& cfg, ParamSet& params, Rng& rng);

// Grids and rulebooks of all levels, built once per scene.
struct UNetPlan {
  std::vector<VoxelGrid> grids;                        // per level
  std::vector<std::shared_ptr<const Rulebook>> same;   // stride 1 per level
  std::vector<std::shared_ptr<const Rulebook>> down;   // level l -> l + 1
  std::vector<std::vector<std::uint32_t>> parent;      // level l -> l + 1
};

UNetPlan plan_unet(const UNetConfig& cfg, const VoxelGrid& grid);

// V x channels[0] features at the input resolution.
Tensor unet_forward(const UNetConfig& cfg, const ParamSet& params, const UNetPlan& plan, const Tensor& init_features);

}  // namespace sctn
