// Copyright Contributors to the sctn-flow project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>

#include "sctn/params.hpp"

namespace sctn {

struct TransformerConfig {
  std::size_t channels = 32;   // C, must match the backbone output
  std::size_t attn_dim = 32;   // c_a
  std::size_t max_points = 2048;
};

void validate(const TransformerConfig& cfg);

// Registers "tf.*": phi (3 -> C -> C), wq/wk (C x c_a), wv (C x C).
void init_transformer(const TransformerConfig& cfg, ParamSet& params, Rng& rng);

// Dense Xavier-uniform init for a fan_in x fan_out map.
Tensor xavier(std::size_t fan_in, std::size_t fan_out, Rng& rng);

// G = phi(points), relu between the two layers.
Tensor encode_position(const ParamSet& params, const Tensor& points);

// Row-softmax of (Wq X)(Wk X)^T / c_a with X = FS + G. c_a is read from wq.
Tensor attention_logits(const ParamSet& params, const Tensor& FS, const Tensor& G);
Tensor attention_matrix(const ParamSet& params, const Tensor& FS, const Tensor& G);

// F^R = A (FS + G) Wv
Tensor transformer_aggregate(const ParamSet& params, const Tensor& FS, const Tensor& G, const Tensor& A);

// F = FS + FR
Tensor fuse_features(const Tensor& FS, const Tensor& FR);

// Full branch: G, A, F^R, fused F.
Tensor transformer_forward(const ParamSet& params, const Tensor& FS, const Tensor& points);

}  // namespace sctn
