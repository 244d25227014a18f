// Copyright Contributors to the sctn-flow project
// SPDX-License-Identifier: Apache-2.0

#include "sctn/transformer.hpp"

#include <cmath>

namespace sctn {

void validate(const TransformerConfig& cfg) {
  if (cfg.channels == 0 || cfg.attn_dim == 0) throw ConfigError("transformer: channels and attn_dim must be positive");
  if (cfg.max_points == 0) throw ConfigError("transformer: max_points must be positive");
}

Tensor xavier(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  return uniform_tensor({fan_in, fan_out}, std::sqrt(6.0 / static_cast<double>(fan_in + fan_out)), rng);
}

void init_transformer(const TransformerConfig& cfg, ParamSet& params, Rng& rng) {
  validate(cfg);
  const std::size_t C = cfg.channels;
  params.add("tf.phi0.w", xavier(3, C, rng));
  params.add("tf.phi0.b", Tensor::zeros({1, C}));
  params.add("tf.phi1.w", xavier(C, C, rng));
  params.add("tf.phi1.b", Tensor::zeros({1, C}));
  params.add("tf.wq", xavier(C, cfg.attn_dim, rng));
  params.add("tf.wk", xavier(C, cfg.attn_dim, rng));
  params.add("tf.wv", xavier(C, C, rng));
}

Tensor encode_position(const ParamSet& params, const Tensor& points) {
  if (points.rank() != 2 || points.cols() != 3) throw ShapeError("encode_position", {points.shape()}, "expected n x 3");
  const Tensor h = ops::relu(ops::add_bias(ops::matmul(points, params.get("tf.phi0.w")), params.get("tf.phi0.b")));
  return ops::add_bias(ops::matmul(h, params.get("tf.phi1.w")), params.get("tf.phi1.b"));
}

Tensor attention_logits(const ParamSet& params, const Tensor& FS, const Tensor& G) {
  if (FS.rank() != 2 || FS.rows() == 0) throw ShapeError("attention_matrix", {FS.shape(), G.shape()}, "need n >= 1 rows");
  const Tensor X = ops::add(FS, G);
  const Tensor& wq = params.get("tf.wq");
  const Tensor q = ops::matmul(X, wq);
  const Tensor k = ops::matmul(X, params.get("tf.wk"));
  return ops::scale(ops::matmul_nt(q, k), 1.0 / static_cast<double>(wq.cols()));
}

Tensor attention_matrix(const ParamSet& params, const Tensor& FS, const Tensor& G) {
  return ops::softmax_rows(attention_logits(params, FS, G));
}

Tensor transformer_aggregate(const ParamSet& params, const Tensor& FS, const Tensor& G, const Tensor& A) {
  const Tensor v = ops::matmul(ops::add(FS, G), params.get("tf.wv"));
  if (A.rank() != 2 || A.cols() != v.rows()) {
    throw ShapeError("transformer_aggregate", {A.shape(), v.shape()}, "attention columns must equal point count");
  }
  return ops::matmul(A, v);
}

Tensor fuse_features(const Tensor& FS, const Tensor& FR) { return ops::add(FS, FR); }

Tensor transformer_forward(const ParamSet& params, const Tensor& FS, const Tensor& points) {
  const Tensor G = encode_position(params, points);
  const Tensor A = attention_matrix(params, FS, G);
  return fuse_features(FS, transformer_aggregate(params, FS, G, A));
}

}  // namespace sctn
