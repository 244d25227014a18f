// Copyright Contributors to the sctn-flow project
// SPDX-License-Identifier: Apache-2.0

#include "sctn/losses.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "sctn/knn.hpp"
#include "sctn/pointcloud.hpp"

namespace sctn {

namespace {

std::atomic<std::uint64_t> g_fsc_calls{0};

void require_flow(const char* what, const Tensor& u, const Tensor& u_star) {
  if (u.rank() != 2 || u.cols() != 3 || u.shape() != u_star.shape()) {
    throw ShapeError(what, {u.shape(), u_star.shape()}, "expected two n x 3 flows");
  }
}

struct PairIndex {
  std::vector<std::uint32_t> i, j;
};

PairIndex neighbor_pairs(const Tensor& P, std::size_t n, std::size_t k) {
  if (P.rank() != 2 || P.cols() != 3 || P.rows() != n) throw ShapeError("fsc_loss", {P.shape()}, "P must be n x 3");
  if (n <= k) {
    throw InvariantError("fsc_loss: " + std::to_string(n) + " points but k_neighbors = " + std::to_string(k));
  }
  const PointCloud cloud = PointCloud::from_tensor(P);
  PairIndex pairs;
  pairs.j = knn_indices(cloud.points, k, true);
  pairs.i.resize(n * k);
  for (std::size_t r = 0; r < n * k; ++r) pairs.i[r] = static_cast<std::uint32_t>(r / k);
  return pairs;
}

// max(s, 0) per pair as an (n k) x 1 column. relu before exp keeps large
// negative dots from overflowing and gives the same clamp.
Tensor pair_similarity(const Tensor& F, const PairIndex& pairs, double tau) {
  const Tensor dot = ops::row_sum(ops::mul(ops::gather_rows(F, pairs.i), ops::gather_rows(F, pairs.j)));
  return ops::scale(ops::exp(ops::scale(ops::relu(dot), -1.0 / tau)), -1.0, 1.0);
}

}  // namespace

void validate(const FscConfig& cfg) {
  if (!(cfg.tau > 0.0)) throw ConfigError("fsc: tau must be positive");
  if (!(cfg.epsilon_g > 0.0)) throw ConfigError("fsc: epsilon_g must be positive");
  if (cfg.k_neighbors == 0) throw ConfigError("fsc: k_neighbors must be at least 1");
  if (!(cfg.lambda >= 0.0)) throw ConfigError("fsc: lambda must be non-negative");
}

Tensor supervised_loss(const Tensor& u, const Tensor& u_star, std::span<const std::uint8_t> mask) {
  require_flow("supervised_loss", u, u_star);
  if (mask.size() != u.rows()) {
    throw ShapeError("supervised_loss", {u.shape(), {mask.size()}}, "mask length must equal the point count");
  }
  std::vector<double> m(mask.size());
  for (std::size_t i = 0; i < mask.size(); ++i) m[i] = mask[i] ? 1.0 : 0.0;
  const Tensor diff = ops::sub(u, u_star.detached());
  return ops::sum(ops::mul(ops::l1_norm(diff), Tensor::column(std::move(m))));
}

double fsc_similarity(std::span<const double> Fi, std::span<const double> Fj, double tau) {
  double dot = 0.0;
  for (std::size_t c = 0; c < Fi.size(); ++c) dot += Fi[c] * Fj[c];
  return 1.0 - std::exp(-dot / tau);
}

double gamma_factor(std::span<const double> u_star_i, double epsilon_g) {
  double l1 = 0.0;
  for (double v : u_star_i) l1 += std::abs(v);
  return epsilon_g / (l1 + epsilon_g);
}

Tensor fsc_loss(const Tensor& u, const Tensor& u_star, const Tensor& F, const Tensor& P, const FscConfig& cfg,
                bool stop_similarity) {
  g_fsc_calls.fetch_add(1, std::memory_order_relaxed);
  validate(cfg);
  require_flow("fsc_loss", u, u_star);
  const std::size_t n = u.rows();
  if (F.rank() != 2 || F.rows() != n) throw ShapeError("fsc_loss", {u.shape(), F.shape()}, "F must have n rows");
  const PairIndex pairs = neighbor_pairs(P, n, cfg.k_neighbors);

  const Tensor s = pair_similarity(stop_similarity ? ops::stop_gradient(F) : F, pairs, cfg.tau);
  const Tensor d = ops::l1_norm(ops::sub(ops::gather_rows(u, pairs.i), ops::gather_rows(u, pairs.j)));
  std::vector<double> gamma(pairs.i.size());
  for (std::size_t r = 0; r < gamma.size(); ++r) {
    const std::size_t i = pairs.i[r];
    gamma[r] = gamma_factor(u_star.data().subspan(i * 3, 3), cfg.epsilon_g);
  }
  return ops::sum(ops::mul(ops::mul(s, d), Tensor::column(std::move(gamma))));
}

double mean_neighbor_similarity(const Tensor& F, const Tensor& P, const FscConfig& cfg) {
  validate(cfg);
  if (F.rank() != 2) throw ShapeError("mean_neighbor_similarity", {F.shape()});
  const PairIndex pairs = neighbor_pairs(P, F.rows(), cfg.k_neighbors);
  const Tensor s = pair_similarity(F.detached(), pairs, cfg.tau);
  return ops::sum(s).item() / static_cast<double>(s.numel());
}

std::uint64_t fsc_evaluations() noexcept { return g_fsc_calls.load(std::memory_order_relaxed); }

Tensor total_loss(const Tensor& Es, const Tensor& Ec, double lambda) {
  if (Es.numel() != 1 || Ec.numel() != 1) throw ShapeError("total_loss", {Es.shape(), Ec.shape()}, "expected scalars");
  return ops::add(Es, ops::scale(Ec, lambda));
}

MetricsRecord metrics(const Tensor& u, const Tensor& u_star) {
  require_flow("metrics", u, u_star);
  const std::size_t n = u.rows();
  if (n == 0) throw InvariantError("metrics: empty flow");
  MetricsRecord r;
  for (std::size_t i = 0; i < n; ++i) {
    double e2 = 0.0, g2 = 0.0;
    for (std::size_t c = 0; c < 3; ++c) {
      const double d = u.at(i, c) - u_star.at(i, c);
      e2 += d * d;
      g2 += u_star.at(i, c) * u_star.at(i, c);
    }
    const double e = std::sqrt(e2);
    const double g = std::sqrt(g2);
    double rel = 0.0;
    if (g > 0.0) {
      rel = e / g;
    } else if (e > 0.0) {
      rel = std::numeric_limits<double>::infinity();
    }
    r.epe3d += e;
    if (e < 0.05 || rel < 0.05) r.acc3ds += 1.0;
    if (e < 0.10 || rel < 0.10) r.acc3dr += 1.0;
    if (e > 0.30 || rel > 0.10) r.outliers += 1.0;
  }
  const double inv = 1.0 / static_cast<double>(n);
  r.epe3d *= inv;
  r.acc3ds *= inv;
  r.acc3dr *= inv;
  r.outliers *= inv;
  return r;
}

MetricsRecord mean_metrics(std::span<const MetricsRecord> per_scene) {
  if (per_scene.empty()) throw InvariantError("mean_metrics: no scenes");
  MetricsRecord m;
  for (const auto& r : per_scene) {
    m.epe3d += r.epe3d;
    m.acc3ds += r.acc3ds;
    m.acc3dr += r.acc3dr;
    m.outliers += r.outliers;
  }
  const double inv = 1.0 / static_cast<double>(per_scene.size());
  m.epe3d *= inv;
  m.acc3ds *= inv;
  m.acc3dr *= inv;
  m.outliers *= inv;
  return m;
}

void write_metrics_csv(std::span<const SceneMetrics> rows, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << "scene_id,epe3d,acc3ds,acc3dr,outliers\n";
  char buf[160];
  for (const auto& row : rows) {
    const auto& r = row.record;
    std::snprintf(buf, sizeof(buf), ",%.9g,%.9g,%.9g,%.9g\n", r.epe3d, r.acc3ds, r.acc3dr, r.outliers);
    out << row.scene_id << buf;
  }
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace sctn
