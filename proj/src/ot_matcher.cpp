// Copyright Contributors to the sctn-flow project
// SPDX-License-Identifier: Apache-2.0

#include "sctn/ot_matcher.hpp"

#include <cmath>
#include <memory>
#include <string>

#include "sctn/kernels.hpp"
#include "sctn/knn.hpp"
#include "sctn/transformer.hpp"

namespace sctn {

void validate(const OtConfig& cfg) {
  if (!(cfg.epsilon > 0.0)) throw ConfigError("ot: epsilon must be positive");
  if (cfg.iters == 0) throw ConfigError("ot: iters must be at least 1");
}

void validate(const RefineConfig& cfg) {
  if (cfg.hidden == 0 || cfg.k_neighbors == 0) throw ConfigError("refine: hidden and k_neighbors must be positive");
}

Tensor correlation_matrix(const Tensor& FP, const Tensor& FQ) {
  if (FP.rank() != 2 || FQ.rank() != 2 || FP.cols() != FQ.cols()) {
    throw ShapeError("correlation_matrix", {FP.shape(), FQ.shape()}, "feature widths differ");
  }
  const Tensor p = ops::div_rows(FP, ops::scale(ops::l2_norm(FP), 1.0, kNormGuard));
  const Tensor q = ops::div_rows(FQ, ops::scale(ops::l2_norm(FQ), 1.0, kNormGuard));
  return ops::scale(ops::matmul_nt(p, q), -1.0, 1.0);
}

namespace {

std::vector<double> transpose(std::span<const double> a, std::size_t n, std::size_t m) {
  std::vector<double> t(a.size());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) t[j * n + i] = a[i * m + j];
  return t;
}

// eps * log(mass) - eps * LSE_k((pot_k - cost_k) / eps), buf is scratch.
double lse_update(const kernels::KernelTable& K, const double* pot, const double* cost, std::size_t len,
                  double eps, double log_mass, double* buf) {
  K.scaled_diff(buf, pot, cost, 1.0 / eps, len);
  const double m = K.max(buf, len);
  K.scale_add(buf, buf, -m, 1.0, len);
  K.exp_inplace(buf, len);
  const double lse = m + std::log(K.sum(buf, len));
  return eps * log_mass - eps * lse;
}

// buf = exp((pot + shift - cost) / eps) * mult
void plan_row(const kernels::KernelTable& K, const double* pot, const double* cost, std::size_t len, double shift,
              double eps, double mult, double* buf) {
  K.scaled_diff(buf, pot, cost, 1.0, len);
  K.scale_add(buf, buf, shift, 1.0 / eps, len);
  K.exp_inplace(buf, len);
  if (mult != 1.0) K.scale_add(buf, buf, 0.0, mult, len);
}

struct SinkhornTrace {
  std::size_t n = 0, m = 0, iters = 0;
  double eps = 0.0;
  std::vector<double> C, Ct;
  std::vector<double> f;  // iters x n, f^1..f^T
  std::vector<double> g;  // iters x m, g^1..g^T
};

}  // namespace

Tensor sinkhorn(const Tensor& C, double epsilon, std::size_t iters) {
  if (C.rank() != 2 || C.rows() == 0 || C.cols() == 0) throw ShapeError("sinkhorn", {C.shape()}, "expected non-empty n x m cost");
  if (!(epsilon > 0.0)) throw InvariantError("sinkhorn: epsilon must be positive");
  if (iters == 0) throw InvariantError("sinkhorn: iters must be at least 1");
  for (double v : C.data()) {
    if (!std::isfinite(v)) throw NonFiniteError("sinkhorn: non-finite cost");
  }
  const auto& K = kernels::active();
  auto tr = std::make_shared<SinkhornTrace>();
  const std::size_t n = C.rows();
  const std::size_t m = C.cols();
  tr->n = n;
  tr->m = m;
  tr->iters = iters;
  tr->eps = epsilon;
  tr->C = C.to_vector();
  tr->Ct = transpose(tr->C, n, m);
  // Untaped runs keep only the last potentials.
  const bool keep = C.taped();
  const std::size_t slots = keep ? iters : 1;
  tr->f.assign(slots * n, 0.0);
  tr->g.assign(slots * m, 0.0);
  const double log_a = -std::log(static_cast<double>(n));
  const double log_b = -std::log(static_cast<double>(m));
  std::vector<double> buf(std::max(n, m));
  std::vector<double> g0(m, 0.0);

  for (std::size_t t = 0; t < iters; ++t) {
    const std::size_t s = keep ? t : 0;
    const double* g_prev = t == 0 ? g0.data() : &tr->g[(keep ? t - 1 : 0) * m];
    double* f = &tr->f[s * n];
    double* g = &tr->g[s * m];
    for (std::size_t i = 0; i < n; ++i) f[i] = lse_update(K, g_prev, &tr->C[i * m], m, epsilon, log_a, buf.data());
    for (std::size_t j = 0; j < m; ++j) g[j] = lse_update(K, f, &tr->Ct[j * n], n, epsilon, log_b, buf.data());
  }

  std::vector<double> T(n * m);
  const double* fT = &tr->f[(slots - 1) * n];
  const double* gT = &tr->g[(slots - 1) * m];
  for (std::size_t i = 0; i < n; ++i) plan_row(K, gT, &tr->C[i * m], m, fT[i], epsilon, 1.0, &T[i * m]);
  auto plan = std::make_shared<const std::vector<double>>(T);

  return make_result(OpKind::kSinkhorn, {&C}, {n, m}, std::move(T), [tr, plan](std::span<const double> dT, GradSink& sink) {
    auto dC = sink.grad(0);
    if (dC.empty()) return;
    const auto& K = kernels::active();
    const std::size_t n = tr->n;
    const std::size_t m = tr->m;
    const double eps = tr->eps;
    const double inv_a = static_cast<double>(n);
    const double inv_b = static_cast<double>(m);
    std::vector<double> df(n, 0.0), dg(m, 0.0);
    std::vector<double> dCt(m * n, 0.0);  // column-step contributions, transposed
    std::vector<double> buf(std::max(n, m));

    // T_ij = exp((f_i + g_j - C_ij) / eps)
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < m; ++j) {
        const double w = dT[i * m + j] * (*plan)[i * m + j] / eps;
        df[i] += w;
        dg[j] += w;
        dC[i * m + j] -= w;
      }
    }
    for (std::size_t t = tr->iters; t-- > 0;) {
      const double* f = &tr->f[t * n];
      const double* g = &tr->g[t * m];
      // g_j = eps log b - eps LSE_i((f_i - C_ij) / eps):
      // dg_j/df_i = -pi_ij, dg_j/dC_ij = pi_ij, pi_ij = exp((f_i + g_j - C_ij) / eps) / b.
      for (std::size_t j = 0; j < m; ++j) {
        if (dg[j] == 0.0) continue;
        plan_row(K, f, &tr->Ct[j * n], n, g[j], eps, inv_b, buf.data());
        K.axpy(df.data(), -dg[j], buf.data(), n);
        K.axpy(&dCt[j * n], dg[j], buf.data(), n);
      }
      std::fill(dg.begin(), dg.end(), 0.0);
      if (t == 0) break;  // g^0 is a constant
      // f_i = eps log a - eps LSE_j((g_j - C_ij) / eps) with the previous g.
      const double* g_prev = &tr->g[(t - 1) * m];
      for (std::size_t i = 0; i < n; ++i) {
        if (df[i] == 0.0) continue;
        plan_row(K, g_prev, &tr->C[i * m], m, f[i], eps, inv_a, buf.data());
        K.axpy(dg.data(), -df[i], buf.data(), m);
        K.axpy(&dC[i * m], df[i], buf.data(), m);
      }
      std::fill(df.begin(), df.end(), 0.0);
    }
    // First f step reads g^0 = 0.
    {
      const std::vector<double> zero(m, 0.0);
      const double* f = &tr->f[0];
      for (std::size_t i = 0; i < n; ++i) {
        if (df[i] == 0.0) continue;
        plan_row(K, zero.data(), &tr->C[i * m], m, f[i], eps, inv_a, buf.data());
        K.axpy(&dC[i * m], df[i], buf.data(), m);
      }
    }
    for (std::size_t j = 0; j < m; ++j)
      for (std::size_t i = 0; i < n; ++i) dC[i * m + j] += dCt[j * n + i];
  });
}

double transport_cost(const Tensor& T, const Tensor& C) {
  if (T.shape() != C.shape()) throw ShapeError("transport_cost", {T.shape(), C.shape()});
  double s = 0.0;
  for (std::size_t i = 0; i < T.numel(); ++i) s += T[i] * C[i];
  return s;
}

Tensor extract_flow(const Tensor& T, const Tensor& P, const Tensor& Q) {
  if (T.rank() != 2 || P.rank() != 2 || Q.rank() != 2 || P.cols() != 3 || Q.cols() != 3 || T.rows() != P.rows() ||
      T.cols() != Q.rows()) {
    throw ShapeError("extract_flow", {T.shape(), P.shape(), Q.shape()}, "expected T n x m, P n x 3, Q m x 3");
  }
  std::string bad;
  for (std::size_t i = 0; i < T.rows(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < T.cols(); ++j) s += T.at(i, j);
    if (!(s >= kNormGuard)) bad += (bad.empty() ? "" : ", ") + std::to_string(i);
  }
  if (!bad.empty()) throw InvariantError("extract_flow: transport rows without mass: " + bad);
  return ops::sub(ops::matmul(ops::row_normalize(T), Q), P);
}

void init_refine(const RefineConfig& cfg, std::size_t channels, ParamSet& params, Rng& rng) {
  validate(cfg);
  const std::size_t in = 2 * (3 + channels);
  params.add("refine.l0.w", xavier(in, cfg.hidden, rng));
  params.add("refine.l0.b", Tensor::zeros({1, cfg.hidden}));
  params.add("refine.l1.w", xavier(cfg.hidden, cfg.hidden, rng));
  params.add("refine.l1.b", Tensor::zeros({1, cfg.hidden}));
  // Zero output layer: refinement starts as the identity.
  params.add("refine.l2.w", Tensor::zeros({cfg.hidden, 3}));
  params.add("refine.l2.b", Tensor::zeros({1, 3}));
}

NeighborTable refine_neighbors(const Tensor& P, std::size_t k) {
  if (P.rank() != 2 || P.cols() != 3 || P.rows() == 0) throw ShapeError("refine_flow", {P.shape()}, "expected n x 3, n >= 1");
  const std::size_t n = P.rows();
  NeighborTable t;
  t.k = std::min(k, n - 1);
  if (t.k == 0) return t;
  std::vector<Point3> pts(n);
  for (std::size_t i = 0; i < n; ++i) pts[i] = {P.at(i, 0), P.at(i, 1), P.at(i, 2)};
  t.index = knn_indices(pts, t.k, true);
  return t;
}

Tensor refine_flow(const ParamSet& params, const NeighborTable& nbrs, const Tensor& u, const Tensor& F) {
  if (u.rank() != 2 || u.cols() != 3 || u.rows() == 0 || F.rank() != 2 || F.rows() != u.rows()) {
    throw ShapeError("refine_flow", {u.shape(), F.shape()}, "expected u n x 3 and F n x C, n >= 1");
  }
  const std::size_t n = u.rows();
  const Tensor parts[] = {u, F};
  const Tensor z = ops::concat_cols(parts);
  Tensor pooled;
  if (nbrs.k == 0) {
    pooled = Tensor::zeros(z.shape());
  } else {
    if (nbrs.index.size() != n * nbrs.k) throw InvariantError("refine_flow: neighbour table does not match n");
    std::vector<std::uint32_t> owner(n * nbrs.k);
    for (std::size_t r = 0; r < owner.size(); ++r) owner[r] = static_cast<std::uint32_t>(r / nbrs.k);
    pooled = ops::scale(ops::scatter_add_rows(ops::gather_rows(z, nbrs.index), owner, n),
                        1.0 / static_cast<double>(nbrs.k));
  }
  const Tensor in_parts[] = {z, pooled};
  Tensor h = ops::concat_cols(in_parts);
  h = ops::relu(ops::add_bias(ops::matmul(h, params.get("refine.l0.w")), params.get("refine.l0.b")));
  h = ops::relu(ops::add_bias(ops::matmul(h, params.get("refine.l1.w")), params.get("refine.l1.b")));
  const Tensor du = ops::add_bias(ops::matmul(h, params.get("refine.l2.w")), params.get("refine.l2.b"));
  return ops::add(u, du);
}

Tensor refine_flow(const ParamSet& params, const RefineConfig& cfg, const Tensor& u, const Tensor& F, const Tensor& P) {
  if (u.rank() != 2 || u.rows() == 0) throw InvariantError("refine_flow: need at least one point");
  return refine_flow(params, refine_neighbors(P, cfg.k_neighbors), u, F);
}

}  // namespace sctn
