// Copyright Contributors to the sctn-flow project
// SPDX-License-Identifier: Apache-2.0

#include "sctn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <string>

#include "sctn/kernels.hpp"

namespace sctn {
namespace {

thread_local bool g_checked = true;

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

void check_finite(std::string_view what, std::span<const double> values) {
  if (!g_checked) return;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw NonFiniteError(std::string(what) + ": non-finite value " + std::to_string(values[i]) +
                           " at flat index " + std::to_string(i));
    }
  }
}

void require_rank2(std::string_view primitive, const Tensor& a) {
  if (a.rank() != 2) throw ShapeError(std::string(primitive), {a.shape()}, "expected a matrix");
}

void require_same(std::string_view primitive, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) throw ShapeError(std::string(primitive), {a.shape(), b.shape()});
}

void require_column(std::string_view primitive, const Tensor& a, const Tensor& d) {
  require_rank2(primitive, a);
  if (d.numel() != a.rows() || (d.rank() == 2 && d.cols() != 1)) {
    throw ShapeError(std::string(primitive), {a.shape(), d.shape()}, "expected an n x 1 operand");
  }
}

class SinkImpl final : public GradSink {
 public:
  SinkImpl(const std::vector<NodeId>& inputs, std::vector<std::vector<double>>& grads,
           const std::vector<std::size_t>& numels)
      : inputs_(inputs), grads_(grads), numels_(numels) {}

  std::span<double> grad(std::size_t input) override {
    const NodeId id = inputs_.at(input);
    if (id == kNoNode) return {};
    auto& g = grads_[id];
    if (g.empty()) g.assign(numels_[id], 0.0);
    return g;
  }

 private:
  const std::vector<NodeId>& inputs_;
  std::vector<std::vector<double>>& grads_;
  const std::vector<std::size_t>& numels_;
};

}  // namespace

bool checked_mode() noexcept { return g_checked; }
void set_checked_mode(bool enabled) noexcept { g_checked = enabled; }

// ---------------------------------------------------------------------------
// Tensor

Tensor::Tensor(Shape shape, std::vector<double> values) : shape_(std::move(shape)) {
  if (shape_numel(shape_) != values.size()) {
    throw ShapeError("tensor", {shape_}, "data length " + std::to_string(values.size()));
  }
  check_finite("tensor", values);
  data_ = std::make_shared<const std::vector<double>>(std::move(values));
}

Tensor Tensor::zeros(Shape shape) { return full(std::move(shape), 0.0); }

Tensor Tensor::full(Shape shape, double value) {
  const std::size_t n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value));
}

Tensor Tensor::scalar(double value) { return Tensor(Shape{}, {value}); }

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values) {
  return Tensor(Shape{rows, cols}, std::move(values));
}

Tensor Tensor::column(std::vector<double> values) {
  const std::size_t n = values.size();
  return Tensor(Shape{n, 1}, std::move(values));
}

std::size_t Tensor::rows() const { return shape_.empty() ? 1 : shape_[0]; }

std::size_t Tensor::cols() const { return shape_.size() < 2 ? 1 : shape_[1]; }

double Tensor::item() const {
  if (numel() != 1) throw ShapeError("item", {shape_}, "expected a single element");
  return (*data_)[0];
}

Tensor Tensor::detached() const { return Tensor(shape_, data_, nullptr, kNoNode); }

bool Tensor::same_values(const Tensor& other) const noexcept {
  if (shape_ != other.shape_) return false;
  const auto a = data();
  const auto b = other.data();
  return std::equal(a.begin(), a.end(), b.begin(), b.end(), [](double x, double y) {
    return std::memcmp(&x, &y, sizeof(double)) == 0;
  });
}

std::string_view op_name(OpKind kind) noexcept {
  switch (kind) {
    case OpKind::kLeaf: return "leaf";
    case OpKind::kAdd: return "add";
    case OpKind::kSub: return "sub";
    case OpKind::kMul: return "mul";
    case OpKind::kScale: return "scale";
    case OpKind::kAddBias: return "add_bias";
    case OpKind::kMatmul: return "matmul";
    case OpKind::kMatmulNT: return "matmul_nt";
    case OpKind::kExp: return "exp";
    case OpKind::kRelu: return "relu";
    case OpKind::kSum: return "sum";
    case OpKind::kRowSum: return "row_sum";
    case OpKind::kL1Norm: return "l1_norm";
    case OpKind::kL2Norm: return "l2_norm";
    case OpKind::kDivRows: return "div_rows";
    case OpKind::kMulRows: return "mul_rows";
    case OpKind::kGatherRows: return "gather_rows";
    case OpKind::kScatterAddRows: return "scatter_add_rows";
    case OpKind::kRowNormalize: return "row_normalize";
    case OpKind::kConcatCols: return "concat_cols";
    case OpKind::kSoftmaxRows: return "softmax_rows";
    case OpKind::kStopGradient: return "stop_gradient";
    case OpKind::kSparseConv: return "sparse_conv";
    case OpKind::kSinkhorn: return "sinkhorn";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// Tape

Tensor Tape::variable(const Tensor& value) {
  const auto id = static_cast<NodeId>(nodes_.size());
  nodes_.push_back(Node{OpKind::kLeaf, {}, value.numel(), nullptr});
  return Tensor(value.shape_, value.data_ ? value.data_ : std::make_shared<const std::vector<double>>(),
                this, id);
}

Tensor Tape::record(OpKind kind, std::span<const Tensor* const> inputs, Shape shape,
                    std::vector<double> values, BackwardFn backward) {
  if (shape_numel(shape) != values.size()) {
    throw ShapeError(std::string(op_name(kind)), {shape}, "result length mismatch");
  }
  check_finite(op_name(kind), values);
  std::vector<NodeId> ids;
  ids.reserve(inputs.size());
  bool any = false;
  for (const Tensor* t : inputs) {
    if (t->taped()) {
      if (t->tape() != this) throw Error(std::string(op_name(kind)) + ": operands on different tapes");
      any = true;
      ids.push_back(t->node());
    } else {
      ids.push_back(kNoNode);
    }
  }
  auto data = std::make_shared<const std::vector<double>>(std::move(values));
  if (!any) return Tensor(std::move(shape), std::move(data), nullptr, kNoNode);
  const auto id = static_cast<NodeId>(nodes_.size());
  nodes_.push_back(Node{kind, std::move(ids), data->size(), std::move(backward)});
  return Tensor(std::move(shape), std::move(data), this, id);
}

Gradients Tape::backward(const Tensor& loss) const {
  if (!loss.taped() || loss.tape() != this) throw Error("backward: loss is not recorded on this tape");
  if (loss.numel() != 1) throw ShapeError("backward", {loss.shape()}, "loss must be a scalar");

  std::vector<std::size_t> numels(nodes_.size());
  for (std::size_t i = 0; i < nodes_.size(); ++i) numels[i] = nodes_[i].numel;

  Gradients out;
  out.by_node_.resize(nodes_.size());
  out.by_node_[loss.node()] = {1.0};
  for (std::size_t k = loss.node() + 1; k-- > 0;) {
    const Node& node = nodes_[k];
    if (out.by_node_[k].empty() || !node.backward) continue;
    SinkImpl sink(node.inputs, out.by_node_, numels);
    node.backward(out.by_node_[k], sink);
  }
  return out;
}

Tensor Gradients::wrt(const Tensor& x) const {
  if (x.taped() && x.node() < by_node_.size() && !by_node_[x.node()].empty()) {
    return Tensor(x.shape(), by_node_[x.node()]);
  }
  return Tensor::zeros(x.shape());
}

bool Gradients::has(const Tensor& x) const {
  return x.taped() && x.node() < by_node_.size() && !by_node_[x.node()].empty();
}

Tape* common_tape(std::string_view primitive, std::span<const Tensor* const> inputs) {
  Tape* tape = nullptr;
  for (const Tensor* t : inputs) {
    if (!t->taped()) continue;
    if (tape != nullptr && t->tape() != tape) {
      throw Error(std::string(primitive) + ": operands on different tapes");
    }
    tape = t->tape();
  }
  return tape;
}

Tensor make_result(OpKind kind, std::span<const Tensor* const> inputs, Shape shape,
                   std::vector<double> values, BackwardFn backward) {
  Tape* tape = common_tape(op_name(kind), inputs);
  if (tape == nullptr) {
    check_finite(op_name(kind), values);
    return Tensor(std::move(shape), std::move(values));
  }
  return tape->record(kind, inputs, std::move(shape), std::move(values), std::move(backward));
}

Tensor make_result(OpKind kind, std::initializer_list<const Tensor*> inputs, Shape shape,
                   std::vector<double> values, BackwardFn backward) {
  return make_result(kind, std::span<const Tensor* const>(inputs.begin(), inputs.size()),
                     std::move(shape), std::move(values), std::move(backward));
}

// ---------------------------------------------------------------------------
// Primitives

namespace ops {

Tensor add(const Tensor& a, const Tensor& b) {
  require_same("add", a, b);
  std::vector<double> out(a.numel());
  const auto x = a.data();
  const auto y = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + y[i];
  return make_result(OpKind::kAdd, {&a, &b}, a.shape(), std::move(out),
                     [](std::span<const double> g, GradSink& sink) {
                       for (std::size_t k = 0; k < 2; ++k) {
                         auto gi = sink.grad(k);
                         for (std::size_t i = 0; i < gi.size(); ++i) gi[i] += g[i];
                       }
                     });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same("sub", a, b);
  std::vector<double> out(a.numel());
  const auto x = a.data();
  const auto y = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] - y[i];
  return make_result(OpKind::kSub, {&a, &b}, a.shape(), std::move(out),
                     [](std::span<const double> g, GradSink& sink) {
                       auto ga = sink.grad(0);
                       for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i];
                       auto gb = sink.grad(1);
                       for (std::size_t i = 0; i < gb.size(); ++i) gb[i] -= g[i];
                     });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same("mul", a, b);
  std::vector<double> out(a.numel());
  const auto x = a.data();
  const auto y = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * y[i];
  return make_result(OpKind::kMul, {&a, &b}, a.shape(), std::move(out),
                     [a = a.detached(), b = b.detached()](std::span<const double> g, GradSink& sink) {
                       auto ga = sink.grad(0);
                       const auto bv = b.data();
                       for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] * bv[i];
                       auto gb = sink.grad(1);
                       const auto av = a.data();
                       for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g[i] * av[i];
                     });
}

Tensor scale(const Tensor& a, double alpha, double beta) {
  std::vector<double> out(a.numel());
  const auto x = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = alpha * x[i] + beta;
  return make_result(OpKind::kScale, {&a}, a.shape(), std::move(out),
                     [alpha](std::span<const double> g, GradSink& sink) {
                       auto ga = sink.grad(0);
                       for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += alpha * g[i];
                     });
}

Tensor add_bias(const Tensor& a, const Tensor& b) {
  require_rank2("add_bias", a);
  const std::size_t n = a.rows();
  const std::size_t c = a.cols();
  if (b.numel() != c) throw ShapeError("add_bias", {a.shape(), b.shape()});
  std::vector<double> out(a.numel());
  const auto x = a.data();
  const auto bv = b.data();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] = x[i * c + j] + bv[j];
  }
  return make_result(OpKind::kAddBias, {&a, &b}, a.shape(), std::move(out),
                     [n, c](std::span<const double> g, GradSink& sink) {
                       auto ga = sink.grad(0);
                       for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i];
                       auto gb = sink.grad(1);
                       if (gb.empty()) return;
                       for (std::size_t i = 0; i < n; ++i) {
                         for (std::size_t j = 0; j < c; ++j) gb[j] += g[i * c + j];
                       }
                     });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank2("matmul", a);
  require_rank2("matmul", b);
  if (a.cols() != b.rows()) throw ShapeError("matmul", {a.shape(), b.shape()}, "inner dimensions differ");
  const std::size_t n = a.rows();
  const std::size_t k = a.cols();
  const std::size_t m = b.cols();
  const auto& kt = kernels::active();
  std::vector<double> out(n * m, 0.0);
  const auto av = a.data();
  const auto bv = b.data();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double s = av[i * k + p];
      if (s != 0.0) kt.axpy(out.data() + i * m, s, bv.data() + p * m, m);
    }
  }
  return make_result(
      OpKind::kMatmul, {&a, &b}, {n, m}, std::move(out),
      [a = a.detached(), b = b.detached(), n, k, m](std::span<const double> g, GradSink& sink) {
        const auto& kt = kernels::active();
        if (auto ga = sink.grad(0); !ga.empty()) {
          const auto bv = b.data();
          for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t p = 0; p < k; ++p) ga[i * k + p] += kt.dot(g.data() + i * m, bv.data() + p * m, m);
          }
        }
        if (auto gb = sink.grad(1); !gb.empty()) {
          const auto av = a.data();
          for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t p = 0; p < k; ++p) {
              const double s = av[i * k + p];
              if (s != 0.0) kt.axpy(gb.data() + p * m, s, g.data() + i * m, m);
            }
          }
        }
      });
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  require_rank2("matmul_nt", a);
  require_rank2("matmul_nt", b);
  if (a.cols() != b.cols()) throw ShapeError("matmul_nt", {a.shape(), b.shape()}, "inner dimensions differ");
  const std::size_t n = a.rows();
  const std::size_t k = a.cols();
  const std::size_t m = b.rows();
  const auto& kt = kernels::active();
  std::vector<double> out(n * m);
  const auto av = a.data();
  const auto bv = b.data();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) out[i * m + j] = kt.dot(av.data() + i * k, bv.data() + j * k, k);
  }
  return make_result(
      OpKind::kMatmulNT, {&a, &b}, {n, m}, std::move(out),
      [a = a.detached(), b = b.detached(), n, k, m](std::span<const double> g, GradSink& sink) {
        const auto& kt = kernels::active();
        if (auto ga = sink.grad(0); !ga.empty()) {
          const auto bv = b.data();
          for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < m; ++j) {
              const double s = g[i * m + j];
              if (s != 0.0) kt.axpy(ga.data() + i * k, s, bv.data() + j * k, k);
            }
          }
        }
        if (auto gb = sink.grad(1); !gb.empty()) {
          const auto av = a.data();
          for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < m; ++j) {
              const double s = g[i * m + j];
              if (s != 0.0) kt.axpy(gb.data() + j * k, s, av.data() + i * k, k);
            }
          }
        }
      });
}

Tensor exp(const Tensor& a) {
  std::vector<double> out = a.to_vector();
  kernels::active().exp_inplace(out.data(), out.size());
  auto result_values = std::make_shared<const std::vector<double>>(out);
  return make_result(OpKind::kExp, {&a}, a.shape(), std::move(out),
                     [y = std::move(result_values)](std::span<const double> g, GradSink& sink) {
                       auto ga = sink.grad(0);
                       for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] * (*y)[i];
                     });
}

Tensor relu(const Tensor& a) {
  std::vector<double> out(a.numel());
  const auto x = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
  return make_result(OpKind::kRelu, {&a}, a.shape(), std::move(out),
                     [a = a.detached()](std::span<const double> g, GradSink& sink) {
                       auto ga = sink.grad(0);
                       const auto x = a.data();
                       for (std::size_t i = 0; i < ga.size(); ++i) {
                         if (x[i] > 0.0) ga[i] += g[i];
                       }
                     });
}

Tensor sum(const Tensor& a) {
  double acc = 0.0;
  for (double v : a.data()) acc += v;
  return make_result(OpKind::kSum, {&a}, Shape{}, {acc},
                     [](std::span<const double> g, GradSink& sink) {
                       auto ga = sink.grad(0);
                       for (double& v : ga) v += g[0];
                     });
}

Tensor row_sum(const Tensor& a) {
  require_rank2("row_sum", a);
  const std::size_t n = a.rows();
  const std::size_t c = a.cols();
  std::vector<double> out(n, 0.0);
  const auto x = a.data();
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < c; ++j) acc += x[i * c + j];
    out[i] = acc;
  }
  return make_result(OpKind::kRowSum, {&a}, {n, 1}, std::move(out),
                     [n, c](std::span<const double> g, GradSink& sink) {
                       auto ga = sink.grad(0);
                       for (std::size_t i = 0; i < n; ++i) {
                         for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += g[i];
                       }
                     });
}

Tensor l1_norm(const Tensor& a) {
  require_rank2("l1_norm", a);
  const std::size_t n = a.rows();
  const std::size_t c = a.cols();
  std::vector<double> out(n);
  const auto x = a.data();
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < c; ++j) acc += std::abs(x[i * c + j]);
    out[i] = acc;
  }
  return make_result(OpKind::kL1Norm, {&a}, {n, 1}, std::move(out),
                     [a = a.detached(), n, c](std::span<const double> g, GradSink& sink) {
                       auto ga = sink.grad(0);
                       const auto x = a.data();
                       for (std::size_t i = 0; i < n; ++i) {
                         for (std::size_t j = 0; j < c; ++j) {
                           const double v = x[i * c + j];
                           if (v > 0.0) {
                             ga[i * c + j] += g[i];
                           } else if (v < 0.0) {
                             ga[i * c + j] -= g[i];
                           }
                         }
                       }
                     });
}

Tensor l2_norm(const Tensor& a) {
  require_rank2("l2_norm", a);
  const std::size_t n = a.rows();
  const std::size_t c = a.cols();
  std::vector<double> out(n);
  const auto x = a.data();
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < c; ++j) acc += x[i * c + j] * x[i * c + j];
    out[i] = std::sqrt(acc);
  }
  auto norms = std::make_shared<const std::vector<double>>(out);
  return make_result(
      OpKind::kL2Norm, {&a}, {n, 1}, std::move(out),
      [a = a.detached(), norms = std::move(norms), n, c](std::span<const double> g, GradSink& sink) {
        auto ga = sink.grad(0);
        const auto x = a.data();
        for (std::size_t i = 0; i < n; ++i) {
          const double r = (*norms)[i];
          if (r == 0.0) continue;
          const double s = g[i] / r;
          for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += s * x[i * c + j];
        }
      });
}

Tensor div_rows(const Tensor& a, const Tensor& d) {
  require_column("div_rows", a, d);
  const std::size_t n = a.rows();
  const std::size_t c = a.cols();
  std::vector<double> out(a.numel());
  const auto x = a.data();
  const auto dv = d.data();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] = x[i * c + j] / dv[i];
  }
  return make_result(OpKind::kDivRows, {&a, &d}, a.shape(), std::move(out),
                     [a = a.detached(), d = d.detached(), n, c](std::span<const double> g, GradSink& sink) {
                       const auto x = a.data();
                       const auto dv = d.data();
                       if (auto ga = sink.grad(0); !ga.empty()) {
                         for (std::size_t i = 0; i < n; ++i) {
                           for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += g[i * c + j] / dv[i];
                         }
                       }
                       if (auto gd = sink.grad(1); !gd.empty()) {
                         for (std::size_t i = 0; i < n; ++i) {
                           double acc = 0.0;
                           for (std::size_t j = 0; j < c; ++j) acc += g[i * c + j] * x[i * c + j];
                           gd[i] -= acc / (dv[i] * dv[i]);
                         }
                       }
                     });
}

Tensor mul_rows(const Tensor& a, const Tensor& s) {
  require_column("mul_rows", a, s);
  const std::size_t n = a.rows();
  const std::size_t c = a.cols();
  std::vector<double> out(a.numel());
  const auto x = a.data();
  const auto sv = s.data();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] = x[i * c + j] * sv[i];
  }
  return make_result(OpKind::kMulRows, {&a, &s}, a.shape(), std::move(out),
                     [a = a.detached(), s = s.detached(), n, c](std::span<const double> g, GradSink& sink) {
                       const auto x = a.data();
                       const auto sv = s.data();
                       if (auto ga = sink.grad(0); !ga.empty()) {
                         for (std::size_t i = 0; i < n; ++i) {
                           for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += g[i * c + j] * sv[i];
                         }
                       }
                       if (auto gs = sink.grad(1); !gs.empty()) {
                         for (std::size_t i = 0; i < n; ++i) {
                           double acc = 0.0;
                           for (std::size_t j = 0; j < c; ++j) acc += g[i * c + j] * x[i * c + j];
                           gs[i] += acc;
                         }
                       }
                     });
}

Tensor gather_rows(const Tensor& a, std::span<const std::uint32_t> index) {
  require_rank2("gather_rows", a);
  const std::size_t n = a.rows();
  const std::size_t c = a.cols();
  for (const auto r : index) {
    if (r >= n) throw IndexError("gather_rows", r, n);
  }
  std::vector<double> out(index.size() * c);
  const auto x = a.data();
  for (std::size_t r = 0; r < index.size(); ++r) {
    std::copy_n(x.data() + index[r] * c, c, out.data() + r * c);
  }
  return make_result(OpKind::kGatherRows, {&a}, {index.size(), c}, std::move(out),
                     [idx = std::vector<std::uint32_t>(index.begin(), index.end()), c](
                         std::span<const double> g, GradSink& sink) {
                       auto ga = sink.grad(0);
                       const auto& kt = kernels::active();
                       for (std::size_t r = 0; r < idx.size(); ++r) {
                         kt.axpy(ga.data() + idx[r] * c, 1.0, g.data() + r * c, c);
                       }
                     });
}

Tensor scatter_add_rows(const Tensor& a, std::span<const std::uint32_t> index, std::size_t out_rows) {
  require_rank2("scatter_add_rows", a);
  const std::size_t c = a.cols();
  if (index.size() != a.rows()) {
    throw ShapeError("scatter_add_rows", {a.shape(), {index.size()}}, "one index per row required");
  }
  for (const auto r : index) {
    if (r >= out_rows) throw IndexError("scatter_add_rows", r, out_rows);
  }
  std::vector<double> out(out_rows * c, 0.0);
  const auto x = a.data();
  const auto& kt = kernels::active();
  for (std::size_t r = 0; r < index.size(); ++r) kt.axpy(out.data() + index[r] * c, 1.0, x.data() + r * c, c);
  return make_result(OpKind::kScatterAddRows, {&a}, {out_rows, c}, std::move(out),
                     [idx = std::vector<std::uint32_t>(index.begin(), index.end()), c](
                         std::span<const double> g, GradSink& sink) {
                       auto ga = sink.grad(0);
                       const auto& kt = kernels::active();
                       for (std::size_t r = 0; r < idx.size(); ++r) {
                         kt.axpy(ga.data() + r * c, 1.0, g.data() + idx[r] * c, c);
                       }
                     });
}

Tensor row_normalize(const Tensor& a) {
  require_rank2("row_normalize", a);
  const std::size_t n = a.rows();
  const std::size_t c = a.cols();
  std::vector<double> sums(n);
  std::vector<double> out(a.numel());
  const auto x = a.data();
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < c; ++j) acc += x[i * c + j];
    if (acc == 0.0) throw InvariantError("row_normalize: row " + std::to_string(i) + " sums to zero");
    sums[i] = acc;
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] = x[i * c + j] / acc;
  }
  auto y = std::make_shared<const std::vector<double>>(out);
  return make_result(OpKind::kRowNormalize, {&a}, a.shape(), std::move(out),
                     [y = std::move(y), sums = std::move(sums), n, c](std::span<const double> g, GradSink& sink) {
                       auto ga = sink.grad(0);
                       for (std::size_t i = 0; i < n; ++i) {
                         double proj = 0.0;
                         for (std::size_t j = 0; j < c; ++j) proj += g[i * c + j] * (*y)[i * c + j];
                         for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += (g[i * c + j] - proj) / sums[i];
                       }
                     });
}

Tensor concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) throw ShapeError("concat_cols", {}, "no operands");
  const std::size_t n = parts[0].rows();
  std::vector<std::size_t> widths;
  std::vector<const Tensor*> inputs;
  std::size_t total = 0;
  for (const Tensor& p : parts) {
    require_rank2("concat_cols", p);
    if (p.rows() != n) {
      std::vector<Shape> shapes;
      for (const Tensor& q : parts) shapes.push_back(q.shape());
      throw ShapeError("concat_cols", shapes, "row counts differ");
    }
    widths.push_back(p.cols());
    inputs.push_back(&p);
    total += p.cols();
  }
  std::vector<double> out(n * total);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const auto x = parts[k].data();
    const std::size_t w = widths[k];
    for (std::size_t i = 0; i < n; ++i) std::copy_n(x.data() + i * w, w, out.data() + i * total + offset);
    offset += w;
  }
  return make_result(OpKind::kConcatCols, std::span<const Tensor* const>(inputs), {n, total}, std::move(out),
                     [widths, n, total](std::span<const double> g, GradSink& sink) {
                       std::size_t offset = 0;
                       for (std::size_t k = 0; k < widths.size(); ++k) {
                         const std::size_t w = widths[k];
                         if (auto gk = sink.grad(k); !gk.empty()) {
                           for (std::size_t i = 0; i < n; ++i) {
                             for (std::size_t j = 0; j < w; ++j) gk[i * w + j] += g[i * total + offset + j];
                           }
                         }
                         offset += w;
                       }
                     });
}

Tensor softmax_rows(const Tensor& a) {
  require_rank2("softmax_rows", a);
  const std::size_t n = a.rows();
  const std::size_t c = a.cols();
  std::vector<double> out = a.to_vector();
  for (std::size_t i = 0; i < n; ++i) kernels::softmax_inplace(std::span<double>(out.data() + i * c, c));
  auto y = std::make_shared<const std::vector<double>>(out);
  return make_result(OpKind::kSoftmaxRows, {&a}, a.shape(), std::move(out),
                     [y = std::move(y), n, c](std::span<const double> g, GradSink& sink) {
                       auto ga = sink.grad(0);
                       const auto& kt = kernels::active();
                       for (std::size_t i = 0; i < n; ++i) {
                         const double* yi = y->data() + i * c;
                         const double* gi = g.data() + i * c;
                         const double proj = kt.dot(gi, yi, c);
                         for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += yi[j] * (gi[j] - proj);
                       }
                     });
}

Tensor stop_gradient(const Tensor& x) {
  return make_result(OpKind::kStopGradient, {&x}, x.shape(), x.to_vector(), nullptr);
}

}  // namespace ops

}  // namespace sctn
