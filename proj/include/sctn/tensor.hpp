// Copyright Contributors to the sctn-flow project
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Dense 64-bit tensors with a reverse-mode tape.
//
// A Tensor is an immutable value (shape + shared data). A tensor that carries
// a tape node participates in differentiation; everything else is a constant.
// Operations record a node whenever at least one operand is taped. All taped
// operands of one operation must live on the same Tape, and the Tape must
// outlive every tensor recorded on it.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <limits>
#include <memory>
#include <span>
#include <string_view>
#include <vector>

#include "sctn/errors.hpp"

namespace sctn {

using Shape = std::vector<std::size_t>;
using NodeId = std::uint32_t;
inline constexpr NodeId kNoNode = std::numeric_limits<NodeId>::max();

class Tape;

// When enabled (default), tensor construction rejects NaN/Inf.
bool checked_mode() noexcept;
void set_checked_mode(bool enabled) noexcept;

class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> values);

  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double value);
  static Tensor scalar(double value);
  // rows x cols from a row-major initializer.
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values);
  static Tensor column(std::vector<double> values);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t numel() const noexcept { return data_ ? data_->size() : 0; }
  std::size_t rows() const;
  std::size_t cols() const;
  bool empty() const noexcept { return numel() == 0; }

  std::span<const double> data() const noexcept {
    return data_ ? std::span<const double>(*data_) : std::span<const double>();
  }
  std::vector<double> to_vector() const { return {data().begin(), data().end()}; }
  double operator[](std::size_t i) const { return (*data_)[i]; }
  double at(std::size_t r, std::size_t c) const { return (*data_)[r * cols() + c]; }
  double item() const;

  bool taped() const noexcept { return node_ != kNoNode; }
  NodeId node() const noexcept { return node_; }
  Tape* tape() const noexcept { return tape_; }

  // Same values, no tape node.
  Tensor detached() const;

  bool same_values(const Tensor& other) const noexcept;

 private:
  friend class Tape;
  Tensor(Shape shape, std::shared_ptr<const std::vector<double>> data, Tape* tape, NodeId node)
      : shape_(std::move(shape)), data_(std::move(data)), tape_(tape), node_(node) {}

  Shape shape_;
  std::shared_ptr<const std::vector<double>> data_;
  Tape* tape_ = nullptr;
  NodeId node_ = kNoNode;
};

enum class OpKind : std::uint8_t {
  kLeaf,
  kAdd,
  kSub,
  kMul,
  kScale,
  kAddBias,
  kMatmul,
  kMatmulNT,
  kExp,
  kRelu,
  kSum,
  kRowSum,
  kL1Norm,
  kL2Norm,
  kDivRows,
  kMulRows,
  kGatherRows,
  kScatterAddRows,
  kRowNormalize,
  kConcatCols,
  kSoftmaxRows,
  kStopGradient,
  kSparseConv,
  kSinkhorn,
};

std::string_view op_name(OpKind kind) noexcept;

// Receives gradients for the inputs of a node during backward. grad(k) is an
// empty span when input k is a constant.
class GradSink {
 public:
  virtual ~GradSink() = default;
  virtual std::span<double> grad(std::size_t input) = 0;
};

using BackwardFn = std::function<void(std::span<const double> grad_out, GradSink& sink)>;

class Gradients {
 public:
  // Gradient with respect to x; zeros when x received none.
  Tensor wrt(const Tensor& x) const;
  bool has(const Tensor& x) const;

 private:
  friend class Tape;
  std::vector<std::vector<double>> by_node_;
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Registers a differentiable leaf holding value's data.
  Tensor variable(const Tensor& value);

  // Records a node for result data computed from `inputs`. Constant inputs are
  // allowed; they receive no gradient. Returns an untaped tensor if no input
  // is taped.
  Tensor record(OpKind kind, std::span<const Tensor* const> inputs, Shape shape,
                std::vector<double> values, BackwardFn backward);
  Tensor record(OpKind kind, std::initializer_list<const Tensor*> inputs, Shape shape,
                std::vector<double> values, BackwardFn backward) {
    return record(kind, std::span<const Tensor* const>(inputs.begin(), inputs.size()),
                  std::move(shape), std::move(values), std::move(backward));
  }

  // Reverse sweep from a scalar taped loss.
  Gradients backward(const Tensor& loss) const;

  std::size_t size() const noexcept { return nodes_.size(); }
  OpKind kind(NodeId id) const { return nodes_.at(id).kind; }

 private:
  struct Node {
    OpKind kind;
    std::vector<NodeId> inputs;  // kNoNode for constant operands
    std::size_t numel;
    BackwardFn backward;
  };
  std::vector<Node> nodes_;
};

// Finds the shared tape of the operands; nullptr when none is taped.
// Throws if taped operands disagree.
Tape* common_tape(std::string_view primitive, std::span<const Tensor* const> inputs);
inline Tape* common_tape(std::string_view primitive, std::initializer_list<const Tensor*> inputs) {
  return common_tape(primitive, std::span<const Tensor* const>(inputs.begin(), inputs.size()));
}

// Builds the result: taped if any operand is, constant otherwise.
Tensor make_result(OpKind kind, std::initializer_list<const Tensor*> inputs, Shape shape,
                   std::vector<double> values, BackwardFn backward);
Tensor make_result(OpKind kind, std::span<const Tensor* const> inputs, Shape shape,
                   std::vector<double> values, BackwardFn backward);

namespace ops {

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
// alpha * a + beta
Tensor scale(const Tensor& a, double alpha, double beta = 0.0);
// a (n x c) plus a bias row b (1 x c or c) broadcast over rows.
Tensor add_bias(const Tensor& a, const Tensor& b);
Tensor matmul(const Tensor& a, const Tensor& b);
// a * b^T for a (n x k), b (m x k).
Tensor matmul_nt(const Tensor& a, const Tensor& b);
Tensor exp(const Tensor& a);
// Subgradient at 0 is 0.
Tensor relu(const Tensor& a);
// Sum of all entries, scalar result. Left-to-right order.
Tensor sum(const Tensor& a);
Tensor row_sum(const Tensor& a);
// Row-wise norms, n x 1.
Tensor l1_norm(const Tensor& a);
Tensor l2_norm(const Tensor& a);
// a_ij / d_i and a_ij * s_i with d, s of shape n x 1.
Tensor div_rows(const Tensor& a, const Tensor& d);
Tensor mul_rows(const Tensor& a, const Tensor& s);
Tensor gather_rows(const Tensor& a, std::span<const std::uint32_t> index);
Tensor scatter_add_rows(const Tensor& a, std::span<const std::uint32_t> index,
                        std::size_t out_rows);
// Rows divided by their sum.
Tensor row_normalize(const Tensor& a);
Tensor concat_cols(std::span<const Tensor> parts);
Tensor softmax_rows(const Tensor& a);
// Identity forward; blocks all gradient to x.
Tensor stop_gradient(const Tensor& x);

}  // namespace ops

}  // namespace sctn
