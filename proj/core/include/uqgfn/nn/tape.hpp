#pragma once

#include <functional>
#include <initializer_list>
#include <span>
#include <vector>

#include "uqgfn/common/linalg.hpp"

namespace uqgfn::nn {

/// Trainable tensor with an accumulated gradient of the same shape.
struct Parameter {
  Matrix value;
  Matrix grad;

  Parameter() = default;
  explicit Parameter(Matrix v) : value(std::move(v)), grad(Matrix::Zero(value.rows(), value.cols())) {}

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
  Eigen::Index size() const { return value.size(); }
};

class Tape;

/// Handle to a node recorded on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;

  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  double scalar() const;

  Tape* tape() const { return tape_; }
  int index() const { return index_; }
  bool valid() const { return tape_ != nullptr && index_ >= 0; }

 private:
  friend class Tape;
  Var(Tape* tape, int index) : tape_(tape), index_(index) {}

  Tape* tape_ = nullptr;
  int index_ = -1;
};

/// Reverse-mode gradient recorder over dense matrices.
///
/// Nodes are appended in evaluation order, so a reverse sweep over the node
/// list visits every node after all of its consumers. Gradients reaching a
/// node created by parameter() are added into Parameter::grad by backward().
class Tape {
 public:
  /// Propagates the gradient of node `self` into its parents.
  using Backprop = std::function<void(Tape& tape, int self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  Var parameter(Parameter& p);
  /// Leaf whose gradient can be read back with grad() after backward().
  Var variable(Matrix value);

  /// Seeds d(loss)/d(loss) = 1 and sweeps the tape backwards.
  /// Throws UsageError if `loss` was not recorded on this tape or is not 1x1.
  void backward(Var loss);

  const Matrix& value(Var v) const;
  /// Gradient reached during the last backward(); zeros if none reached.
  Matrix grad(Var v) const;

  std::size_t size() const { return nodes_.size(); }

  // Op-implementer interface.
  Var record(Matrix value, std::initializer_list<Var> parents, Backprop backprop);
  Var record(Matrix value, std::span<const Var> parents, Backprop backprop);
  bool requires_grad(int index) const { return nodes_[static_cast<std::size_t>(index)].requires_grad; }
  const Matrix& value_at(int index) const { return nodes_[static_cast<std::size_t>(index)].value; }
  const Matrix& grad_at(int index) const { return nodes_[static_cast<std::size_t>(index)].grad; }
  /// Adds `delta` into the gradient buffer of node `index` (no-op if it needs no gradient).
  void accumulate(int index, const Matrix& delta);
  template <class Expr>
  void accumulate_expr(int index, const Expr& delta) {
    Node& n = nodes_[static_cast<std::size_t>(index)];
    if (!n.requires_grad) return;
    if (n.grad.size() == 0) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
    n.grad += delta;
  }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    Backprop backprop;
    Parameter* param = nullptr;
    bool requires_grad = false;
  };

  Var push(Node node);
  void check_owned(Var v) const;

  std::vector<Node> nodes_;
};

}  // namespace uqgfn::nn
