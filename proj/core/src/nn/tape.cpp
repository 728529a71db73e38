#include "uqgfn/nn/tape.hpp"

#include "uqgfn/common/errors.hpp"

namespace uqgfn::nn {

const Matrix& Var::value() const {
  if (!valid()) throw UsageError("use of an unbound Var");
  return tape_->value(*this);
}

double Var::scalar() const {
  const Matrix& v = value();
  if (v.rows() != 1 || v.cols() != 1) throw UsageError("Var::scalar on a non-1x1 value");
  return v(0, 0);
}

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

void Tape::check_owned(Var v) const {
  if (v.tape_ != this || v.index_ < 0 || static_cast<std::size_t>(v.index_) >= nodes_.size())
    throw UsageError("Var does not belong to this tape");
}

Var Tape::constant(Matrix value) {
  Node n;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Tape::parameter(Parameter& p) {
  Node n;
  n.value = p.value;
  n.param = &p;
  n.requires_grad = true;
  return push(std::move(n));
}

Var Tape::variable(Matrix value) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = true;
  return push(std::move(n));
}

Var Tape::record(Matrix value, std::initializer_list<Var> parents, Backprop backprop) {
  return record(std::move(value), std::span<const Var>(parents.begin(), parents.size()), std::move(backprop));
}

Var Tape::record(Matrix value, std::span<const Var> parents, Backprop backprop) {
  Node n;
  n.value = std::move(value);
  for (Var p : parents) {
    check_owned(p);
    if (nodes_[static_cast<std::size_t>(p.index_)].requires_grad) n.requires_grad = true;
  }
  if (n.requires_grad) n.backprop = std::move(backprop);
  return push(std::move(n));
}

void Tape::accumulate(int index, const Matrix& delta) { accumulate_expr(index, delta); }

void Tape::backward(Var loss) {
  if (loss.tape_ != this) throw UsageError("loss was not recorded on this tape");
  check_owned(loss);
  Node& root = nodes_[static_cast<std::size_t>(loss.index_)];
  if (root.value.rows() != 1 || root.value.cols() != 1)
    throw UsageError("backward() requires a 1x1 loss");
  for (Node& n : nodes_) n.grad.resize(0, 0);
  if (!root.requires_grad) return;
  root.grad = Matrix::Ones(1, 1);
  for (int i = loss.index_; i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (!n.requires_grad || n.grad.size() == 0) continue;
    if (n.backprop) n.backprop(*this, i);
    if (n.param != nullptr) n.param->grad += nodes_[static_cast<std::size_t>(i)].grad;
  }
}

const Matrix& Tape::value(Var v) const {
  check_owned(v);
  return nodes_[static_cast<std::size_t>(v.index_)].value;
}

Matrix Tape::grad(Var v) const {
  check_owned(v);
  const Node& n = nodes_[static_cast<std::size_t>(v.index_)];
  if (n.grad.size() == 0) return Matrix::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

}  // namespace uqgfn::nn
