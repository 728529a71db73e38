#include "uqgfn/nn/adam.hpp"

#include <cmath>

#include "uqgfn/common/errors.hpp"

namespace uqgfn::nn {

void Adam::add(Parameter& p, double learning_rate) {
  slots_.push_back({&p, Matrix::Zero(p.value.rows(), p.value.cols()),
                    Matrix::Zero(p.value.rows(), p.value.cols()), learning_rate});
}

void Adam::add(std::span<Parameter* const> params, double learning_rate) {
  for (Parameter* p : params) add(*p, learning_rate);
}

void Adam::step() {
  ++step_;
  const double t = static_cast<double>(step_);
  const double c1 = 1.0 - std::pow(config_.beta1, t);
  const double c2 = 1.0 - std::pow(config_.beta2, t);
  for (Slot& s : slots_) {
    Parameter& p = *s.param;
    if (p.grad.rows() != s.m.rows() || p.grad.cols() != s.m.cols() || p.value.rows() != s.m.rows() ||
        p.value.cols() != s.m.cols())
      throw UsageError("Adam::step: parameter/gradient shape does not match optimiser state");
    s.m = config_.beta1 * s.m + (1.0 - config_.beta1) * p.grad;
    s.v = config_.beta2 * s.v + (1.0 - config_.beta2) * p.grad.cwiseProduct(p.grad);
    const double lr = s.learning_rate;
    const double eps = config_.epsilon;
    p.value.array() -= lr * (s.m.array() / c1) / ((s.v.array() / c2).sqrt() + eps);
  }
}

void Adam::zero_grad() {
  for (Slot& s : slots_) s.param->zero_grad();
}

}  // namespace uqgfn::nn
