#pragma once

#include <span>
#include <vector>

#include "uqgfn/nn/tape.hpp"

namespace uqgfn::nn {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Bias-corrected adaptive-moment optimiser over a set of Parameters.
class Adam {
 public:
  explicit Adam(AdamConfig config = {}) : config_(config) {}

  /// Registers parameters; `learning_rate` overrides the default for this group.
  void add(std::span<Parameter* const> params, double learning_rate);
  void add(std::span<Parameter* const> params) { add(params, config_.learning_rate); }
  void add(Parameter& p, double learning_rate);

  /// Applies one update from each parameter's current `grad`.
  void step();
  void zero_grad();

  long steps() const { return step_; }
  const AdamConfig& config() const { return config_; }

 private:
  struct Slot {
    Parameter* param;
    Matrix m;
    Matrix v;
    double learning_rate;
  };

  AdamConfig config_;
  std::vector<Slot> slots_;
  long step_ = 0;
};

}  // namespace uqgfn::nn
