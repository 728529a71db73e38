#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "uqgfn/common/rng.hpp"
#include "uqgfn/nn/tape.hpp"

namespace uqgfn::nn {

enum class Activation { kRelu, kTanh, kIdentity };

std::string_view to_string(Activation a);
Activation activation_from_string(std::string_view name);

struct DenseLayer {
  Parameter weight;  // out x in
  Parameter bias;    // out x 1
  Activation activation = Activation::kIdentity;

  Eigen::Index input_dim() const { return weight.value.cols(); }
  Eigen::Index output_dim() const { return weight.value.rows(); }
};

/// Fully connected feedforward network operating on column batches.
class DenseNet {
 public:
  DenseNet() = default;
  /// `dims` = {input, hidden..., output}. Weights are Glorot-uniform, biases zero.
  DenseNet(const std::vector<int>& dims, Activation hidden, Activation output, Rng& rng);
  explicit DenseNet(std::vector<DenseLayer> layers);

  Eigen::Index input_dim() const;
  Eigen::Index output_dim() const;
  std::size_t num_layers() const { return layers_.size(); }

  /// Inference on a batch (input_dim x B). Throws UsageError on dimension mismatch.
  Matrix forward(const Matrix& x) const;
  Vector forward(const Vector& x) const;
  /// Same computation recorded on `tape` so gradients reach the parameters.
  Var forward(Tape& tape, Var x);

  std::vector<Parameter*> parameters();
  std::vector<DenseLayer>& layers() { return layers_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }

  nlohmann::json to_json() const;
  static DenseNet from_json(const nlohmann::json& doc);

 private:
  void check_chain() const;

  std::vector<DenseLayer> layers_;
};

/// Glorot-uniform matrix: entries in +-sqrt(6 / (fan_in + fan_out)).
Matrix glorot_uniform(Eigen::Index rows, Eigen::Index cols, Rng& rng);

nlohmann::json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const nlohmann::json& doc);

}  // namespace uqgfn::nn
