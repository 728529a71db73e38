#include "uqgfn/nn/dense_net.hpp"

#include <cmath>

#include "uqgfn/common/errors.hpp"
#include "uqgfn/nn/ops.hpp"

namespace uqgfn::nn {

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::kRelu: return "relu";
    case Activation::kTanh: return "tanh";
    case Activation::kIdentity: return "identity";
  }
  return "identity";
}

Activation activation_from_string(std::string_view name) {
  if (name == "relu") return Activation::kRelu;
  if (name == "tanh") return Activation::kTanh;
  if (name == "identity") return Activation::kIdentity;
  throw UsageError("unknown activation '" + std::string(name) + "'");
}

Matrix glorot_uniform(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::uniform_real_distribution<double> dist(-limit, limit);
  Matrix m(rows, cols);
  // Column-major fill order is part of the determinism contract.
  for (Eigen::Index c = 0; c < cols; ++c)
    for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = dist(rng);
  return m;
}

DenseNet::DenseNet(const std::vector<int>& dims, Activation hidden, Activation output, Rng& rng) {
  if (dims.size() < 2) throw UsageError("DenseNet needs at least input and output dimensions");
  for (int d : dims)
    if (d <= 0) throw UsageError("DenseNet dimensions must be positive");
  for (std::size_t k = 0; k + 1 < dims.size(); ++k) {
    DenseLayer layer;
    layer.weight = Parameter(glorot_uniform(dims[k + 1], dims[k], rng));
    layer.bias = Parameter(Matrix::Zero(dims[k + 1], 1));
    layer.activation = (k + 2 == dims.size()) ? output : hidden;
    layers_.push_back(std::move(layer));
  }
}

DenseNet::DenseNet(std::vector<DenseLayer> layers) : layers_(std::move(layers)) { check_chain(); }

void DenseNet::check_chain() const {
  if (layers_.empty()) throw UsageError("DenseNet has no layers");
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    const auto& l = layers_[k];
    if (l.bias.value.rows() != l.weight.value.rows() || l.bias.value.cols() != 1)
      throw UsageError("DenseNet layer " + std::to_string(k) + ": bias shape mismatch");
    if (k > 0 && layers_[k - 1].output_dim() != l.input_dim())
      throw UsageError("DenseNet layer " + std::to_string(k) + ": dimensions do not chain");
  }
}

Eigen::Index DenseNet::input_dim() const { return layers_.empty() ? 0 : layers_.front().input_dim(); }
Eigen::Index DenseNet::output_dim() const { return layers_.empty() ? 0 : layers_.back().output_dim(); }

namespace {

void activate(Matrix& m, Activation a) {
  switch (a) {
    case Activation::kRelu: m = m.cwiseMax(0.0); break;
    case Activation::kTanh: m = m.array().tanh().matrix(); break;
    case Activation::kIdentity: break;
  }
}

Var activate(Var v, Activation a) {
  switch (a) {
    case Activation::kRelu: return relu(v);
    case Activation::kTanh: return nn::tanh(v);
    case Activation::kIdentity: return v;
  }
  return v;
}

}  // namespace

Matrix DenseNet::forward(const Matrix& x) const {
  if (x.rows() != input_dim())
    throw UsageError("DenseNet::forward: expected input dimension " + std::to_string(input_dim()) +
                     ", got " + std::to_string(x.rows()));
  Matrix h = x;
  for (const auto& l : layers_) {
    Matrix z = l.weight.value * h;
    z.colwise() += l.bias.value.col(0);
    activate(z, l.activation);
    h = std::move(z);
  }
  return h;
}

Vector DenseNet::forward(const Vector& x) const {
  Matrix m = forward(Matrix(x));
  return m.col(0);
}

Var DenseNet::forward(Tape& tape, Var x) {
  if (x.rows() != input_dim())
    throw UsageError("DenseNet::forward: expected input dimension " + std::to_string(input_dim()) +
                     ", got " + std::to_string(x.rows()));
  Var h = x;
  for (auto& l : layers_) {
    Var w = tape.parameter(l.weight);
    Var b = tape.parameter(l.bias);
    h = activate(add(matmul(w, h), b), l.activation);
  }
  return h;
}

std::vector<Parameter*> DenseNet::parameters() {
  std::vector<Parameter*> out;
  for (auto& l : layers_) {
    out.push_back(&l.weight);
    out.push_back(&l.bias);
  }
  return out;
}

nlohmann::json matrix_to_json(const Matrix& m) {
  nlohmann::json data = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

Matrix matrix_from_json(const nlohmann::json& doc) {
  const auto rows = doc.at("rows").get<Eigen::Index>();
  const auto cols = doc.at("cols").get<Eigen::Index>();
  const auto& data = doc.at("data");
  if (!data.is_array() || static_cast<Eigen::Index>(data.size()) != rows * cols)
    throw UsageError("matrix JSON: data length does not match shape");
  Matrix m(rows, cols);
  std::size_t k = 0;
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data[k++].get<double>();
  return m;
}

nlohmann::json DenseNet::to_json() const {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : layers_) {
    layers.push_back({{"weight", matrix_to_json(l.weight.value)},
                      {"bias", matrix_to_json(l.bias.value)},
                      {"activation", std::string(to_string(l.activation))}});
  }
  return {{"type", "dense"}, {"layers", std::move(layers)}};
}

DenseNet DenseNet::from_json(const nlohmann::json& doc) {
  std::vector<DenseLayer> layers;
  for (const auto& l : doc.at("layers")) {
    DenseLayer layer;
    layer.weight = Parameter(matrix_from_json(l.at("weight")));
    layer.bias = Parameter(matrix_from_json(l.at("bias")));
    layer.activation = activation_from_string(l.at("activation").get<std::string>());
    layers.push_back(std::move(layer));
  }
  return DenseNet(std::move(layers));
}

}  // namespace uqgfn::nn
