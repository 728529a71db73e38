#pragma once

#include <optional>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "uqgfn/common/rng.hpp"
#include "uqgfn/nn/dense_net.hpp"

namespace uqgfn::embed {

/// kCategorical: per-cell cross-entropy. kBernoulli: binary cross-entropy on every
/// one-hot entry of the per-cell categorical output.
enum class Reconstruction { kCategorical, kBernoulli };

struct VaeConfig {
  int cells = 100;
  int levels = 3;
  int hidden = 128;
  int latent = 2;
  double beta = 4.0;
  int epochs = 1000;
  int batch_size = 50;
  double learning_rate = 1e-3;
  /// The KL weight ramps linearly from 0 to beta over this many epochs.
  int warmup_epochs = 0;
  Reconstruction reconstruction = Reconstruction::kBernoulli;

  int input_dim() const { return cells * levels; }

  nlohmann::json to_json() const;
  static VaeConfig from_json(const nlohmann::json& doc);
};

struct VaeLoss {
  double total = 0.0;
  double reconstruction = 0.0;
  double kl = 0.0;
};

/// KL(N(mean, exp(log_var)) || N(0, I)) per column.
RowVector gaussian_kl(const Matrix& mean, const Matrix& log_var);

/// Dense beta-VAE over level-major one-hot grids (entry level * cells + cell).
/// The decoder emits one 3-way categorical distribution per cell.
class BetaVae {
 public:
  BetaVae() = default;
  BetaVae(const VaeConfig& config, Rng& rng);

  const VaeConfig& config() const { return config_; }

  /// Latent means and log-variances (latent x B) of one-hot columns (input_dim x B).
  std::pair<Matrix, Matrix> encode(const Matrix& x) const;
  /// Per-cell level probabilities (input_dim x B, level-major) of latent columns.
  Matrix decode(const Matrix& z) const;
  /// Most probable level of each cell.
  std::vector<int> decode_levels(const Vector& z) const;

  /// Batch-mean loss with the reparameterisation z = mean + exp(log_var / 2) * noise.
  /// `kl_weight` defaults to beta.
  nn::Var loss(nn::Tape& tape, const Matrix& x, const Matrix& noise, VaeLoss* parts = nullptr,
               std::optional<double> kl_weight = std::nullopt);

  std::vector<nn::Parameter*> parameters();

  nlohmann::json to_json() const;
  static BetaVae from_json(const nlohmann::json& doc);

 private:
  nn::Var reconstruction_loss(nn::Tape& tape, nn::Var logits, const Matrix& x) const;

  VaeConfig config_;
  nn::DenseNet encoder_;
  nn::DenseNet decoder_;
};

/// Trains with Adam on shuffled minibatches; returns the mean loss per epoch.
/// Throws NumericalError on a non-finite loss.
std::vector<double> train_vae(BetaVae& vae, const Matrix& data, Rng& rng);

/// Fraction of cells whose decoded argmax level matches the one-hot input.
double reconstruction_accuracy(const BetaVae& vae, const Matrix& data);

}  // namespace uqgfn::embed
