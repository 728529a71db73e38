#include "uqgfn/embed/beta_vae.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "uqgfn/common/errors.hpp"
#include "uqgfn/nn/adam.hpp"
#include "uqgfn/nn/ops.hpp"

namespace uqgfn::embed {

nlohmann::json VaeConfig::to_json() const {
  return {{"cells", cells},   {"levels", levels}, {"hidden", hidden},         {"latent", latent},
          {"beta", beta},     {"epochs", epochs}, {"batch_size", batch_size}, {"learning_rate", learning_rate},
          {"warmup_epochs", warmup_epochs},
          {"reconstruction", reconstruction == Reconstruction::kBernoulli ? "bernoulli" : "categorical"}};
}

VaeConfig VaeConfig::from_json(const nlohmann::json& doc) {
  VaeConfig c;
  c.cells = doc.value("cells", c.cells);
  c.levels = doc.value("levels", c.levels);
  c.hidden = doc.value("hidden", c.hidden);
  c.latent = doc.value("latent", c.latent);
  c.beta = doc.value("beta", c.beta);
  c.epochs = doc.value("epochs", c.epochs);
  c.batch_size = doc.value("batch_size", c.batch_size);
  c.warmup_epochs = doc.value("warmup_epochs", c.warmup_epochs);
  const std::string recon = doc.value("reconstruction", std::string("bernoulli"));
  if (recon != "bernoulli" && recon != "categorical") throw UsageError("unknown VAE reconstruction loss: " + recon);
  c.reconstruction = recon == "bernoulli" ? Reconstruction::kBernoulli : Reconstruction::kCategorical;
  c.learning_rate = doc.value("learning_rate", c.learning_rate);
  if (c.cells < 1 || c.levels < 2 || c.hidden < 1 || c.latent < 1 || c.beta < 0.0 || c.epochs < 0 || c.warmup_epochs < 0 ||
      c.batch_size < 1 || !(c.learning_rate > 0.0))
    throw UsageError("invalid VAE configuration");
  return c;
}

RowVector gaussian_kl(const Matrix& mean, const Matrix& log_var) {
  return 0.5 * (log_var.array().exp() + mean.array().square() - 1.0 - log_var.array()).colwise().sum();
}

BetaVae::BetaVae(const VaeConfig& config, Rng& rng)
    : config_(config),
      encoder_({config.input_dim(), config.hidden, 2 * config.latent}, nn::Activation::kRelu,
               nn::Activation::kIdentity, rng),
      decoder_({config.latent, config.hidden, config.input_dim()}, nn::Activation::kRelu, nn::Activation::kIdentity,
               rng) {}

std::pair<Matrix, Matrix> BetaVae::encode(const Matrix& x) const {
  if (x.rows() != config_.input_dim()) throw UsageError("VAE input has the wrong size");
  const Matrix h = encoder_.forward(x);
  return {h.topRows(config_.latent), h.bottomRows(config_.latent)};
}

Matrix BetaVae::decode(const Matrix& z) const {
  const Matrix logits = decoder_.forward(z);
  const int n = config_.cells;
  Matrix p(logits.rows(), logits.cols());
  for (Eigen::Index b = 0; b < logits.cols(); ++b)
    for (int c = 0; c < n; ++c) {
      double m = -std::numeric_limits<double>::infinity();
      for (int l = 0; l < config_.levels; ++l) m = std::max(m, logits(l * n + c, b));
      double s = 0.0;
      for (int l = 0; l < config_.levels; ++l) s += p(l * n + c, b) = std::exp(logits(l * n + c, b) - m);
      for (int l = 0; l < config_.levels; ++l) p(l * n + c, b) /= s;
    }
  return p;
}

std::vector<int> BetaVae::decode_levels(const Vector& z) const {
  const Matrix p = decode(z);
  std::vector<int> out(static_cast<std::size_t>(config_.cells));
  for (int c = 0; c < config_.cells; ++c) {
    int best = 0;
    for (int l = 1; l < config_.levels; ++l)
      if (p(l * config_.cells + c, 0) > p(best * config_.cells + c, 0)) best = l;
    out[static_cast<std::size_t>(c)] = best;
  }
  return out;
}

nn::Var BetaVae::reconstruction_loss(nn::Tape& tape, nn::Var logits, const Matrix& x) const {
  const int n = config_.cells, levels = config_.levels;
  Matrix shift = logits.value().topRows(n);
  for (int l = 1; l < levels; ++l) shift = shift.cwiseMax(logits.value().middleRows(l * n, n));
  // The shift is held constant; its gradient contributions cancel exactly.
  nn::Var m = tape.constant(shift);
  std::vector<nn::Var> centred, e;
  for (int l = 0; l < levels; ++l) {
    centred.push_back(nn::sub(nn::slice_rows(logits, l * n, n), m));
    e.push_back(nn::exp(centred.back()));
  }
  nn::Var s = e[0];
  for (int l = 1; l < levels; ++l) s = nn::add(s, e[static_cast<std::size_t>(l)]);
  nn::Var log_s = nn::log(s);
  nn::Var total;
  for (int l = 0; l < levels; ++l) {
    const Matrix xl = x.middleRows(l * n, n);
    nn::Var term = nn::sum(nn::mul(nn::sub(log_s, centred[static_cast<std::size_t>(l)]), tape.constant(xl)));
    if (config_.reconstruction == Reconstruction::kBernoulli) {
      nn::Var others;
      for (int k = 0; k < levels; ++k)
        if (k != l) others = others.valid() ? nn::add(others, e[static_cast<std::size_t>(k)]) : e[static_cast<std::size_t>(k)];
      nn::Var log_miss = nn::sub(log_s, nn::log(nn::clamp(others, 1e-300, std::numeric_limits<double>::infinity())));
      term = nn::add(term, nn::sum(nn::mul(log_miss, tape.constant(Matrix(1.0 - xl.array())))));
    }
    total = total.valid() ? nn::add(total, term) : term;
  }
  return total;
}

nn::Var BetaVae::loss(nn::Tape& tape, const Matrix& x, const Matrix& noise, VaeLoss* parts,
                      std::optional<double> kl_weight) {
  if (x.rows() != config_.input_dim() || noise.rows() != config_.latent || noise.cols() != x.cols())
    throw UsageError("VAE loss: shape mismatch");
  const double batch = static_cast<double>(x.cols());
  nn::Var h = encoder_.forward(tape, tape.constant(x));
  nn::Var mean = nn::slice_rows(h, 0, config_.latent);
  nn::Var log_var = nn::slice_rows(h, config_.latent, config_.latent);
  nn::Var z = nn::add(mean, nn::mul(nn::exp(nn::scale(log_var, 0.5)), tape.constant(noise)));
  nn::Var logits = decoder_.forward(tape, z);
  nn::Var recon = nn::scale(reconstruction_loss(tape, logits, x), 1.0 / batch);
  nn::Var kl = nn::scale(
      nn::sum(nn::sub(nn::add(nn::exp(log_var), nn::square(mean)), nn::add_scalar(log_var, 1.0))), 0.5 / batch);
  nn::Var total = nn::add(recon, nn::scale(kl, kl_weight.value_or(config_.beta)));
  if (parts) *parts = {total.scalar(), recon.scalar(), kl.scalar()};
  return total;
}

std::vector<nn::Parameter*> BetaVae::parameters() {
  auto p = encoder_.parameters();
  for (auto* q : decoder_.parameters()) p.push_back(q);
  return p;
}

nlohmann::json BetaVae::to_json() const {
  return {{"type", "beta-vae"}, {"config", config_.to_json()}, {"encoder", encoder_.to_json()},
          {"decoder", decoder_.to_json()}};
}

BetaVae BetaVae::from_json(const nlohmann::json& doc) {
  if (doc.at("type") != "beta-vae") throw UsageError("not a beta-vae checkpoint");
  BetaVae v;
  v.config_ = VaeConfig::from_json(doc.at("config"));
  v.encoder_ = nn::DenseNet::from_json(doc.at("encoder"));
  v.decoder_ = nn::DenseNet::from_json(doc.at("decoder"));
  if (v.encoder_.input_dim() != v.config_.input_dim() || v.decoder_.output_dim() != v.config_.input_dim())
    throw UsageError("beta-vae checkpoint does not match its configuration");
  return v;
}

std::vector<double> train_vae(BetaVae& vae, const Matrix& data, Rng& rng) {
  const VaeConfig& cfg = vae.config();
  if (data.rows() != cfg.input_dim() || data.cols() == 0) throw UsageError("VAE training data has the wrong shape");
  nn::Adam opt;
  opt.add(vae.parameters(), cfg.learning_rate);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(data.cols()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::vector<double> epoch_loss;
  epoch_loss.reserve(static_cast<std::size_t>(cfg.epochs));
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    const double weight =
        cfg.warmup_epochs > 0 ? cfg.beta * std::min(1.0, static_cast<double>(epoch) / cfg.warmup_epochs) : cfg.beta;
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      Matrix x(data.rows(), static_cast<Eigen::Index>(end - start));
      for (std::size_t k = start; k < end; ++k) x.col(static_cast<Eigen::Index>(k - start)) = data.col(order[k]);
      Matrix noise(cfg.latent, x.cols());
      for (auto& v : noise.reshaped()) v = standard_normal(rng);
      nn::Tape tape;
      nn::Var l = vae.loss(tape, x, noise, nullptr, weight);
      const double value = l.scalar();
      if (!std::isfinite(value)) throw NumericalError("VAE training diverged at epoch " + std::to_string(epoch));
      opt.zero_grad();
      tape.backward(l);
      opt.step();
      total += value * static_cast<double>(x.cols());
    }
    epoch_loss.push_back(total / static_cast<double>(data.cols()));
  }
  return epoch_loss;
}

double reconstruction_accuracy(const BetaVae& vae, const Matrix& data) {
  const int n = vae.config().cells, levels = vae.config().levels;
  const Matrix p = vae.decode(vae.encode(data).first);
  long hits = 0;
  for (Eigen::Index b = 0; b < data.cols(); ++b)
    for (int c = 0; c < n; ++c) {
      int best = 0, truth = 0;
      for (int l = 1; l < levels; ++l) {
        if (p(l * n + c, b) > p(best * n + c, b)) best = l;
        if (data(l * n + c, b) > data(truth * n + c, b)) truth = l;
      }
      hits += best == truth;
    }
  return static_cast<double>(hits) / static_cast<double>(n * data.cols());
}

}  // namespace uqgfn::embed
