#include "uqgfn/mlp/mlp_surrogate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "uqgfn/common/errors.hpp"
#include "uqgfn/nn/adam.hpp"
#include "uqgfn/nn/ops.hpp"

namespace uqgfn::mlp {

nlohmann::json MlpSurrogateConfig::to_json() const {
  return {{"hidden", hidden},
          {"epochs", epochs},
          {"learning_rate", learning_rate},
          {"min_variance", min_variance},
          {"max_variance", max_variance}};
}

MlpSurrogateConfig MlpSurrogateConfig::from_json(const nlohmann::json& doc) {
  MlpSurrogateConfig c;
  c.hidden = doc.value("hidden", c.hidden);
  c.epochs = doc.value("epochs", c.epochs);
  c.learning_rate = doc.value("learning_rate", c.learning_rate);
  c.min_variance = doc.value("min_variance", c.min_variance);
  c.max_variance = doc.value("max_variance", c.max_variance);
  if (c.epochs < 0 || !(c.learning_rate > 0.0) || !(c.min_variance > 0.0) || c.max_variance < c.min_variance)
    throw UsageError("invalid MLP surrogate configuration");
  for (int h : c.hidden)
    if (h < 1) throw UsageError("MLP hidden widths must be positive");
  return c;
}

nn::Var MlpSurrogate::decoded(nn::Tape&, nn::Var raw) const {
  const auto c = static_cast<Eigen::Index>(channels_);
  std::vector<nn::Var> parts;
  for (std::size_t t = 0; t < steps_; ++t) {
    nn::Var block = nn::slice_rows(raw, static_cast<Eigen::Index>(t) * c, c);
    if (kind_ == pce::PolicyKind::kDiscrete) {
      std::vector<std::uint8_t> mask;
      for (Eigen::Index b = 0; b < raw.cols(); ++b)
        mask.insert(mask.end(), active_.begin() + static_cast<std::ptrdiff_t>(t * channels_),
                    active_.begin() + static_cast<std::ptrdiff_t>((t + 1) * channels_));
      parts.push_back(nn::exp(nn::log_softmax(block, mask)));
    } else {
      const double lo = std::log(config_.min_variance), hi = std::log(config_.max_variance);
      for (Eigen::Index k = 0; k < c; ++k) {
        nn::Var row = nn::slice_rows(block, k, 1);
        parts.push_back(k % 2 == 1 ? nn::exp(nn::clamp(row, lo, hi)) : row);
      }
    }
  }
  return nn::concat_rows(parts);
}

Matrix MlpSurrogate::sample(const Vector& latent) const {
  const Matrix raw = net_.forward(Matrix(standardisation_.apply(latent)));
  Matrix out(static_cast<Eigen::Index>(steps_), static_cast<Eigen::Index>(channels_));
  for (std::size_t t = 0; t < steps_; ++t) {
    const auto row = static_cast<Eigen::Index>(t);
    if (kind_ == pce::PolicyKind::kDiscrete) {
      double m = -std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < channels_; ++c)
        if (active_[t * channels_ + c]) m = std::max(m, raw(static_cast<Eigen::Index>(t * channels_ + c), 0));
      double s = 0.0;
      for (std::size_t c = 0; c < channels_; ++c) {
        const double v = active_[t * channels_ + c] ? std::exp(raw(static_cast<Eigen::Index>(t * channels_ + c), 0) - m) : 0.0;
        out(row, static_cast<Eigen::Index>(c)) = v;
        s += v;
      }
      out.row(row) /= s;
    } else {
      const double lo = std::log(config_.min_variance), hi = std::log(config_.max_variance);
      for (std::size_t c = 0; c < channels_; ++c) {
        const double v = raw(static_cast<Eigen::Index>(t * channels_ + c), 0);
        out(row, static_cast<Eigen::Index>(c)) = c % 2 == 1 ? std::exp(std::clamp(v, lo, hi)) : v;
      }
    }
  }
  return out;
}

Tensor3 MlpSurrogate::sample_batch(const Matrix& latents) const {
  Tensor3 out(static_cast<std::size_t>(latents.rows()), steps_, channels_);
  for (Eigen::Index i = 0; i < latents.rows(); ++i)
    out.set_item(static_cast<std::size_t>(i), sample(latents.row(i).transpose()));
  return out;
}

Matrix MlpSurrogate::jacobian(const Vector& latent) const {
  const auto m = latent.size();
  if (m != standardisation_.dimension()) throw UsageError("MLP Jacobian: latent dimension mismatch");
  const auto outputs = static_cast<Eigen::Index>(steps_ * channels_);
  Matrix j(m, outputs);
  nn::DenseNet net = net_;
  const Matrix inv_scale = standardisation_.scale.cwiseInverse();
  for (Eigen::Index k = 0; k < outputs; ++k) {
    nn::Tape tape;
    nn::Var x = tape.variable(latent);
    nn::Var z = nn::mul(nn::sub(x, tape.constant(standardisation_.shift)), tape.constant(inv_scale));
    nn::Var out = decoded(tape, net.forward(tape, z));
    tape.backward(nn::slice_rows(out, k, 1));
    j.col(k) = tape.grad(x);
  }
  return j;
}

nn::Var MlpSurrogate::loss(nn::Tape& tape, const Matrix& inputs, const Matrix& targets) {
  const double n = static_cast<double>(inputs.cols());
  nn::Var raw = net_.forward(tape, tape.constant(inputs));
  if (kind_ == pce::PolicyKind::kGaussian) return nn::mean(nn::square(nn::sub(raw, tape.constant(targets))));
  const auto c = static_cast<Eigen::Index>(channels_);
  nn::Var total;
  double entropy_term = 0.0;
  for (std::size_t t = 0; t < steps_; ++t) {
    const Matrix p = targets.middleRows(static_cast<Eigen::Index>(t) * c, c);
    std::vector<std::uint8_t> mask;
    for (Eigen::Index b = 0; b < inputs.cols(); ++b)
      mask.insert(mask.end(), active_.begin() + static_cast<std::ptrdiff_t>(t * channels_),
                  active_.begin() + static_cast<std::ptrdiff_t>((t + 1) * channels_));
    nn::Var lq = nn::log_softmax(nn::slice_rows(raw, static_cast<Eigen::Index>(t) * c, c), mask);
    nn::Var cross = nn::neg(nn::sum(nn::mul(lq, tape.constant(p))));
    total = total.valid() ? nn::add(total, cross) : cross;
    for (double v : p.reshaped())
      if (v > 0.0) entropy_term += v * std::log(v);
  }
  // Adding sum p log p turns the cross-entropy into KL(empirical || surrogate).
  return nn::scale(nn::add_scalar(total, entropy_term), 1.0 / n);
}

nlohmann::json MlpSurrogate::to_json() const {
  return {{"type", "mlp-surrogate"},
          {"kind", pce::to_string(kind_)},
          {"steps", steps_},
          {"channels", channels_},
          {"config", config_.to_json()},
          {"standardisation", standardisation_.to_json()},
          {"active", active_},
          {"network", net_.to_json()}};
}

MlpSurrogate MlpSurrogate::from_json(const nlohmann::json& doc) {
  if (doc.at("type") != "mlp-surrogate") throw UsageError("not an mlp-surrogate document");
  MlpSurrogate s;
  s.kind_ = pce::policy_kind_from_string(doc.at("kind").get<std::string>());
  s.steps_ = doc.at("steps").get<std::size_t>();
  s.channels_ = doc.at("channels").get<std::size_t>();
  s.config_ = MlpSurrogateConfig::from_json(doc.at("config"));
  s.standardisation_ = pce::InputStandardisation::from_json(doc.at("standardisation"));
  s.active_ = doc.at("active").get<std::vector<std::uint8_t>>();
  s.net_ = nn::DenseNet::from_json(doc.at("network"));
  if (s.active_.size() != s.steps_ * s.channels_ ||
      s.net_.output_dim() != static_cast<Eigen::Index>(s.steps_ * s.channels_) ||
      s.net_.input_dim() != s.standardisation_.dimension())
    throw UsageError("mlp-surrogate document is inconsistent");
  return s;
}

MlpSurrogate train_mlp_surrogate(const Matrix& latents, const Tensor3& policies, pce::PolicyKind kind,
                                 const MlpSurrogateConfig& config, const pce::InputStandardisation& standardisation,
                                 Rng& rng, std::vector<double>* loss_curve) {
  const auto n = static_cast<std::size_t>(latents.rows());
  if (n == 0 || policies.items() != n) throw UsageError("MLP surrogate: latents and policies differ in count");
  if (standardisation.dimension() != latents.cols()) throw UsageError("MLP surrogate: standardisation dimension mismatch");
  if (kind == pce::PolicyKind::kGaussian && policies.channels() % 2 != 0)
    throw UsageError("Gaussian policies need (mean, variance) channel pairs");
  MlpSurrogate s;
  s.kind_ = kind;
  s.steps_ = policies.steps();
  s.channels_ = policies.channels();
  s.config_ = config;
  s.standardisation_ = standardisation;
  const auto outputs = static_cast<Eigen::Index>(s.steps_ * s.channels_);
  std::vector<int> dims{static_cast<int>(latents.cols())};
  dims.insert(dims.end(), config.hidden.begin(), config.hidden.end());
  dims.push_back(static_cast<int>(outputs));
  s.net_ = nn::DenseNet(dims, nn::Activation::kRelu, nn::Activation::kIdentity, rng);

  Matrix targets(outputs, static_cast<Eigen::Index>(n));
  s.active_.assign(static_cast<std::size_t>(outputs), 0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t t = 0; t < s.steps_; ++t)
      for (std::size_t c = 0; c < s.channels_; ++c) {
        double v = policies(i, t, c);
        const std::size_t o = t * s.channels_ + c;
        if (!std::isfinite(v)) throw NumericalError("MLP surrogate: non-finite training policy");
        if (kind == pce::PolicyKind::kGaussian && c % 2 == 1) {
          if (!(v > 0.0)) throw NumericalError("MLP surrogate: non-positive variance");
          v = std::log(v);
        }
        if (kind == pce::PolicyKind::kGaussian || v != 0.0) s.active_[o] = 1;
        targets(static_cast<Eigen::Index>(o), static_cast<Eigen::Index>(i)) = v;
      }
  const Matrix inputs = standardisation.apply_rows(latents).transpose();

  nn::Adam opt;
  opt.add(s.net_.parameters(), config.learning_rate);
  if (loss_curve) loss_curve->clear();
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    nn::Tape tape;
    nn::Var l = s.loss(tape, inputs, targets);
    const double value = l.scalar();
    if (!std::isfinite(value)) throw NumericalError("MLP surrogate training diverged at epoch " + std::to_string(epoch));
    opt.zero_grad();
    tape.backward(l);
    opt.step();
    if (loss_curve) loss_curve->push_back(value);
  }
  return s;
}

}  // namespace uqgfn::mlp
