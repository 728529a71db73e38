#include "uqgfn/pce/policy_surrogate.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "uqgfn/common/errors.hpp"

namespace uqgfn::pce {

std::string_view to_string(PolicyKind k) { return k == PolicyKind::kGaussian ? "gaussian" : "discrete"; }

PolicyKind policy_kind_from_string(std::string_view name) {
  if (name == "discrete") return PolicyKind::kDiscrete;
  if (name == "gaussian") return PolicyKind::kGaussian;
  throw UsageError("unknown policy kind '" + std::string(name) + "'");
}

bool PolicySurrogate::structural_zero(std::size_t step, std::size_t channel) const {
  if (step >= steps_ || channel >= channels_) throw UsageError("structural_zero: index out of range");
  return structural_zero_[step * channels_ + channel] != 0;
}

PceModel PolicySurrogate::channel_model(std::size_t step, std::size_t channel) const {
  if (step >= steps_ || channel >= channels_) throw UsageError("channel_model: index out of range");
  return {options_.ridge.family, indices_,
          coefficients_.col(static_cast<Eigen::Index>(step * channels_ + channel)), standardisation_};
}

Matrix PolicySurrogate::decode_raw(const RowVector& unclamped) const {
  const RowVector raw =
      options_.clamp_to_training_range ? RowVector(unclamped.cwiseMax(output_lo_).cwiseMin(output_hi_)) : unclamped;
  const auto steps = static_cast<Eigen::Index>(steps_);
  const auto channels = static_cast<Eigen::Index>(channels_);
  Matrix out = Matrix::Zero(steps, channels);
  std::vector<std::uint8_t> active(channels_);
  for (Eigen::Index t = 0; t < steps; ++t) {
    const std::size_t base = static_cast<std::size_t>(t) * channels_;
    if (kind_ == PolicyKind::kGaussian) {
      for (Eigen::Index c = 0; c < channels; ++c) {
        const double v = raw(t * channels + c);
        out(t, c) = (c % 2 == 0) ? v : std::clamp(std::exp(v), options_.min_variance, options_.max_variance);
      }
      continue;
    }
    bool any = false;
    for (std::size_t c = 0; c < channels_; ++c) {
      active[c] = structural_zero_[base + c] ? 0 : 1;
      any = any || active[c];
    }
    if (!any) continue;
    const Vector logits = raw.segment(t * channels, channels).transpose();
    out.row(t) = decode_logits(logits, options_.decode, active).transpose();
  }
  return out;
}

Matrix PolicySurrogate::sample(const Vector& latent) const {
  const RowVector phi = design_row(indices_, options_.ridge.family, standardisation_.apply(latent));
  return decode_raw(phi * coefficients_);
}

Tensor3 PolicySurrogate::sample_batch(const Matrix& latents) const {
  const Matrix phi = design_matrix(indices_, options_.ridge.family, standardisation_.apply_rows(latents));
  const Matrix raw = phi * coefficients_;
  Tensor3 out(static_cast<std::size_t>(latents.rows()), steps_, channels_);
  for (Eigen::Index i = 0; i < raw.rows(); ++i) out.set_item(static_cast<std::size_t>(i), decode_raw(raw.row(i)));
  return out;
}

nlohmann::json PolicySurrogate::to_json() const {
  nlohmann::json coeffs = nlohmann::json::array();
  for (Eigen::Index col = 0; col < coefficients_.cols(); ++col)
    coeffs.push_back(std::vector<double>(coefficients_.col(col).data(),
                                         coefficients_.col(col).data() + coefficients_.rows()));
  return {{"kind", std::string(to_string(kind_))},
          {"steps", steps_},
          {"channels", channels_},
          {"basis", std::string(to_string(options_.ridge.family))},
          {"degree", options_.ridge.degree},
          {"ridge", options_.ridge.ridge},
          {"probability_clamp", options_.probability_clamp},
          {"decode", std::string(to_string(options_.decode))},
          {"min_variance", options_.min_variance},
          {"max_variance", options_.max_variance},
          {"clamp_to_training_range", options_.clamp_to_training_range},
          {"output_lo", std::vector<double>(output_lo_.data(), output_lo_.data() + output_lo_.size())},
          {"output_hi", std::vector<double>(output_hi_.data(), output_hi_.data() + output_hi_.size())},
          {"dimension", indices_.dimension()},
          {"indices", indices_.indices()},
          {"standardisation", standardisation_.to_json()},
          {"structural_zero", structural_zero_},
          {"coefficients", coeffs}};
}

PolicySurrogate PolicySurrogate::from_json(const nlohmann::json& doc) {
  PolicySurrogate s;
  s.kind_ = policy_kind_from_string(doc.at("kind").get<std::string>());
  s.steps_ = doc.at("steps").get<std::size_t>();
  s.channels_ = doc.at("channels").get<std::size_t>();
  s.options_.ridge.family = basis_family_from_string(doc.at("basis").get<std::string>());
  s.options_.ridge.degree = doc.at("degree").get<int>();
  s.options_.ridge.ridge = doc.at("ridge").get<double>();
  s.options_.probability_clamp = doc.at("probability_clamp").get<double>();
  s.options_.decode = decode_rule_from_string(doc.at("decode").get<std::string>());
  s.options_.min_variance = doc.at("min_variance").get<double>();
  s.options_.max_variance = doc.at("max_variance").get<double>();
  s.options_.clamp_to_training_range = doc.at("clamp_to_training_range").get<bool>();
  const auto lo = doc.at("output_lo").get<std::vector<double>>();
  const auto hi = doc.at("output_hi").get<std::vector<double>>();
  s.output_lo_ = Eigen::Map<const RowVector>(lo.data(), static_cast<Eigen::Index>(lo.size()));
  s.output_hi_ = Eigen::Map<const RowVector>(hi.data(), static_cast<Eigen::Index>(hi.size()));
  s.indices_ = MultiIndexSet(doc.at("dimension").get<int>(), s.options_.ridge.degree,
                             doc.at("indices").get<std::vector<MultiIndex>>());
  s.standardisation_ = InputStandardisation::from_json(doc.at("standardisation"));
  s.structural_zero_ = doc.at("structural_zero").get<std::vector<std::uint8_t>>();
  const auto& coeffs = doc.at("coefficients");
  const std::size_t outputs = s.steps_ * s.channels_;
  if (coeffs.size() != outputs || s.structural_zero_.size() != outputs || lo.size() != outputs ||
      hi.size() != outputs)
    throw UsageError("policy surrogate: output count mismatch");
  s.coefficients_.resize(static_cast<Eigen::Index>(s.indices_.size()), static_cast<Eigen::Index>(outputs));
  for (std::size_t col = 0; col < outputs; ++col) {
    const auto v = coeffs[col].get<std::vector<double>>();
    if (v.size() != s.indices_.size()) throw UsageError("policy surrogate: coefficient count mismatch");
    for (std::size_t j = 0; j < v.size(); ++j)
      s.coefficients_(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(col)) = v[j];
  }
  return s;
}

PolicySurrogate fit_policy_surrogate(const Matrix& latents, const Tensor3& policies, PolicyKind kind,
                                     const PolicySurrogateOptions& options,
                                     const InputStandardisation& standardisation) {
  if (static_cast<std::size_t>(latents.rows()) != policies.items())
    throw UsageError("fit_policy_surrogate: latent/policy count mismatch");
  if (policies.items() == 0) throw UsageError("fit_policy_surrogate: no training members");
  if (kind == PolicyKind::kGaussian && policies.channels() % 2 != 0)
    throw UsageError("fit_policy_surrogate: Gaussian policies need (mean, variance) channel pairs");

  PolicySurrogate s;
  s.kind_ = kind;
  s.steps_ = policies.steps();
  s.channels_ = policies.channels();
  s.options_ = options;
  s.standardisation_ = standardisation;
  s.indices_ = MultiIndexSet(static_cast<int>(latents.cols()), options.ridge.degree);

  const std::size_t outputs = s.steps_ * s.channels_;
  const auto n = static_cast<Eigen::Index>(policies.items());
  s.structural_zero_.assign(outputs, 0);
  Matrix targets(n, static_cast<Eigen::Index>(outputs));
  for (std::size_t t = 0; t < s.steps_; ++t) {
    for (std::size_t c = 0; c < s.channels_; ++c) {
      const std::size_t col = t * s.channels_ + c;
      bool all_zero = true;
      for (Eigen::Index i = 0; i < n; ++i) {
        const double v = policies(static_cast<std::size_t>(i), t, c);
        if (!std::isfinite(v)) throw NumericalError("fit_policy_surrogate: non-finite policy value");
        all_zero = all_zero && v == 0.0;
        double y = v;
        if (kind == PolicyKind::kDiscrete) {
          y = logit(v, options.probability_clamp);
        } else if (c % 2 == 1) {
          if (!(v > 0.0)) throw NumericalError("fit_policy_surrogate: non-positive variance");
          y = std::log(v);
        }
        targets(i, static_cast<Eigen::Index>(col)) = y;
      }
      if (kind == PolicyKind::kDiscrete && all_zero) s.structural_zero_[col] = 1;
    }
  }
  const Matrix phi = design_matrix(s.indices_, options.ridge.family, standardisation.apply_rows(latents));
  s.coefficients_ = solve_ridge(phi, targets, options.ridge.ridge);
  s.output_lo_ = targets.colwise().minCoeff();
  s.output_hi_ = targets.colwise().maxCoeff();
  return s;
}

}  // namespace uqgfn::pce
