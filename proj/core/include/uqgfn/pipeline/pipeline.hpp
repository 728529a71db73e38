#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "uqgfn/pipeline/artifacts.hpp"
#include "uqgfn/pipeline/experiments.hpp"
#include "uqgfn/pipeline/manifest.hpp"

namespace uqgfn::pipeline {

/// Per (step, channel) comparison of surrogate samples with the testing ensemble.
struct ChannelComparison {
  std::size_t step = 0;
  std::string channel;
  double w1_surrogate_test = 0.0;
  double w1_train_test = 0.0;
  std::array<double, 5> quantiles_test{};
  std::array<double, 5> quantiles_surrogate{};
  std::array<double, 5> quantiles_train{};
  double variance_test = 0.0;
  double variance_surrogate = 0.0;
  double variance_train = 0.0;
  /// variance_surrogate / variance_test; unset when the testing variance is 0.
  std::optional<double> variance_ratio;
  int modes_test = 1;
  int modes_surrogate = 1;
  int modes_train = 1;
};

struct ComparisonReport {
  Experiment experiment = Experiment::kDiscreteGrid;
  SurrogateKind surrogate = SurrogateKind::kPce;
  std::string trajectory_hash;
  std::size_t samples = 0;
  std::size_t train_members = 0;
  std::size_t test_members = 0;
  std::vector<ChannelComparison> channels;

  /// Fraction of channels with W1(surrogate, test) <= factor * W1(train, test).
  double fraction_within(double factor) const;
  const ChannelComparison& at(std::size_t step, const std::string& channel) const;

  nlohmann::json to_json() const;
  static ComparisonReport from_json(const nlohmann::json& doc);
};

/// Compares every (step, channel) cell of three policy tensors with matching shape.
ComparisonReport compare_tensors(const Tensor3& surrogate, const Tensor3& test, const Tensor3& train,
                                 const std::vector<std::string>& channels);

/// File-backed pipeline stages. Every stage reads its inputs from and writes its
/// outputs under `manifest.experiment_dir()`, so stages can run as separate commands.
class Pipeline {
 public:
  explicit Pipeline(Manifest manifest);

  const Manifest& manifest() const { return manifest_; }
  const ExperimentDriver& driver() const { return *driver_; }
  std::filesystem::path dir() const { return manifest_.experiment_dir(); }

  /// Progress messages (member training, stage boundaries).
  void set_logger(std::function<void(const std::string&)> log) { log_ = std::move(log); }

  void sample_rewards();
  void fit_embed();
  /// Returns the number of members whose training diverged.
  std::size_t train_ensemble(Role role);
  void extract_policies(Role role);
  void fit_surrogate();
  void sample_surrogate();
  ComparisonReport compare();
  void sobol();
  /// All stages in order; returns the number of failed members.
  std::size_t run_all();

  std::filesystem::path rewards_path(Role role) const;
  std::filesystem::path embedder_path() const;
  std::filesystem::path archive_path(Role role) const;
  std::filesystem::path trajectory_path() const;
  std::filesystem::path policies_path(Role role) const;
  std::filesystem::path surrogate_path() const;
  std::filesystem::path samples_path() const;
  std::filesystem::path report_dir(const std::string& trajectory_hash) const;

 private:
  void log(const std::string& message) const;
  std::vector<nlohmann::json> load_rewards(Role role) const;
  void load_embedder();
  Archive load_archive(Role role) const;
  PolicyTensor load_policies(Role role) const;

  Manifest manifest_;
  std::unique_ptr<ExperimentDriver> driver_;
  bool embedder_loaded_ = false;
  std::function<void(const std::string&)> log_;
};

}  // namespace uqgfn::pipeline
