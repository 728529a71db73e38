#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

namespace uqgfn::pipeline {

enum class Experiment { kDiscreteGrid, kContinuousGrid, kSymReg, kStructLearn };

std::string_view to_string(Experiment e);
Experiment experiment_from_string(std::string_view name);

enum class SurrogateKind { kPce, kMlp };

std::string_view to_string(SurrogateKind k);
SurrogateKind surrogate_kind_from_string(std::string_view name);

/// Everything a run needs. The free-form sections (environment, training,
/// embedding, trajectory, mlp) are merged over per-experiment defaults and read
/// by the experiment driver.
struct Manifest {
  Experiment experiment = Experiment::kDiscreteGrid;
  std::uint64_t seed = 0;
  std::size_t train_members = 0;
  std::size_t test_members = 0;
  std::filesystem::path out_dir = "runs";
  SurrogateKind surrogate = SurrogateKind::kPce;
  int degree = 1;
  double ridge = 1e-6;
  /// Fresh surrogate samples drawn by sample-surrogate.
  std::size_t samples = 0;
  nlohmann::json environment = nlohmann::json::object();
  nlohmann::json training = nlohmann::json::object();
  nlohmann::json embedding = nlohmann::json::object();
  nlohmann::json trajectory = nlohmann::json::object();
  nlohmann::json mlp = nlohmann::json::object();

  /// Default setup of each experiment.
  static Manifest defaults(Experiment e);
  /// Missing keys fall back to `defaults(experiment)`; unknown top-level keys are rejected.
  static Manifest from_json(const nlohmann::json& doc);
  nlohmann::json to_json() const;

  /// Root of this experiment's artefacts: out_dir / experiment.
  std::filesystem::path experiment_dir() const;
};

Manifest load_manifest(const std::filesystem::path& path);

}  // namespace uqgfn::pipeline
