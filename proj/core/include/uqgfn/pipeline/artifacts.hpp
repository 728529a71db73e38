#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "uqgfn/common/linalg.hpp"
#include "uqgfn/common/tensor3.hpp"
#include "uqgfn/pce/policy_surrogate.hpp"
#include "uqgfn/pipeline/manifest.hpp"

namespace uqgfn::pipeline {

enum class Role { kTrain, kTest };

std::string_view to_string(Role r);
Role role_from_string(std::string_view name);

struct MemberRecord {
  std::size_t index = 0;
  std::uint64_t seed = 0;
  nlohmann::json reward;
  Vector latent;
  /// Checkpoint file name relative to the archive directory; empty when training failed.
  std::string checkpoint;
  bool ok = true;
  std::string error;
  double final_loss = 0.0;
};

/// One trained ensemble: reward, latent code and checkpoint of every member.
struct Archive {
  Experiment experiment = Experiment::kDiscreteGrid;
  Role role = Role::kTrain;
  std::vector<MemberRecord> members;

  std::size_t failures() const;
  /// Latent rows (members x m) of the members that trained successfully.
  Matrix latents() const;

  nlohmann::json to_json() const;
  static Archive from_json(const nlohmann::json& doc);
};

/// Policies of an ensemble along one trajectory (members x steps x channels).
struct PolicyTensor {
  Role role = Role::kTrain;
  pce::PolicyKind kind = pce::PolicyKind::kDiscrete;
  std::vector<std::string> channels;
  /// Archive index of every item.
  std::vector<std::size_t> members;
  nlohmann::json trajectory;
  Tensor3 values;

  nlohmann::json to_json() const;
  static PolicyTensor from_json(const nlohmann::json& doc);
};

/// Throws UsageError unless the artefact comes from a training ensemble.
void require_training_role(Role role, std::string_view what);

/// One row of the long-format plot table.
struct PlotRow {
  std::string source;
  std::size_t step = 0;
  std::string channel;
  double value = 0.0;

  bool operator==(const PlotRow&) const = default;
};

std::vector<PlotRow> plot_rows(std::string_view source, const Tensor3& values,
                               const std::vector<std::string>& channels);
void write_plot_table(const std::filesystem::path& path, const std::vector<PlotRow>& rows);
/// Streams every item of each tensor as plot rows tagged with the source name.
using PlotSource = std::pair<std::string, const Tensor3*>;
void write_plot_table(const std::filesystem::path& path, const std::vector<PlotSource>& sources,
                      const std::vector<std::string>& channels);
std::vector<PlotRow> read_plot_table(const std::filesystem::path& path);

/// Samples x steps x channels table as CSV (sample, step, channel, value).
void write_sample_table(const std::filesystem::path& path, const Tensor3& values,
                        const std::vector<std::string>& channels);
Tensor3 read_sample_table(const std::filesystem::path& path, const std::vector<std::string>& channels);

/// Stable digest of a trajectory description.
std::string trajectory_hash(const nlohmann::json& trajectory);

}  // namespace uqgfn::pipeline
