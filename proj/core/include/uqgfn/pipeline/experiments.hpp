#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "uqgfn/common/linalg.hpp"
#include "uqgfn/common/rng.hpp"
#include "uqgfn/gfn/trainer.hpp"
#include "uqgfn/pce/policy_surrogate.hpp"
#include "uqgfn/pipeline/manifest.hpp"

namespace uqgfn::pipeline {

struct TrainedMember {
  nlohmann::json checkpoint;
  std::vector<double> losses;
};

/// Experiment-specific pieces of the pipeline. Rewards, embedders and
/// checkpoints travel as JSON so the stages can persist them between commands.
class ExperimentDriver {
 public:
  virtual ~ExperimentDriver() = default;

  virtual pce::PolicyKind policy_kind() const = 0;
  /// One label per policy channel.
  virtual std::vector<std::string> channels() const = 0;

  virtual nlohmann::json sample_reward(Rng& rng) const = 0;

  /// Fits the reward embedding on the training rewards and returns it; identity embeddings return null.
  virtual nlohmann::json fit_embedder(const std::vector<nlohmann::json>& train_rewards, Rng& rng) = 0;
  virtual void load_embedder(const nlohmann::json& embedder) = 0;
  /// Latent code of a reward (needs the embedder).
  virtual Vector latent(const nlohmann::json& reward) const = 0;
  /// Extra surrogate training inputs for one member, each paired with that member's policy.
  virtual Matrix augmented_latents(const nlohmann::json& reward, Rng& rng) const;
  /// `n` fresh surrogate inputs by the experiment's input-sampling rule (n x m).
  virtual Matrix sample_latents(std::size_t n, Rng& rng) const = 0;

  /// Throws NumericalError when training diverges.
  virtual TrainedMember train_member(const nlohmann::json& reward, Rng& rng) const = 0;

  /// Concrete focal trajectory from the manifest's description. Experiments that sample
  /// their trajectory from a trained model read it through `train_checkpoint(index)`.
  virtual nlohmann::json resolve_trajectory(const nlohmann::json& spec,
                                            const std::function<nlohmann::json(std::size_t)>& train_checkpoint,
                                            Rng& rng) const;
  /// Policy (steps x channels) of one member along a resolved trajectory.
  virtual Matrix extract(const nlohmann::json& checkpoint, const nlohmann::json& reward,
                         const nlohmann::json& trajectory) const = 0;
};

std::unique_ptr<ExperimentDriver> make_driver(const Manifest& manifest);

/// GFN training options from a manifest "training" section.
gfn::TrainConfig train_config_from_json(const nlohmann::json& doc);

}  // namespace uqgfn::pipeline
