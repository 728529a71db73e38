#include "uqgfn/pipeline/experiments.hpp"

#include <algorithm>
#include <numeric>
#include <optional>

#include "uqgfn/common/errors.hpp"
#include "uqgfn/embed/beta_vae.hpp"
#include "uqgfn/embed/kl_expansion.hpp"
#include "uqgfn/embed/pca.hpp"
#include "uqgfn/env/continuous_grid.hpp"
#include "uqgfn/env/discrete_grid.hpp"
#include "uqgfn/env/structlearn.hpp"
#include "uqgfn/env/symreg.hpp"
#include "uqgfn/gfn/continuous.hpp"
#include "uqgfn/gfn/models.hpp"
#include "uqgfn/gfn/sampler.hpp"
#include "uqgfn/gfn/trainer.hpp"

namespace uqgfn::pipeline {

using nlohmann::json;

gfn::TrainConfig train_config_from_json(const json& doc) {
  gfn::TrainConfig c;
  if (doc.contains("loss")) c.loss = gfn::loss_kind_from_string(doc.at("loss").get<std::string>());
  c.episodes = doc.value("episodes", c.episodes);
  c.batch_size = doc.value("batch_size", c.batch_size);
  c.learning_rate = doc.value("learning_rate", c.learning_rate);
  c.log_z_learning_rate = doc.value("log_z_learning_rate", c.log_z_learning_rate);
  c.epsilon_start = doc.value("epsilon_start", c.epsilon_start);
  c.epsilon_decay = doc.value("epsilon_decay", c.epsilon_decay);
  c.epsilon_floor = doc.value("epsilon_floor", c.epsilon_floor);
  c.temperature = doc.value("temperature", c.temperature);
  c.buffer_capacity = doc.value("buffer_capacity", c.buffer_capacity);
  c.replay_batch = doc.value("replay_batch", c.replay_batch);
  if (c.batch_size == 0) throw UsageError("training batch_size must be positive");
  if (!(c.learning_rate > 0.0)) throw UsageError("training learning_rate must be positive");
  return c;
}

Matrix ExperimentDriver::augmented_latents(const json&, Rng&) const { return Matrix(0, 0); }

json ExperimentDriver::resolve_trajectory(const json& spec, const std::function<json(std::size_t)>&, Rng&) const {
  return spec;
}

namespace {

std::vector<int> hidden_sizes(const json& doc, const char* key, std::vector<int> fallback) {
  if (!doc.contains(key)) return fallback;
  const auto& v = doc.at(key);
  return v.is_array() ? v.get<std::vector<int>>() : std::vector<int>{v.get<int>()};
}

json rows_to_json(const Matrix& m) {
  json out = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    std::vector<double> row(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index c = 0; c < m.cols(); ++c) row[static_cast<std::size_t>(c)] = m(r, c);
    out.push_back(row);
  }
  return out;
}

Matrix rows_from_json(const json& doc) {
  const auto rows = doc.get<std::vector<std::vector<double>>>();
  if (rows.empty()) return Matrix(0, 0);
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != rows.front().size()) throw UsageError("ragged matrix in JSON");
    for (std::size_t c = 0; c < rows[r].size(); ++c)
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
  }
  return m;
}

Vector draw_gaussian(const Vector& mean, const Vector& log_var, Rng& rng) {
  Vector z(mean.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = mean(i) + std::exp(0.5 * log_var(i)) * standard_normal(rng);
  return z;
}

// ---------------------------------------------------------------------------

int grid_action_from_name(const std::string& name) {
  if (name == "left") return env::kLeft;
  if (name == "right") return env::kRight;
  if (name == "up") return env::kUp;
  if (name == "down") return env::kDown;
  if (name == "stop") return env::kStop;
  throw UsageError("unknown grid action '" + name + "'");
}

std::optional<env::Cell> cell_from_json(const json& doc) {
  if (doc.is_null()) return std::nullopt;
  const auto v = doc.get<std::vector<int>>();
  if (v.size() != 2) throw UsageError("a grid cell is [row, col]");
  return env::Cell{v[0], v[1]};
}

class DiscreteGridDriver final : public ExperimentDriver {
 public:
  explicit DiscreteGridDriver(const Manifest& m)
      : reward_(env::GridRewardConfig::from_json(m.environment.value("reward", json::object()))),
        max_length_(m.environment.value("max_length", 20)),
        start_(cell_from_json(m.environment.value("start", json(nullptr)))),
        training_(m.training),
        train_(train_config_from_json(m.training)),
        vae_config_(embed::VaeConfig::from_json(m.embedding.value("vae", json::object()))),
        grids_(m.embedding.value("grids", 500)),
        augment_(m.embedding.value("augment", 0)) {
    vae_config_.cells = reward_.size * reward_.size;
    if (grids_ < 2) throw UsageError("the VAE needs at least two training grids");
    if (augment_ < 0) throw UsageError("augment must be non-negative");
  }

  pce::PolicyKind policy_kind() const override { return pce::PolicyKind::kDiscrete; }
  std::vector<std::string> channels() const override { return {"left", "right", "up", "down", "stop"}; }

  json sample_reward(Rng& rng) const override { return env::sample_discrete_reward(reward_, rng).to_json(); }

  json fit_embedder(const std::vector<json>&, Rng& rng) override {
    Matrix data(vae_config_.input_dim(), grids_);
    for (int i = 0; i < grids_; ++i) data.col(i) = env::sample_discrete_reward(reward_, rng).one_hot();
    vae_.emplace(vae_config_, rng);
    embed::train_vae(*vae_, data, rng);
    return vae_->to_json();
  }
  void load_embedder(const json& doc) override { vae_.emplace(embed::BetaVae::from_json(doc)); }

  Vector latent(const json& reward) const override { return encode(reward).first; }

  Matrix augmented_latents(const json& reward, Rng& rng) const override {
    const auto [mean, log_var] = encode(reward);
    Matrix out(augment_, mean.size());
    for (int k = 0; k < augment_; ++k) out.row(k) = draw_gaussian(mean, log_var, rng).transpose();
    return out;
  }

  Matrix sample_latents(std::size_t n, Rng& rng) const override {
    const auto& vae = require_vae();
    Matrix out(static_cast<Eigen::Index>(n), vae.config().latent);
    constexpr std::size_t kChunk = 1024;
    for (std::size_t begin = 0; begin < n; begin += kChunk) {
      const std::size_t count = std::min(kChunk, n - begin);
      Matrix x(vae.config().input_dim(), static_cast<Eigen::Index>(count));
      for (std::size_t i = 0; i < count; ++i)
        x.col(static_cast<Eigen::Index>(i)) = env::sample_discrete_reward(reward_, rng).one_hot();
      const auto [mean, log_var] = vae.encode(x);
      for (std::size_t i = 0; i < count; ++i) {
        const auto c = static_cast<Eigen::Index>(i);
        out.row(static_cast<Eigen::Index>(begin + i)) = draw_gaussian(mean.col(c), log_var.col(c), rng).transpose();
      }
    }
    return out;
  }

  TrainedMember train_member(const json& reward, Rng& rng) const override {
    const env::DiscreteGridEnv env(env::RewardGrid::from_json(reward), max_length_, start_);
    gfn::MlpGfnModel model(env.encoding_size(), env.num_actions(), hidden_sizes(training_, "hidden", {128, 128}),
                           train_.loss != gfn::LossKind::kTrajectoryBalance, rng);
    auto result = gfn::train(model, env, train_, rng);
    return {model.to_json(), std::move(result.losses)};
  }

  Matrix extract(const json& checkpoint, const json& reward, const json& trajectory) const override {
    const env::DiscreteGridEnv env(env::RewardGrid::from_json(reward), max_length_, start_);
    const auto model = gfn::MlpGfnModel::from_json(checkpoint);
    const auto start = cell_from_json(trajectory.at("start"));
    if (!start) throw UsageError("the grid trajectory needs a start cell");
    std::vector<int> actions;
    for (const auto& a : trajectory.at("actions")) actions.push_back(grid_action_from_name(a.get<std::string>()));
    if (actions.empty()) throw UsageError("the grid trajectory has no actions");
    const auto states = env.follow(*start, actions);
    return gfn::extract_policies(model, env, std::span(states.data(), actions.size()));
  }

 private:
  const embed::BetaVae& require_vae() const {
    if (!vae_) throw UsageError("the reward embedding has not been fitted (run fit-embed)");
    return *vae_;
  }
  std::pair<Vector, Vector> encode(const json& reward) const {
    const auto [mean, log_var] = require_vae().encode(env::RewardGrid::from_json(reward).one_hot());
    return {mean.col(0), log_var.col(0)};
  }

  env::GridRewardConfig reward_;
  int max_length_;
  std::optional<env::Cell> start_;
  json training_;
  gfn::TrainConfig train_;
  embed::VaeConfig vae_config_;
  int grids_;
  int augment_;
  std::optional<embed::BetaVae> vae_;
};

// ---------------------------------------------------------------------------

class ContinuousGridDriver final : public ExperimentDriver {
 public:
  explicit ContinuousGridDriver(const Manifest& m)
      : reward_(env::ContinuousRewardConfig::from_json(m.environment.value("reward", json::object()))),
        train_(train_config_from_json(m.training)),
        hidden_(hidden_sizes(m.training, "hidden", {100, 100})),
        min_variance_(m.training.value("min_variance", 0.01)),
        max_variance_(m.training.value("max_variance", 1.0)) {
    if (!(min_variance_ > 0.0) || !(max_variance_ >= min_variance_))
      throw UsageError("need 0 < min_variance <= max_variance");
  }

  pce::PolicyKind policy_kind() const override { return pce::PolicyKind::kGaussian; }
  std::vector<std::string> channels() const override { return {"mean_x", "var_x", "mean_y", "var_y"}; }

  json sample_reward(Rng& rng) const override { return env::sample_continuous_spec(reward_, rng).to_json(); }

  json fit_embedder(const std::vector<json>&, Rng&) override { return nullptr; }
  void load_embedder(const json&) override {}
  Vector latent(const json& reward) const override { return env::ContinuousRewardSpec::from_json(reward).means; }

  Matrix sample_latents(std::size_t n, Rng& rng) const override {
    Matrix out(static_cast<Eigen::Index>(n), 4);
    for (std::size_t i = 0; i < n; ++i)
      out.row(static_cast<Eigen::Index>(i)) = env::sample_continuous_spec(reward_, rng).means.transpose();
    return out;
  }

  TrainedMember train_member(const json& reward, Rng& rng) const override {
    const auto task = env::make_continuous_task(env::ContinuousRewardSpec::from_json(reward), reward_.steps);
    gfn::ContinuousGfnModel model(hidden_, rng, min_variance_, max_variance_);
    auto result = gfn::train_continuous(model, task, train_, rng);
    return {model.to_json(), std::move(result.losses)};
  }

  json resolve_trajectory(const json& spec, const std::function<json(std::size_t)>& train_checkpoint,
                          Rng& rng) const override {
    if (spec.contains("positions")) return spec;
    const auto member = spec.value("sample_member", std::size_t{0});
    const auto model = gfn::ContinuousGfnModel::from_json(train_checkpoint(member));
    const auto task = env::make_continuous_task(env::ContinuousRewardSpec{}, reward_.steps);
    const auto path = gfn::sample_continuous(model, task, 1, gfn::ExplorationConfig{0.0, 1.0}, rng).front();
    return {{"sample_member", member}, {"positions", rows_to_json(path.positions)}};
  }

  Matrix extract(const json& checkpoint, const json&, const json& trajectory) const override {
    const Matrix positions = rows_from_json(trajectory.at("positions"));
    if (positions.rows() != 2 || positions.cols() < 2) throw UsageError("continuous trajectory needs 2 x (steps + 1) positions");
    return gfn::extract_continuous_policy(gfn::ContinuousGfnModel::from_json(checkpoint), positions);
  }

 private:
  env::ContinuousRewardConfig reward_;
  gfn::TrainConfig train_;
  std::vector<int> hidden_;
  double min_variance_;
  double max_variance_;
};

// ---------------------------------------------------------------------------

class SymRegDriver final : public ExperimentDriver {
 public:
  explicit SymRegDriver(const Manifest& m)
      : sigma_(m.environment.value("sigma", 0.5)),
        points_(m.environment.value("points", 100)),
        max_length_(m.environment.value("max_length", env::kDefaultMaxExpressionLength)),
        training_(m.training),
        train_(train_config_from_json(m.training)),
        components_(m.embedding.value("components", 2)) {
    if (!(sigma_ >= 0.0) || points_ < 2 || max_length_ < 1) throw UsageError("invalid symreg environment");
    if (components_ < 1) throw UsageError("embedding components must be positive");
  }

  pce::PolicyKind policy_kind() const override { return pce::PolicyKind::kDiscrete; }
  std::vector<std::string> channels() const override {
    std::vector<int> all(env::kNumSymActions);
    std::iota(all.begin(), all.end(), 0);
    return env::token_names(all);
  }

  json sample_reward(Rng& rng) const override {
    const auto wiener = env::sample_wiener_path(env::symreg_grid(points_), rng);
    return {{"sigma", sigma_}, {"wiener", wiener}};
  }

  json fit_embedder(const std::vector<json>& train_rewards, Rng&) override {
    std::vector<std::vector<double>> samples;
    for (const auto& r : train_rewards) samples.push_back(target(r).values);
    projector_ = embed::KlProjector::fit(env::symreg_grid(points_), samples, components_);
    return projector_->to_json();
  }
  void load_embedder(const json& doc) override { projector_ = embed::KlProjector::from_json(doc); }

  Vector latent(const json& reward) const override { return require_projector().project(target(reward).values); }

  Matrix sample_latents(std::size_t n, Rng& rng) const override {
    const auto& projector = require_projector();
    const auto grid = env::symreg_grid(points_);
    Matrix out(static_cast<Eigen::Index>(n), projector.components());
    for (std::size_t i = 0; i < n; ++i) {
      const auto noisy = env::noisy_target_from_path(sigma_, env::sample_wiener_path(grid, rng), points_);
      out.row(static_cast<Eigen::Index>(i)) = projector.project(noisy.values).transpose();
    }
    return out;
  }

  TrainedMember train_member(const json& reward, Rng& rng) const override {
    const env::SymRegEnv env(target(reward), max_length_);
    gfn::RecurrentGfnModel model(env.vocabulary_size(), training_.value("embed", 32), training_.value("hidden", 64),
                                 hidden_sizes(training_, "head_hidden", {64}), env.num_actions(),
                                 train_.loss != gfn::LossKind::kTrajectoryBalance, rng);
    auto result = gfn::train(model, env, train_, rng);
    return {model.to_json(), std::move(result.losses)};
  }

  Matrix extract(const json& checkpoint, const json& reward, const json& trajectory) const override {
    const env::SymRegEnv env(target(reward), max_length_);
    const auto model = gfn::RecurrentGfnModel::from_json(checkpoint);
    auto actions = env::tokens_from_names(trajectory.at("tokens").get<std::vector<std::string>>());
    actions.push_back(env::kTerminate);
    const auto states = env.follow(actions);
    return gfn::extract_policies(model, env, std::span(states.data(), actions.size()));
  }

 private:
  env::NoisyTarget target(const json& reward) const {
    const auto wiener = reward.at("wiener").get<std::vector<double>>();
    return env::noisy_target_from_path(reward.at("sigma").get<double>(), wiener, points_);
  }
  const embed::KlProjector& require_projector() const {
    if (!projector_) throw UsageError("the reward embedding has not been fitted (run fit-embed)");
    return *projector_;
  }

  double sigma_;
  int points_;
  int max_length_;
  json training_;
  gfn::TrainConfig train_;
  int components_;
  std::optional<embed::KlProjector> projector_;
};

// ---------------------------------------------------------------------------

constexpr std::uint64_t kNetworkStream = 0x6e6574;

std::vector<std::pair<int, int>> edges_from_json(const json& doc) {
  std::vector<std::pair<int, int>> out;
  for (const auto& e : doc) {
    const auto v = e.get<std::vector<int>>();
    if (v.size() != 2) throw UsageError("an edge is [source, target]");
    out.emplace_back(v[0], v[1]);
  }
  return out;
}

class StructLearnDriver final : public ExperimentDriver {
 public:
  explicit StructLearnDriver(const Manifest& m)
      : nodes_(m.environment.value("nodes", 5)),
        samples_(m.environment.value("samples", 100)),
        training_(m.training),
        train_(train_config_from_json(m.training)),
        components_(m.embedding.value("components", 2)),
        hyper_(env::BgeHyperparams::defaults(nodes_)) {
    if (nodes_ < 2 || nodes_ > env::kMaxGraphNodes) throw UsageError("structlearn needs 2..8 nodes");
    if (samples_ < 2) throw UsageError("structlearn needs at least two samples per dataset");
    const auto edges = edges_from_json(m.environment.at("edges"));
    for (const auto& [a, b] : edges)
      if (a < 0 || b < 0 || a >= nodes_ || b >= nodes_ || a == b) throw UsageError("edge out of range");
    const auto graph = env::Dag{nodes_, 0}.with_edges(edges);
    if (!graph.is_acyclic()) throw UsageError("the ground-truth graph has a cycle");
    Rng rng(derive_seed(m.seed, {kNetworkStream}));
    network_ = env::LinearGaussianNetwork::sample(graph, m.environment.value("noise_variance", 0.01), rng);
  }

  pce::PolicyKind policy_kind() const override { return pce::PolicyKind::kDiscrete; }
  std::vector<std::string> channels() const override {
    std::vector<std::string> out;
    for (int a = 0; a < nodes_ * nodes_; ++a) {
      const auto [s, t] = *env::decode_edge_action(a, nodes_);
      out.push_back(std::to_string(s) + "->" + std::to_string(t));
    }
    out.emplace_back("stop");
    return out;
  }

  json sample_reward(Rng& rng) const override { return {{"data", rows_to_json(env::sample_dataset(network_, samples_, rng))}}; }

  json fit_embedder(const std::vector<json>& train_rewards, Rng&) override {
    Matrix rows(static_cast<Eigen::Index>(train_rewards.size()), nodes_ * nodes_);
    for (std::size_t i = 0; i < train_rewards.size(); ++i)
      rows.row(static_cast<Eigen::Index>(i)) = summary(rows_from_json(train_rewards[i].at("data"))).transpose();
    pca_ = embed::PcaProjector::fit(rows, components_);
    return pca_->to_json();
  }
  void load_embedder(const json& doc) override { pca_ = embed::PcaProjector::from_json(doc); }

  Vector latent(const json& reward) const override {
    return require_pca().project(summary(rows_from_json(reward.at("data"))));
  }

  Matrix sample_latents(std::size_t n, Rng& rng) const override {
    const auto& pca = require_pca();
    Matrix out(static_cast<Eigen::Index>(n), pca.components());
    for (std::size_t i = 0; i < n; ++i)
      out.row(static_cast<Eigen::Index>(i)) = pca.project(summary(env::sample_dataset(network_, samples_, rng))).transpose();
    return out;
  }

  TrainedMember train_member(const json& reward, Rng& rng) const override {
    const env::StructureEnv env(env::BgeScore(rows_from_json(reward.at("data")), hyper_));
    gfn::MlpGfnModel model(env.encoding_size(), env.num_actions(), hidden_sizes(training_, "hidden", {128, 128}),
                           train_.loss != gfn::LossKind::kTrajectoryBalance, rng);
    auto result = gfn::train(model, env, train_, rng);
    return {model.to_json(), std::move(result.losses)};
  }

  Matrix extract(const json& checkpoint, const json& reward, const json& trajectory) const override {
    const env::StructureEnv env(env::BgeScore(rows_from_json(reward.at("data")), hyper_));
    const auto model = gfn::MlpGfnModel::from_json(checkpoint);
    std::vector<int> actions;
    for (const auto& [s, t] : edges_from_json(trajectory.at("edges"))) {
      if (s < 0 || t < 0 || s >= nodes_ || t >= nodes_) throw UsageError("trajectory edge out of range");
      actions.push_back(env::encode_edge_action(s, t, nodes_));
    }
    if (actions.empty()) throw UsageError("the structure trajectory has no edges");
    const auto states = env.follow(actions);
    return gfn::extract_policies(model, env, std::span(states.data(), actions.size()));
  }

 private:
  Vector summary(const Matrix& data) const {
    const Matrix r = env::r_matrix(data, hyper_);
    return Eigen::Map<const Vector>(r.data(), r.size());
  }
  const embed::PcaProjector& require_pca() const {
    if (!pca_) throw UsageError("the reward embedding has not been fitted (run fit-embed)");
    return *pca_;
  }

  int nodes_;
  int samples_;
  json training_;
  gfn::TrainConfig train_;
  int components_;
  env::BgeHyperparams hyper_;
  env::LinearGaussianNetwork network_;
  std::optional<embed::PcaProjector> pca_;
};

}  // namespace

std::unique_ptr<ExperimentDriver> make_driver(const Manifest& m) {
  try {
    switch (m.experiment) {
      case Experiment::kDiscreteGrid: return std::make_unique<DiscreteGridDriver>(m);
      case Experiment::kContinuousGrid: return std::make_unique<ContinuousGridDriver>(m);
      case Experiment::kSymReg: return std::make_unique<SymRegDriver>(m);
      case Experiment::kStructLearn: return std::make_unique<StructLearnDriver>(m);
    }
  } catch (const json::exception& e) {
    throw UsageError(std::string("malformed manifest section: ") + e.what());
  }
  throw UsageError("unknown experiment");
}

}  // namespace uqgfn::pipeline
