#include "uqgfn/pipeline/manifest.hpp"

#include <set>

#include "uqgfn/common/errors.hpp"
#include "uqgfn/common/io.hpp"
#include "uqgfn/embed/beta_vae.hpp"
#include "uqgfn/env/continuous_grid.hpp"
#include "uqgfn/env/discrete_grid.hpp"
#include "uqgfn/mlp/mlp_surrogate.hpp"

namespace uqgfn::pipeline {

using nlohmann::json;

std::string_view to_string(Experiment e) {
  switch (e) {
    case Experiment::kDiscreteGrid: return "discrete-grid";
    case Experiment::kContinuousGrid: return "continuous-grid";
    case Experiment::kSymReg: return "symreg";
    case Experiment::kStructLearn: return "structlearn";
  }
  return "?";
}

Experiment experiment_from_string(std::string_view name) {
  for (auto e : {Experiment::kDiscreteGrid, Experiment::kContinuousGrid, Experiment::kSymReg,
                 Experiment::kStructLearn})
    if (name == to_string(e)) return e;
  throw UsageError("unknown experiment: " + std::string(name));
}

std::string_view to_string(SurrogateKind k) { return k == SurrogateKind::kPce ? "pce" : "mlp"; }

SurrogateKind surrogate_kind_from_string(std::string_view name) {
  if (name == "pce") return SurrogateKind::kPce;
  if (name == "mlp") return SurrogateKind::kMlp;
  throw UsageError("unknown surrogate kind: " + std::string(name) + " (expected pce or mlp)");
}

Manifest Manifest::defaults(Experiment e) {
  Manifest m;
  m.experiment = e;
  m.mlp = mlp::MlpSurrogateConfig{}.to_json();
  switch (e) {
    case Experiment::kDiscreteGrid: {
      m.train_members = 50;
      m.test_members = 100;
      m.degree = 7;
      m.samples = 50000;
      m.environment = {{"reward", env::GridRewardConfig{}.to_json()}, {"max_length", 20}, {"start", {0, 0}}};
      m.training = {{"loss", "subtb"},         {"episodes", 20000},      {"batch_size", 64},
                    {"learning_rate", 1e-3},   {"temperature", 0.4},     {"buffer_capacity", 10000},
                    {"replay_batch", 0},       {"hidden", {128, 128}}};
      m.embedding = {{"vae", embed::VaeConfig{}.to_json()}, {"grids", 500}, {"augment", 10}};
      m.trajectory = {{"start", {0, 0}},
                      {"actions", {"right", "right", "right", "right", "right", "down", "down", "down", "down",
                                   "left", "left", "left", "left", "left", "up", "up", "right", "right", "stop"}}};
      break;
    }
    case Experiment::kContinuousGrid: {
      m.train_members = 50;
      m.test_members = 100;
      m.degree = 5;
      m.samples = 50000;
      m.environment = {{"reward", env::ContinuousRewardConfig{}.to_json()}};
      m.training = {{"episodes", 5000},   {"batch_size", 256},  {"learning_rate", 1e-3},
                    {"hidden", {100, 100}}, {"min_variance", 0.01}, {"max_variance", 1.0}};
      m.trajectory = {{"sample_member", 0}};
      break;
    }
    case Experiment::kSymReg: {
      m.train_members = 250;
      m.test_members = 250;
      m.degree = 14;
      m.samples = 10000;
      m.environment = {{"sigma", 0.5}, {"points", 100}, {"max_length", 10}};
      m.training = {{"loss", "tb"},        {"episodes", 10000}, {"batch_size", 64}, {"learning_rate", 1e-3},
                    {"temperature", 1.5},  {"embed", 32},       {"hidden", 64},     {"head_hidden", {64}}};
      m.embedding = {{"components", 2}};
      m.trajectory = {{"tokens", {"2", "-", "x", "+", "sin", "x"}}};
      break;
    }
    case Experiment::kStructLearn: {
      m.train_members = 250;
      m.test_members = 250;
      m.degree = 7;
      m.samples = 10000;
      m.environment = {{"nodes", 5},
                       {"samples", 100},
                       {"noise_variance", 0.01},
                       {"edges", {{0, 1}, {0, 2}, {1, 3}, {2, 3}, {1, 4}, {3, 4}, {2, 4}}}};
      m.training = {{"loss", "tb"}, {"episodes", 2000}, {"batch_size", 64}, {"learning_rate", 1e-3},
                    {"hidden", {128, 128}}};
      m.embedding = {{"components", 2}};
      m.trajectory = {{"edges", {{0, 1}, {0, 2}, {1, 3}, {2, 3}, {1, 4}, {3, 4}, {2, 4}}}};
      break;
    }
  }
  return m;
}

namespace {

void check_keys(const json& doc, const std::set<std::string>& allowed, const std::string& where) {
  if (!doc.is_object()) throw UsageError(where + " must be a JSON object");
  for (const auto& [key, value] : doc.items())
    if (!allowed.count(key)) throw UsageError("unknown key '" + key + "' in " + where);
}

void merge(json& target, const json& doc, const char* key) {
  if (!doc.contains(key)) return;
  if (!doc.at(key).is_object()) throw UsageError(std::string("manifest section '") + key + "' must be an object");
  target.merge_patch(doc.at(key));
}

}  // namespace

Manifest Manifest::from_json(const json& doc) {
  check_keys(doc, {"experiment", "seed", "ensemble", "out_dir", "surrogate", "environment", "training", "embedding",
                   "trajectory"},
             "manifest");
  if (!doc.contains("experiment")) throw UsageError("manifest needs an 'experiment'");
  try {
    Manifest m = defaults(experiment_from_string(doc.at("experiment").get<std::string>()));
    m.seed = doc.value("seed", m.seed);
    if (doc.contains("ensemble")) {
      const auto& e = doc.at("ensemble");
      check_keys(e, {"train", "test"}, "ensemble");
      m.train_members = e.value("train", m.train_members);
      m.test_members = e.value("test", m.test_members);
    }
    if (doc.contains("out_dir")) m.out_dir = doc.at("out_dir").get<std::string>();
    if (doc.contains("surrogate")) {
      const auto& s = doc.at("surrogate");
      check_keys(s, {"kind", "degree", "ridge", "samples", "mlp"}, "surrogate");
      if (s.contains("kind")) m.surrogate = surrogate_kind_from_string(s.at("kind").get<std::string>());
      m.degree = s.value("degree", m.degree);
      m.ridge = s.value("ridge", m.ridge);
      m.samples = s.value("samples", m.samples);
      merge(m.mlp, s, "mlp");
    }
    merge(m.environment, doc, "environment");
    merge(m.training, doc, "training");
    merge(m.embedding, doc, "embedding");
    if (doc.contains("trajectory")) m.trajectory = doc.at("trajectory");
    if (m.train_members < 2) throw UsageError("the training ensemble needs at least two members");
    if (m.test_members < 1) throw UsageError("the testing ensemble needs at least one member");
    if (m.degree < 0) throw UsageError("PCE degree must be non-negative");
    if (!(m.ridge >= 0.0)) throw UsageError("ridge penalty must be non-negative");
    if (m.samples < 1) throw UsageError("surrogate sample count must be positive");
    mlp::MlpSurrogateConfig::from_json(m.mlp);
    return m;
  } catch (const json::exception& e) {
    throw UsageError(std::string("malformed manifest: ") + e.what());
  }
}

json Manifest::to_json() const {
  return {{"experiment", to_string(experiment)},
          {"seed", seed},
          {"ensemble", {{"train", train_members}, {"test", test_members}}},
          {"out_dir", out_dir.generic_string()},
          {"surrogate",
           {{"kind", to_string(surrogate)}, {"degree", degree}, {"ridge", ridge}, {"samples", samples}, {"mlp", mlp}}},
          {"environment", environment},
          {"training", training},
          {"embedding", embedding},
          {"trajectory", trajectory}};
}

std::filesystem::path Manifest::experiment_dir() const { return out_dir / std::string(to_string(experiment)); }

Manifest load_manifest(const std::filesystem::path& path) { return Manifest::from_json(io::read_json(path)); }

}  // namespace uqgfn::pipeline
