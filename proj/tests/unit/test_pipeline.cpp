#include <gtest/gtest.h>

#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include "uqgfn/common/errors.hpp"
#include "uqgfn/common/io.hpp"
#include "uqgfn/mlp/mlp_surrogate.hpp"
#include "uqgfn/pce/policy_surrogate.hpp"
#include "uqgfn/pipeline/artifacts.hpp"
#include "uqgfn/pipeline/manifest.hpp"
#include "uqgfn/pipeline/pipeline.hpp"
#include "uqgfn/pipeline/statistics.hpp"

using namespace uqgfn;
using namespace uqgfn::pipeline;
using nlohmann::json;

namespace {

std::vector<double> normal_sample(double mean, double sd, std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> d(mean, sd);
  std::vector<double> out(n);
  for (auto& v : out) v = d(rng);
  return out;
}

class TempDir {
 public:
  explicit TempDir(const std::string& name)
      : path_(std::filesystem::temp_directory_path() / ("uqgfn-" + name + "-" + std::to_string(::getpid()))) {
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

std::map<std::string, std::string> tree_contents(const std::filesystem::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : std::filesystem::recursive_directory_iterator(root))
    if (e.is_regular_file()) out[std::filesystem::relative(e.path(), root).generic_string()] = io::read_text(e.path());
  return out;
}

Manifest tiny_continuous(const std::filesystem::path& out) {
  return Manifest::from_json({{"experiment", "continuous-grid"},
                              {"seed", 3},
                              {"ensemble", {{"train", 4}, {"test", 3}}},
                              {"out_dir", out.string()},
                              {"surrogate", {{"degree", 1}, {"samples", 50}}},
                              {"training", {{"episodes", 10}, {"batch_size", 16}, {"hidden", {8}}}}});
}

}  // namespace

TEST(Statistics, WassersteinOfIdenticalSamplesIsZero) {
  const auto a = normal_sample(0, 1, 500, 1);
  EXPECT_EQ(wasserstein1(a, a), 0.0);
  auto b = a;
  std::reverse(b.begin(), b.end());
  EXPECT_EQ(wasserstein1(a, b), 0.0);
}

TEST(Statistics, WassersteinLocationShift) {
  const auto a = normal_sample(0, 1, 10000, 2), b = normal_sample(1, 1, 10000, 3);
  EXPECT_NEAR(wasserstein1(a, b), 1.0, 0.05);
}

TEST(Statistics, WassersteinUnequalSizes) {
  EXPECT_NEAR(wasserstein1(std::vector<double>{0, 1}, std::vector<double>{0.5}), 0.5, 1e-15);
  EXPECT_NEAR(wasserstein1(std::vector<double>{0, 1, 2}, std::vector<double>{0, 2}), 1.0 / 3.0, 1e-15);
  EXPECT_THROW(wasserstein1(std::vector<double>{}, std::vector<double>{1}), UsageError);
}

TEST(Statistics, QuantilesInterpolateLinearly) {
  const std::vector<double> v{4, 1, 3, 2};
  EXPECT_DOUBLE_EQ(quantile(v, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(quantile(v, 1.0), 4.0);
  EXPECT_DOUBLE_EQ(quantile(v, 0.5), 2.5);
  EXPECT_DOUBLE_EQ(quantile(v, 0.25), 1.75);
  const auto q = report_quantiles(v);
  EXPECT_DOUBLE_EQ(q[2], 2.5);
  EXPECT_THROW(quantile(v, 1.5), UsageError);
  EXPECT_DOUBLE_EQ(variance(v), 1.25);
}

TEST(Statistics, MixtureRecoversSeparatedComponents) {
  auto v = normal_sample(0, 0.1, 600, 4);
  const auto w = normal_sample(5, 0.2, 400, 5);
  v.insert(v.end(), w.begin(), w.end());
  const auto g = fit_gaussian_mixture(v, 2);
  const std::size_t lo = g.means[0] < g.means[1] ? 0 : 1;
  EXPECT_NEAR(g.means[lo], 0.0, 0.02);
  EXPECT_NEAR(g.means[1 - lo], 5.0, 0.05);
  EXPECT_NEAR(g.weights[lo], 0.6, 0.01);
  EXPECT_LT(g.bic, fit_gaussian_mixture(v, 1).bic);
}

TEST(Statistics, ModeCount) {
  auto v = normal_sample(0, 0.1, 600, 6);
  const auto w = normal_sample(5, 0.1, 400, 7);
  EXPECT_EQ(mode_count(v), 1);
  v.insert(v.end(), w.begin(), w.end());
  EXPECT_EQ(mode_count(v), 2);
  EXPECT_EQ(mode_count(std::vector<double>(50, 0.3)), 1);

  // A point mass at zero (a masked action) next to a spread of probabilities.
  std::vector<double> stop(40, 0.0);
  const auto live = normal_sample(0.7, 0.05, 60, 8);
  stop.insert(stop.end(), live.begin(), live.end());
  EXPECT_EQ(mode_count(stop), 2);

  // Skewed but unimodal.
  auto skewed = normal_sample(0, 1, 20000, 9);
  for (auto& x : skewed) x = std::exp(0.5 * x);
  EXPECT_EQ(mode_count(skewed), 1);
}

TEST(Manifest, DefaultsFollowTheExperiments) {
  const auto grid = Manifest::defaults(Experiment::kDiscreteGrid);
  EXPECT_EQ(grid.train_members, 50u);
  EXPECT_EQ(grid.test_members, 100u);
  EXPECT_EQ(grid.samples, 50000u);
  const auto sym = Manifest::defaults(Experiment::kSymReg);
  EXPECT_EQ(sym.train_members, 250u);
  EXPECT_EQ(sym.samples, 10000u);
  EXPECT_EQ(Manifest::defaults(Experiment::kStructLearn).trajectory.at("edges").size(), 7u);
}

TEST(Manifest, MergesSectionsAndRoundTrips) {
  const auto m = Manifest::from_json({{"experiment", "discrete-grid"},
                                      {"seed", 9},
                                      {"ensemble", {{"train", 20}}},
                                      {"training", {{"episodes", 100}}},
                                      {"surrogate", {{"kind", "mlp"}, {"degree", 3}}}});
  EXPECT_EQ(m.seed, 9u);
  EXPECT_EQ(m.train_members, 20u);
  EXPECT_EQ(m.test_members, 100u);
  EXPECT_EQ(m.training.at("episodes"), 100);
  EXPECT_EQ(m.training.at("loss"), "subtb");
  EXPECT_EQ(m.surrogate, SurrogateKind::kMlp);
  EXPECT_EQ(Manifest::from_json(m.to_json()).to_json(), m.to_json());
  EXPECT_EQ(m.experiment_dir(), std::filesystem::path("runs") / "discrete-grid");
}

TEST(Manifest, RejectsInvalidInput) {
  EXPECT_THROW(Manifest::from_json({{"seed", 1}}), UsageError);
  EXPECT_THROW(Manifest::from_json({{"experiment", "maze"}}), UsageError);
  EXPECT_THROW(Manifest::from_json({{"experiment", "symreg"}, {"colour", 1}}), UsageError);
  EXPECT_THROW(Manifest::from_json({{"experiment", "symreg"}, {"ensemble", {{"train", 1}}}}), UsageError);
  EXPECT_THROW(Manifest::from_json({{"experiment", "symreg"}, {"surrogate", {{"degree", -1}}}}), UsageError);
  EXPECT_THROW(Manifest::from_json({{"experiment", "symreg"}, {"surrogate", {{"kind", "gp"}}}}), UsageError);
  EXPECT_THROW(Manifest::from_json({{"experiment", "symreg"}, {"seed", "x"}}), UsageError);
  EXPECT_THROW(load_manifest("/nonexistent/manifest.json"), IoError);
}

TEST(Artifacts, PlotTableRoundTrip) {
  TempDir tmp("plot");
  Tensor3 t(2, 3, 2);
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t s = 0; s < 3; ++s)
      for (std::size_t c = 0; c < 2; ++c) t(i, s, c) = 0.1 * static_cast<double>(i + s) + 1e-17 * c;
  const auto rows = plot_rows("test", t, {"a", "b"});
  ASSERT_EQ(rows.size(), 12u);
  write_plot_table(tmp.path() / "p.csv", rows);
  EXPECT_EQ(read_plot_table(tmp.path() / "p.csv"), rows);
  write_plot_table(tmp.path() / "q.csv", {{"test", &t}}, {"a", "b"});
  EXPECT_EQ(read_plot_table(tmp.path() / "q.csv"), rows);
}

TEST(Artifacts, EmptyPlotTableIsHeaderOnly) {
  TempDir tmp("empty");
  write_plot_table(tmp.path() / "e.csv", std::vector<PlotRow>{});
  EXPECT_EQ(io::read_text(tmp.path() / "e.csv"), "source,step,channel,value\n");
  EXPECT_TRUE(read_plot_table(tmp.path() / "e.csv").empty());
}

TEST(Artifacts, SampleTableRowCountAndRoundTrip) {
  TempDir tmp("samples");
  Tensor3 t(7, 4, 3);
  Rng rng(1);
  for (std::size_t i = 0; i < 7; ++i)
    for (std::size_t s = 0; s < 4; ++s)
      for (std::size_t c = 0; c < 3; ++c) t(i, s, c) = standard_normal(rng);
  write_sample_table(tmp.path() / "s.csv", t, {"x", "y", "z"});
  std::ifstream in(tmp.path() / "s.csv");
  std::size_t lines = 0;
  for (std::string l; std::getline(in, l);) ++lines;
  EXPECT_EQ(lines, 1u + 7u * 4u * 3u);
  EXPECT_EQ(read_sample_table(tmp.path() / "s.csv", {"x", "y", "z"}).data(), t.data());
  EXPECT_THROW(read_sample_table(tmp.path() / "s.csv", {"x", "y"}), IoError);
}

TEST(Artifacts, TestRoleIsRejectedForFitting) {
  EXPECT_NO_THROW(require_training_role(Role::kTrain, "x"));
  EXPECT_THROW(require_training_role(Role::kTest, "x"), UsageError);
  EXPECT_THROW(role_from_string("validation"), UsageError);
}

TEST(Artifacts, ArchiveAndTensorRoundTrip) {
  Archive a;
  a.experiment = Experiment::kSymReg;
  a.role = Role::kTest;
  MemberRecord ok;
  ok.index = 0;
  ok.seed = 123;
  ok.reward = {{"k", 1}};
  ok.latent = Vector::Constant(2, 0.25);
  ok.checkpoint = "member-0000.json";
  ok.final_loss = 0.5;
  MemberRecord bad = ok;
  bad.index = 1;
  bad.ok = false;
  bad.checkpoint.clear();
  bad.error = "diverged";
  a.members = {ok, bad};
  const Archive b = Archive::from_json(a.to_json());
  EXPECT_EQ(b.to_json(), a.to_json());
  EXPECT_EQ(b.failures(), 1u);
  EXPECT_EQ(b.latents().rows(), 1);

  PolicyTensor p;
  p.channels = {"a", "b"};
  p.members = {0, 2};
  p.trajectory = {{"tokens", {"x"}}};
  p.values = Tensor3(2, 1, 2, 0.5);
  EXPECT_EQ(PolicyTensor::from_json(p.to_json()).to_json(), p.to_json());
  EXPECT_EQ(trajectory_hash(p.trajectory), trajectory_hash(json{{"tokens", {"x"}}}));
  EXPECT_NE(trajectory_hash(p.trajectory), trajectory_hash(json{{"tokens", {"x", "x"}}}));
}

TEST(Compare, IdenticalTensorsHaveZeroDistance) {
  Tensor3 t(30, 2, 2);
  Rng rng(4);
  for (std::size_t i = 0; i < 30; ++i)
    for (std::size_t s = 0; s < 2; ++s) {
      const double p = uniform01(rng);
      t(i, s, 0) = p;
      t(i, s, 1) = 1 - p;
    }
  const auto r = compare_tensors(t, t, t, {"a", "b"});
  ASSERT_EQ(r.channels.size(), 4u);
  for (const auto& c : r.channels) {
    EXPECT_EQ(c.w1_surrogate_test, 0.0);
    ASSERT_TRUE(c.variance_ratio.has_value());
    EXPECT_DOUBLE_EQ(*c.variance_ratio, 1.0);
  }
  EXPECT_DOUBLE_EQ(r.fraction_within(1.5), 1.0);
  EXPECT_EQ(ComparisonReport::from_json(r.to_json()).to_json(), r.to_json());
}

TEST(Compare, VarianceRatioIsUnsetForConstantTesting) {
  const Tensor3 test(5, 1, 1, 0.2);
  Tensor3 sur(5, 1, 1, 0.2);
  sur(0, 0, 0) = 0.3;
  const auto r = compare_tensors(sur, test, test, {"a"});
  EXPECT_FALSE(r.channels[0].variance_ratio.has_value());
  EXPECT_TRUE(r.to_json().at("channels")[0].at("variance_ratio").is_null());
  EXPECT_THROW(compare_tensors(sur, Tensor3(5, 2, 1), test, {"a"}), UsageError);
}

TEST(Surrogate, ConstantPolicyArchiveGivesConstantSamples) {
  Rng rng(5);
  Matrix latents(20, 2);
  for (Eigen::Index i = 0; i < latents.size(); ++i) latents.data()[i] = standard_normal(rng);
  Tensor3 policies(20, 3, 5);
  const double p[5] = {0.1, 0.2, 0.3, 0.4, 0.0};
  for (std::size_t i = 0; i < 20; ++i)
    for (std::size_t s = 0; s < 3; ++s)
      for (std::size_t c = 0; c < 5; ++c) policies(i, s, c) = p[c];
  const auto standardisation = pce::InputStandardisation::gaussian_mle(latents);
  pce::PolicySurrogateOptions options;
  options.ridge.degree = 3;
  const auto pce_model = pce::fit_policy_surrogate(latents, policies, pce::PolicyKind::kDiscrete, options, standardisation);
  mlp::MlpSurrogateConfig config;
  config.epochs = 3000;
  const auto mlp_model =
      mlp::train_mlp_surrogate(latents, policies, pce::PolicyKind::kDiscrete, config, standardisation, rng);
  Matrix fresh(200, 2);
  for (Eigen::Index i = 0; i < fresh.size(); ++i) fresh.data()[i] = 2.0 * standard_normal(rng);
  const Tensor3 from_pce = pce_model.sample_batch(fresh), from_mlp = mlp_model.sample_batch(latents);
  for (const Tensor3* s : {&from_pce, &from_mlp})
    for (std::size_t i = 0; i < s->items(); ++i)
      for (std::size_t t = 0; t < 3; ++t)
        for (std::size_t c = 0; c < 5; ++c) EXPECT_NEAR((*s)(i, t, c), p[c], 1e-3);
}

TEST(Pipeline, StagesProduceConsistentArtefacts) {
  TempDir tmp("stages");
  Pipeline p(tiny_continuous(tmp.path()));
  EXPECT_EQ(p.run_all(), 0u);
  const auto train = PolicyTensor::from_json(io::read_json(p.policies_path(Role::kTrain)));
  const auto test = PolicyTensor::from_json(io::read_json(p.policies_path(Role::kTest)));
  EXPECT_EQ(train.values.items(), 4u);
  EXPECT_EQ(test.values.items(), 3u);
  EXPECT_EQ(train.values.steps(), 5u);
  EXPECT_EQ(train.channels, (std::vector<std::string>{"mean_x", "var_x", "mean_y", "var_y"}));
  const std::string hash = trajectory_hash(test.trajectory);
  EXPECT_TRUE(std::filesystem::exists(p.report_dir(hash) / "policies.csv"));
  const auto report = ComparisonReport::from_json(io::read_json(p.report_dir(hash) / "report.json"));
  EXPECT_EQ(report.channels.size(), 20u);
  for (const auto& c : report.channels) EXPECT_GE(c.w1_surrogate_test, 0.0);
  EXPECT_EQ(read_sample_table(p.samples_path(), train.channels).items(), 50u);
  for (const auto& e : std::filesystem::recursive_directory_iterator(p.dir()))
    if (e.is_regular_file())
      EXPECT_EQ(io::read_text(e.path()).find(tmp.path().string()), std::string::npos) << e.path();
}

TEST(Pipeline, SurrogateFitRejectsTestingData) {
  TempDir tmp("roles");
  Pipeline p(tiny_continuous(tmp.path()));
  p.run_all();
  std::filesystem::copy_file(p.policies_path(Role::kTest), p.policies_path(Role::kTrain),
                             std::filesystem::copy_options::overwrite_existing);
  EXPECT_THROW(p.fit_surrogate(), UsageError);
}

TEST(Pipeline, RerunIsByteIdentical) {
  TempDir a("rerun-a"), b("rerun-b");
  Pipeline(tiny_continuous(a.path())).run_all();
  Pipeline(tiny_continuous(b.path())).run_all();
  const auto x = tree_contents(a.path()), y = tree_contents(b.path());
  EXPECT_GT(x.size(), 10u);
  EXPECT_EQ(x, y);
}

TEST(Pipeline, StagesNeedTheirInputs) {
  TempDir tmp("missing");
  Pipeline p(tiny_continuous(tmp.path()));
  EXPECT_THROW(p.train_ensemble(Role::kTrain), IoError);
  EXPECT_THROW(p.compare(), IoError);
}
