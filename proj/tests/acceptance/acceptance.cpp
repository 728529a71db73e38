#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <Eigen/Eigenvalues>

#include "gradient_check.hpp"
#include "uqgfn/common/io.hpp"
#include "uqgfn/embed/beta_vae.hpp"
#include "uqgfn/embed/kl_expansion.hpp"
#include "uqgfn/env/continuous_grid.hpp"
#include "uqgfn/env/discrete_grid.hpp"
#include "uqgfn/env/structlearn.hpp"
#include "uqgfn/env/symreg.hpp"
#include "uqgfn/gfn/continuous.hpp"
#include "uqgfn/gfn/losses.hpp"
#include "uqgfn/gfn/models.hpp"
#include "uqgfn/gfn/sampler.hpp"
#include "uqgfn/gfn/tabular.hpp"
#include "uqgfn/gfn/trainer.hpp"
#include "uqgfn/mlp/mlp_surrogate.hpp"
#include "uqgfn/pce/basis.hpp"
#include "uqgfn/pce/logit.hpp"
#include "uqgfn/pce/multi_index.hpp"
#include "uqgfn/pce/pce_model.hpp"
#include "uqgfn/pce/sobol.hpp"
#include "uqgfn/pipeline/pipeline.hpp"

using namespace uqgfn;
using nlohmann::json;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void check(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << "[failed: " << what << "] ";
    }
  }
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

class ScratchDir {
 public:
  explicit ScratchDir(const std::string& tag)
      : path_(std::filesystem::temp_directory_path() /
              ("uqgfn-acceptance-" + tag + "-" + std::to_string(::getpid()))) {
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~ScratchDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

// ---------------------------------------------------------------------------

void pce_exactness(Outcome& o) {
  const auto t0 = Clock::now();
  Rng rng(0);
  auto f = [](double a, double b) { return 1.5 - 0.7 * a + 2.0 * b + 0.3 * a * a - 1.1 * a * b + 0.45 * b * b; };
  Matrix x(200, 2);
  Vector y(200);
  for (Eigen::Index i = 0; i < 200; ++i) {
    x(i, 0) = standard_normal(rng);
    x(i, 1) = standard_normal(rng);
    y(i) = f(x(i, 0), x(i, 1));
  }
  const auto model = pce::fit_ridge(x, y, pce::RidgeOptions{pce::BasisFamily::kHermite, 2, 0.0});
  double worst = 0.0;
  for (int k = 0; k < 1000; ++k) {
    Vector p(2);
    p << 2.0 * standard_normal(rng), 2.0 * standard_normal(rng);
    worst = std::max(worst, std::abs(model.evaluate(p) - f(p(0), p(1))));
  }
  const double elapsed = seconds_since(t0);
  o.detail << "held-out max error " << worst << ", " << elapsed << " s ";
  o.check(worst <= 1e-8, "max error <= 1e-8");
  o.check(elapsed < 1.0, "runtime < 1 s");
}

// Nodes and weights of the n-point Gauss rule for a probability measure with the
// given symmetric Jacobi off-diagonal.
std::pair<Vector, Vector> golub_welsch(int n, const std::function<double(int)>& off_diagonal) {
  Matrix j = Matrix::Zero(n, n);
  for (int k = 1; k < n; ++k) j(k, k - 1) = j(k - 1, k) = off_diagonal(k);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(j);
  return {eig.eigenvalues(), eig.eigenvectors().row(0).transpose().array().square()};
}

void basis_orthonormality(Outcome& o) {
  struct Family {
    pce::BasisFamily family;
    std::function<double(int)> off;
    const char* name;
  };
  const Family families[] = {
      {pce::BasisFamily::kHermite, [](int k) { return std::sqrt(static_cast<double>(k)); }, "hermite"},
      {pce::BasisFamily::kLegendre, [](int k) { return k / std::sqrt(4.0 * k * k - 1.0); }, "legendre"},
  };
  for (const auto& fam : families) {
    const auto [nodes, weights] = golub_welsch(20, fam.off);
    double worst = 0.0;
    for (int i = 0; i <= 8; ++i)
      for (int j = 0; j <= 8; ++j) {
        double s = 0.0;
        for (Eigen::Index q = 0; q < nodes.size(); ++q)
          s += weights(q) * pce::basis_eval(fam.family, i, nodes(q)) * pce::basis_eval(fam.family, j, nodes(q));
        worst = std::max(worst, std::abs(s - (i == j ? 1.0 : 0.0)));
      }
    o.detail << fam.name << " max deviation " << worst << " ";
    o.check(worst <= 1e-10, std::string(fam.name) + " orthonormal to 1e-10");
  }
}

void enumerate_indices(int dim, int budget, std::vector<int>& cur, std::set<std::vector<int>>& out) {
  if (static_cast<int>(cur.size()) == dim) {
    out.insert(cur);
    return;
  }
  for (int v = 0; v <= budget; ++v) {
    cur.push_back(v);
    enumerate_indices(dim, budget - v, cur, out);
    cur.pop_back();
  }
}

void multi_index_count(Outcome& o) {
  int cases = 0;
  auto verify = [&](int dim, int degree) {
    std::set<std::vector<int>> brute;
    std::vector<int> cur;
    enumerate_indices(dim, degree, cur, brute);
    const pce::MultiIndexSet set(dim, degree);
    const std::set<std::vector<int>> built(set.indices().begin(), set.indices().end());
    const bool ok = set.size() == brute.size() && built == brute &&
                    pce::MultiIndexSet::expected_size(dim, degree) == brute.size();
    o.check(ok, "dimension " + std::to_string(dim) + " degree " + std::to_string(degree));
    ++cases;
  };
  for (int dim = 1; dim <= 14; ++dim)
    for (int degree = 0; degree <= 4; ++degree) verify(dim, degree);
  for (int dim = 1; dim <= 4; ++dim)
    for (int degree = 5; degree <= 14; ++degree) verify(dim, degree);
  o.detail << cases << " (dimension, degree) pairs ";
}

void jitter(const std::vector<nn::Parameter*>& params, Rng& rng) {
  for (auto* p : params)
    for (Eigen::Index i = 0; i < p->value.size(); ++i) p->value(i) += 0.05 * standard_normal(rng);
}

template <class Env, class Model>
double discrete_probe(Model& model, const Env& env, gfn::LossKind kind, std::size_t batch, int probes,
                      std::uint64_t seed) {
  Rng rng(seed);
  jitter(model.parameters(), rng);
  const auto trajs = gfn::sample_trajectories(model, env, batch, {0.2, 1.0}, rng);
  std::vector<const gfn::Trajectory<typename Env::State>*> ptrs;
  for (const auto& t : trajs) ptrs.push_back(&t);
  const auto report = test_support::probe_gradients(
      model.parameters(),
      [&](nn::Tape& t) {
        return gfn::batch_loss(t, model, env, std::span<const gfn::Trajectory<typename Env::State>* const>(ptrs),
                               kind);
      },
      probes, seed + 1);
  return report.max_relative_error;
}

void gradient_correctness(Outcome& o) {
  const auto t0 = Clock::now();
  constexpr int kProbes = 25;
  std::vector<std::pair<std::string, double>> errors;
  {
    Rng rng(1);
    const env::DiscreteGridEnv env(env::sample_discrete_reward(env::GridRewardConfig{}, rng), 20, env::Cell{0, 0});
    gfn::MlpGfnModel model(env.encoding_size(), env.num_actions(), {32, 32}, true, rng);
    errors.emplace_back("discrete-grid subtb", discrete_probe(model, env, gfn::LossKind::kSubTrajectoryBalance, 8,
                                                              kProbes, 11));
  }
  {
    Rng rng(2);
    const auto spec = env::sample_continuous_spec(env::ContinuousRewardConfig{}, rng);
    const auto task = env::make_continuous_task(spec);
    gfn::ContinuousGfnModel model({16, 16}, rng);
    const auto trajs = gfn::sample_continuous(model, task, 8, {0.0, 1.0}, rng);
    auto params = model.network_parameters();
    jitter(params, rng);
    params.push_back(&model.log_z());
    const auto report = test_support::probe_gradients(
        params, [&](nn::Tape& t) { return gfn::continuous_trajectory_balance(t, model, trajs); }, kProbes, 12);
    errors.emplace_back("continuous-grid tb", report.max_relative_error);
  }
  {
    Rng rng(3);
    const env::SymRegEnv env(env::make_noisy_target(0.5, rng));
    gfn::RecurrentGfnModel model(env.vocabulary_size(), 8, 16, {16}, env.num_actions(), false, rng);
    errors.emplace_back("symreg tb", discrete_probe(model, env, gfn::LossKind::kTrajectoryBalance, 8, kProbes, 13));
  }
  {
    Rng rng(4);
    const auto net = env::LinearGaussianNetwork::sample(env::default_ground_truth(), 0.01, rng);
    const env::StructureEnv env(env::BgeScore(env::sample_dataset(net, 100, rng), env::BgeHyperparams::defaults(5)));
    gfn::MlpGfnModel model(env.encoding_size(), env.num_actions(), {32, 32}, false, rng);
    errors.emplace_back("structlearn tb", discrete_probe(model, env, gfn::LossKind::kTrajectoryBalance, 8, kProbes,
                                                         14));
  }
  {
    Rng rng(5);
    embed::VaeConfig cfg;
    cfg.hidden = 16;
    embed::BetaVae vae(cfg, rng);
    Matrix x(cfg.input_dim(), 4);
    for (Eigen::Index i = 0; i < 4; ++i)
      x.col(i) = env::sample_discrete_reward(env::GridRewardConfig{}, rng).one_hot();
    const Matrix noise = Matrix::Random(cfg.latent, 4);
    const auto report = test_support::probe_gradients(
        vae.parameters(), [&](nn::Tape& t) { return vae.loss(t, x, noise); }, kProbes, 15);
    errors.emplace_back("beta-vae", report.max_relative_error);
  }
  {
    Rng rng(6);
    const Matrix latents = Matrix::Random(30, 3);
    mlp::MlpSurrogateConfig cfg;
    cfg.epochs = 0;
    auto s = mlp::train_mlp_surrogate(latents, Tensor3(30, 4, 5, 0.2), pce::PolicyKind::kDiscrete, cfg,
                                      pce::InputStandardisation::gaussian_mle(latents), rng);
    jitter(s.network().parameters(), rng);
    const Matrix inputs = s.standardisation().apply_rows(latents).transpose();
    const Matrix targets = Matrix::Random(20, 30).cwiseAbs() / 2.0;
    const auto report = test_support::probe_gradients(
        s.network().parameters(), [&](nn::Tape& t) { return s.loss(t, inputs, targets); }, kProbes, 16);
    errors.emplace_back("mlp surrogate", report.max_relative_error);
  }
  for (const auto& [name, err] : errors) {
    o.detail << name << " " << err << "; ";
    o.check(err <= 1e-4, name + " rel. err <= 1e-4");
  }
  const double elapsed = seconds_since(t0);
  o.detail << kProbes << " probes each, " << elapsed << " s ";
  o.check(elapsed < 30.0, "runtime < 30 s");
}

void exact_end_cells(const env::DiscreteGridEnv& env, const env::DiscreteGridEnv::State& s,
                     std::vector<double>& mass) {
  const auto mask = env.valid_actions(s);
  for (int a = 0; a < env.num_actions(); ++a) {
    if (!mask[static_cast<std::size_t>(a)]) continue;
    const auto next = env.step(s, a);
    if (env.is_terminal(next))
      mass[static_cast<std::size_t>(next.row * env.grid().size() + next.col)] += std::exp(env.log_reward(next));
    else
      exact_end_cells(env, next, mass);
  }
}

void proportional_sampling(Outcome& o) {
  const auto t0 = Clock::now();
  env::GridRewardConfig config;
  config.size = 4;
  config.centres = {{1, 1}};
  const std::vector<env::Shift> shifts{env::Shift::kNone};
  const env::DiscreteGridEnv env(env::RewardGrid(config, shifts), 20, env::Cell{3, 3});
  Rng rng(0);
  std::vector<double> exact(16, 0.0);
  exact_end_cells(env, env.initial_state(rng), exact);
  double z = 0.0;
  for (double m : exact) z += m;

  gfn::MlpGfnModel model(env.encoding_size(), env.num_actions(), {64, 64}, false, rng);
  gfn::TrainConfig train;
  train.episodes = 2000;
  gfn::train(model, env, train, rng);
  constexpr std::size_t kRollouts = 10000;
  const auto trajs = gfn::sample_trajectories(model, env, kRollouts, {0.0, 1.0}, rng);
  std::vector<double> empirical(16, 0.0);
  for (const auto& t : trajs)
    empirical[static_cast<std::size_t>(t.states.back().row * 4 + t.states.back().col)] += 1.0 / kRollouts;
  double l1 = 0.0;
  for (std::size_t c = 0; c < 16; ++c) l1 += std::abs(empirical[c] - exact[c] / z);
  const double elapsed = seconds_since(t0);
  o.detail << "L1 over terminal cells " << l1 << ", log Z " << model.log_z().value(0, 0) << " vs " << std::log(z)
           << ", " << elapsed << " s ";
  o.check(l1 <= 0.1, "L1 <= 0.1");
  o.check(elapsed < 300.0, "runtime < 5 min");
}

void loss_oracles(Outcome& o) {
  Rng rng(7);
  double worst = 0.0;
  auto track = [&](double a, double b) { worst = std::max(worst, std::abs(a - b)); };
  auto randoms = [&](std::size_t n) {
    std::vector<double> v(n);
    for (auto& x : v) x = standard_normal(rng);
    return v;
  };

  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> in(3), out(2);
    for (auto& x : in) x = std::exp(standard_normal(rng));
    for (auto& x : out) x = std::exp(standard_normal(rng));
    const double r = std::log((in[0] + in[1] + in[2]) / (out[0] + out[1]));
    track(gfn::flow_matching_loss(in, out).value, r * r);
  }

  const std::vector<int> lengths{3, 1, 4, 2};
  const int total = 10;
  const auto lpf = randoms(total), lpb = randoms(total), lflow = randoms(total), lr = randoms(lengths.size());
  const double lz = 0.4;
  nn::Tape tape;
  gfn::BatchTerms terms;
  terms.log_pf = tape.constant(Eigen::Map<const Matrix>(lpf.data(), 1, total));
  terms.log_pb = tape.constant(Eigen::Map<const Matrix>(lpb.data(), 1, total));
  terms.log_flow = tape.constant(Eigen::Map<const Matrix>(lflow.data(), 1, total));
  terms.log_z = tape.constant(Matrix::Constant(1, 1, lz));
  terms.lengths = lengths;
  terms.log_reward = lr;
  // Direct products of probabilities, independent of the library's log-space code.
  double tb = 0.0, subtb = 0.0, db = 0.0, pairs = 0.0, transitions = 0.0;
  int off = 0;
  for (std::size_t i = 0; i < lengths.size(); ++i) {
    const int l = lengths[i];
    std::vector<double> flows(lflow.begin() + off, lflow.begin() + off + l);
    flows.push_back(lr[i]);
    auto ratio = [&](int m, int n, double head) {
      double num = std::exp(head), den = std::exp(flows[static_cast<std::size_t>(n)]);
      for (int t = m; t < n; ++t) {
        num *= std::exp(lpf[static_cast<std::size_t>(off + t)]);
        den *= std::exp(lpb[static_cast<std::size_t>(off + t)]);
      }
      return std::pow(std::log(num / den), 2);
    };
    tb += ratio(0, l, lz);
    for (int m = 0; m < l; ++m) {
      for (int n = m + 1; n <= l; ++n) {
        subtb += ratio(m, n, flows[static_cast<std::size_t>(m)]);
        pairs += 1.0;
      }
      db += ratio(m, m + 1, flows[static_cast<std::size_t>(m)]);
      transitions += 1.0;
    }
    off += l;
  }
  track(gfn::trajectory_balance(terms).scalar(), tb / static_cast<double>(lengths.size()));
  track(gfn::subtrajectory_balance(terms).scalar(), subtb / pairs);
  track(gfn::detailed_balance(terms).scalar(), db / transitions);
  o.detail << "max deviation from scalar oracles " << worst << "; ";
  o.check(worst <= 1e-12, "batch losses match oracles to 1e-12");

  // Six-state DAG with two sinks and a merge; flows split evenly over complete paths.
  const auto dag = gfn::TabularDag::make(6, {{0, 1}, {0, 2}, {1, 3}, {2, 3}, {1, 4}, {3, 5}}, {0, 0, 0, 0, 2.0, 5.0});
  auto model = gfn::TabularFlowModel::from_edge_flows(dag, dag.path_split_edge_flows());
  const auto paths = dag.complete_trajectories();
  nn::Tape t2;
  const auto valid = model.terms(t2, paths);
  const double values[] = {model.flow_matching(t2).scalar(), gfn::trajectory_balance(valid).scalar(),
                           gfn::subtrajectory_balance(valid).scalar(), gfn::detailed_balance(valid).scalar()};
  double largest = 0.0;
  for (double v : values) largest = std::max(largest, std::abs(v));
  o.detail << "valid flow losses max " << largest;
  o.check(largest <= 1e-12, "all losses vanish on the valid flow");
}

void kl_expansion(Outcome& o) {
  const embed::KlBasis basis;
  const auto x = env::symreg_grid();
  Rng rng(8);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    Vector z(10);
    for (auto& v : z) v = standard_normal(rng);
    const Vector back = embed::kl_coefficients(basis, x, embed::kl_synthesise(basis, x, z), 2);
    worst = std::max({worst, std::abs(back(0) - z(0)), std::abs(back(1) - z(1))});
  }
  o.detail << "max (z1, z2) error " << worst << "; ";
  o.check(worst <= 1e-2, "KL coefficients within 1e-2");

  constexpr int kPaths = 10000;
  double s = 0.0, s2 = 0.0;
  for (int k = 0; k < kPaths; ++k) {
    const double end = env::sample_wiener_path(x, rng).back();
    s += end;
    s2 += end * end;
  }
  const double var = s2 / kPaths - (s / kPaths) * (s / kPaths);
  const double expected = x.back() - x.front();
  o.detail << "endpoint variance " << var << " vs " << expected;
  o.check(std::abs(var / expected - 1.0) <= 0.05, "endpoint variance within 5%");
}

// Normal-gamma marginal likelihood of one variable by 2-d trapezoidal quadrature
// over (mean, log precision).
double one_node_marginal_by_quadrature(const Vector& x, const env::BgeHyperparams& h) {
  const double n = static_cast<double>(x.size());
  const double k0 = h.alpha_mu, a0 = h.alpha_w / 2.0, b0 = h.t(0, 0) / 2.0, mu0 = h.nu(0);
  auto log_joint = [&](double mu, double log_tau) {
    const double tau = std::exp(log_tau);
    double ll = 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i) ll += -0.5 * tau * (x(i) - mu) * (x(i) - mu);
    ll += 0.5 * n * (log_tau - std::log(2.0 * std::numbers::pi));
    const double prior_mu = 0.5 * (std::log(k0) + log_tau - std::log(2.0 * std::numbers::pi)) -
                            0.5 * k0 * tau * (mu - mu0) * (mu - mu0);
    const double prior_tau = a0 * std::log(b0) - std::lgamma(a0) + a0 * log_tau - b0 * tau;  // includes d tau = tau d log tau
    return ll + prior_mu + prior_tau;
  };
  const double mean = x.mean();
  const double sd = std::sqrt((x.array() - mean).square().mean());
  const double mu_lo = mean - 10.0 * sd / std::sqrt(n), mu_hi = mean + 10.0 * sd / std::sqrt(n);
  const double lt_c = -2.0 * std::log(sd), lt_lo = lt_c - 3.0, lt_hi = lt_c + 3.0;
  constexpr int kGrid = 600;
  const double dmu = (mu_hi - mu_lo) / kGrid, dlt = (lt_hi - lt_lo) / kGrid;
  std::vector<double> logs;
  logs.reserve((kGrid + 1) * (kGrid + 1));
  double peak = -std::numeric_limits<double>::infinity();
  for (int i = 0; i <= kGrid; ++i)
    for (int j = 0; j <= kGrid; ++j) {
      const double w = (i == 0 || i == kGrid ? 0.5 : 1.0) * (j == 0 || j == kGrid ? 0.5 : 1.0);
      const double v = log_joint(mu_lo + i * dmu, lt_lo + j * dlt) + std::log(w);
      logs.push_back(v);
      peak = std::max(peak, v);
    }
  double sum = 0.0;
  for (double v : logs) sum += std::exp(v - peak);
  return peak + std::log(sum * dmu * dlt);
}

double posterior_l1(int nodes, std::size_t episodes, Rng& rng) {
  env::Dag chain{nodes, 0};
  for (int i = 0; i + 1 < nodes; ++i) chain.add_edge(i, i + 1);
  const auto net = env::LinearGaussianNetwork::sample(chain, 1.0, rng);
  const env::StructureEnv env(env::BgeScore(env::sample_dataset(net, 30, rng), env::BgeHyperparams::defaults(nodes)));
  const auto dags = env::enumerate_dags(nodes);
  std::map<std::uint64_t, double> exact;
  double top = -std::numeric_limits<double>::infinity();
  for (const auto& d : dags) top = std::max(top, env.bge().score(d));
  double z = 0.0;
  for (const auto& d : dags) z += exact[d.edges] = std::exp(env.bge().score(d) - top);
  gfn::MlpGfnModel model(env.encoding_size(), env.num_actions(), {64, 64}, false, rng);
  gfn::TrainConfig train;
  train.episodes = episodes;
  gfn::train(model, env, train, rng);
  constexpr std::size_t kRollouts = 10000;
  std::map<std::uint64_t, double> empirical;
  for (const auto& t : gfn::sample_trajectories(model, env, kRollouts, {0.0, 1.0}, rng))
    empirical[t.states.back().graph.edges] += 1.0 / kRollouts;
  double l1 = 0.0;
  for (const auto& [edges, mass] : exact) l1 += std::abs(mass / z - empirical[edges]);
  for (const auto& [edges, mass] : empirical)
    if (!exact.contains(edges)) l1 += mass;
  return l1;
}

void bge_correctness(Outcome& o) {
  const auto t0 = Clock::now();
  Rng rng(0);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    Matrix x(40, 2);
    for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = standard_normal(rng);
    x.col(1) += (0.5 + trial * 0.1) * x.col(0);
    const env::BgeScore s(x, env::BgeHyperparams::defaults(2));
    const auto fwd = env::Dag{2, 0}.with_edges(std::vector<std::pair<int, int>>{{0, 1}});
    const auto bwd = env::Dag{2, 0}.with_edges(std::vector<std::pair<int, int>>{{1, 0}});
    worst = std::max(worst, std::abs(s.score(fwd) - s.score(bwd)));
  }
  o.detail << "2-node equivalence gap " << worst << "; ";
  o.check(worst <= 1e-9, "equivalent 2-node graphs score equally to 1e-9");

  Matrix one(25, 1);
  for (Eigen::Index i = 0; i < 25; ++i) one(i, 0) = 0.4 + 1.3 * standard_normal(rng);
  const auto h = env::BgeHyperparams::defaults(1);
  const double quad = one_node_marginal_by_quadrature(one.col(0), h);
  const double score = env::BgeScore(one, h).score(env::Dag{1, 0});
  o.detail << "1-node score " << score << ", quadrature gap " << std::abs(score - quad) << "; ";
  o.check(std::abs(score - quad) <= 1e-3, "1-node score within 1e-3 of quadrature");

  Rng r3(0), r4(0);
  const double l1_3 = posterior_l1(3, 1000, r3);
  const double l1_4 = posterior_l1(4, 3000, r4);
  const double elapsed = seconds_since(t0);
  o.detail << "posterior L1 3 nodes (25 DAGs) " << l1_3 << ", 4 nodes (543 DAGs) " << l1_4 << ", " << elapsed << " s ";
  o.check(l1_3 <= 0.2, "3-node posterior L1 <= 0.2");
  o.check(l1_4 <= 0.2, "4-node posterior L1 <= 0.2");
  o.check(elapsed < 900.0, "runtime < 15 min");
}

void logit_round_trip(Outcome& o) {
  Rng rng(9);
  double worst = 0.0;
  for (int trial = 0; trial < 2000; ++trial) {
    const int k = 2 + trial % 9;
    Vector p(k);
    for (auto& v : p) v = std::exp(-13.0 * uniform01(rng));
    p /= p.sum();
    p = p.cwiseMax(1e-6).cwiseMin(1.0 - 1e-6);
    p /= p.sum();
    if (p.minCoeff() < 1e-6) continue;
    Vector logits(k), logs(k);
    for (int c = 0; c < k; ++c) {
      logits(c) = pce::logit(p(c));
      logs(c) = std::log(p(c));
      worst = std::max(worst, std::abs(pce::inverse_logit(logits(c)) - p(c)));
    }
    worst = std::max(worst, (pce::decode_logits(logits, pce::DecodeRule::kSigmoidRenormalise) - p).cwiseAbs().maxCoeff());
    worst = std::max(worst, (pce::decode_logits(logs, pce::DecodeRule::kSoftmax) - p).cwiseAbs().maxCoeff());
  }
  for (double q : {1e-6, 1.0 - 1e-6, 0.5, 0.123})
    worst = std::max(worst, std::abs(pce::inverse_logit(pce::logit(q)) - q));
  o.detail << "max round-trip error " << worst;
  o.check(worst <= 1e-9, "round trip within 1e-9");
}

pce::PceModel model_with(int dim, int degree, const std::vector<std::pair<pce::MultiIndex, double>>& terms) {
  pce::MultiIndexSet set(dim, degree);
  Vector c = Vector::Zero(static_cast<Eigen::Index>(set.size()));
  for (const auto& [index, value] : terms)
    for (std::size_t k = 0; k < set.size(); ++k)
      if (set[k] == index) c(static_cast<Eigen::Index>(k)) = value;
  return pce::PceModel(pce::BasisFamily::kHermite, set, c, pce::InputStandardisation::identity(dim));
}

void sobol_identities(Outcome& o) {
  auto near = [](double a, double b) { return std::abs(a - b) <= 1e-14; };
  {
    const auto s = pce::sobol_indices(model_with(2, 3, {{{0, 0}, 3.0}, {{1, 0}, 1.0}, {{3, 0}, -0.5}}));
    o.check(near(s.first_order(0), 1.0) && near(s.total(0), 1.0) && s.first_order(1) == 0.0 && s.total(1) == 0.0,
            "pure x1");
  }
  {
    const auto s = pce::sobol_indices(model_with(2, 1, {{{1, 0}, 0.7}, {{0, 1}, 0.7}}));
    o.check(near(s.first_order(0), 0.5) && near(s.first_order(1), 0.5) && near(s.total(0), 0.5) &&
                near(s.total(1), 0.5),
            "symmetric sum");
  }
  {
    const auto s = pce::sobol_indices(model_with(2, 2, {{{1, 1}, 2.0}}));
    o.check(s.first_order(0) == 0.0 && s.first_order(1) == 0.0 && near(s.total(0), 1.0) && near(s.total(1), 1.0),
            "pure interaction");
  }
  Rng rng(10);
  double worst_partition = 0.0;
  bool bounded = true;
  for (int trial = 0; trial < 50; ++trial) {
    const int dim = 1 + trial % 5, degree = 1 + trial % 4;
    const pce::MultiIndexSet set(dim, degree);
    Vector c(static_cast<Eigen::Index>(set.size()));
    for (auto& v : c) v = standard_normal(rng);
    const pce::PceModel model(pce::BasisFamily::kHermite, set, c, pce::InputStandardisation::identity(dim));
    const auto s = pce::sobol_indices(model);
    for (Eigen::Index i = 0; i < dim; ++i)
      bounded = bounded && s.first_order(i) >= 0.0 && s.total(i) <= 1.0 + 1e-15 &&
                s.first_order(i) <= s.total(i) + 1e-15;
    double sum = 0.0;
    for (const auto& [mask, v] : pce::anova_partition(model)) sum += v;
    worst_partition = std::max(worst_partition, std::abs(sum - s.variance) / s.variance);
  }
  o.detail << "ANOVA partition relative gap " << worst_partition;
  o.check(bounded, "indices in [0, 1] with first <= total");
  o.check(worst_partition <= 1e-14, "partition sums to the variance");
}

// ---------------------------------------------------------------------------

json tiny_manifest(pipeline::Experiment e, const std::filesystem::path& out, bool mlp) {
  json m;
  switch (e) {
    case pipeline::Experiment::kDiscreteGrid:
      m = {{"ensemble", {{"train", 5}, {"test", 3}}},
           {"surrogate", {{"degree", 2}, {"samples", 300}}},
           {"training", {{"episodes", 30}, {"hidden", {32}}}},
           {"embedding", {{"grids", 60}, {"augment", 2}, {"vae", {{"epochs", 20}}}}}};
      break;
    case pipeline::Experiment::kContinuousGrid:
      m = {{"ensemble", {{"train", 5}, {"test", 3}}},
           {"surrogate", {{"degree", 1}, {"samples", 300}}},
           {"training", {{"episodes", 30}, {"batch_size", 32}, {"hidden", {16}}}}};
      break;
    case pipeline::Experiment::kSymReg:
      m = {{"ensemble", {{"train", 5}, {"test", 3}}},
           {"surrogate", {{"degree", 2}, {"samples", 300}}},
           {"training", {{"episodes", 20}, {"batch_size", 16}, {"embed", 8}, {"hidden", 8}, {"head_hidden", {8}}}}};
      break;
    case pipeline::Experiment::kStructLearn:
      m = {{"ensemble", {{"train", 5}, {"test", 3}}},
           {"surrogate", {{"degree", 2}, {"samples", 300}}},
           {"training", {{"episodes", 20}, {"batch_size", 16}, {"hidden", {16}}}}};
      break;
  }
  m["experiment"] = pipeline::to_string(e);
  m["seed"] = 3;
  m["out_dir"] = out.string();
  if (mlp) {
    m["surrogate"]["kind"] = "mlp";
    m["surrogate"]["mlp"] = {{"epochs", 300}};
  }
  return m;
}

constexpr pipeline::Experiment kExperiments[] = {pipeline::Experiment::kDiscreteGrid,
                                                 pipeline::Experiment::kContinuousGrid,
                                                 pipeline::Experiment::kSymReg, pipeline::Experiment::kStructLearn};

std::filesystem::path only_report_dir(const std::filesystem::path& experiment_dir) {
  for (const auto& entry : std::filesystem::directory_iterator(experiment_dir))
    if (entry.is_directory() && std::filesystem::exists(entry.path() / "report.json")) return entry.path();
  throw IoError("no report directory under " + experiment_dir.string());
}

void end_to_end_grid(Outcome& o) {
  const auto t0 = Clock::now();
  ScratchDir scratch("e2e");
  json m = {{"experiment", "discrete-grid"},
            {"seed", 0},
            {"ensemble", {{"train", 20}, {"test", 30}}},
            {"out_dir", scratch.path().string()},
            {"surrogate", {{"degree", 4}, {"samples", 5000}}},
            {"training", {{"episodes", 1000}, {"hidden", {64, 64}}, {"learning_rate", 3e-3}, {"replay_batch", 16}}}};
  pipeline::Pipeline p(pipeline::Manifest::from_json(m));
  p.set_logger([](const std::string& msg) { std::fprintf(stderr, "%s\n", msg.c_str()); });
  const std::size_t failures = p.run_all();
  const auto report = pipeline::ComparisonReport::from_json(
      io::read_json(only_report_dir(p.dir()) / "report.json"));
  const double elapsed = seconds_since(t0);
  const double within = report.fraction_within(1.5);
  std::size_t last = 0;
  for (const auto& c : report.channels) last = std::max(last, c.step);
  o.detail << "W1 within 1.5x on " << within * 100.0 << "% of " << report.channels.size() << " channels; ";
  for (std::size_t step : {last - 1, last}) {
    const auto& c = report.at(step, "stop");
    o.detail << "stop at step " << step << " modes surrogate " << c.modes_surrogate << " test " << c.modes_test
             << "; ";
    o.check(c.modes_surrogate == 2, "surrogate stop channel bimodal at step " + std::to_string(step));
  }
  o.detail << elapsed << " s ";
  o.check(failures == 0, "every member trained");
  o.check(within >= 0.9, ">= 90% of channels within 1.5x");
  o.check(elapsed < 1800.0, "runtime < 30 min");
}

Matrix numeric_jacobian(const mlp::MlpSurrogate& s, const Vector& z, double h) {
  const Eigen::Index outputs = static_cast<Eigen::Index>(s.steps() * s.channels());
  Matrix j(z.size(), outputs);
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    Vector up = z, down = z;
    up(i) += h;
    down(i) -= h;
    const Matrix a = s.sample(up), b = s.sample(down);
    for (Eigen::Index k = 0; k < outputs; ++k) {
      const auto t = k / static_cast<Eigen::Index>(s.channels()), c = k % static_cast<Eigen::Index>(s.channels());
      j(i, k) = (a(t, c) - b(t, c)) / (2.0 * h);
    }
  }
  return j;
}

void mlp_baseline(Outcome& o) {
  ScratchDir scratch("mlp");
  for (auto e : kExperiments) {
    const std::string name(pipeline::to_string(e));
    pipeline::Pipeline p(pipeline::Manifest::from_json(tiny_manifest(e, scratch.path(), true)));
    p.run_all();
    const auto table = io::read_csv(p.dir() / "surrogate" / "mlp-loss.csv");
    const double first = std::stod(table.rows.front().back()), last = std::stod(table.rows.back().back());
    o.check(last < first, name + " MLP loss decreases");

    const json doc = io::read_json(p.surrogate_path());
    const auto s = mlp::MlpSurrogate::from_json(doc.at("model"));
    Rng rng(17);
    double worst = 0.0;
    for (int k = 0; k < 5; ++k) {
      Vector z = s.standardisation().shift;
      for (Eigen::Index i = 0; i < z.size(); ++i) z(i) += 0.5 * s.standardisation().scale(i) * standard_normal(rng);
      const Matrix analytic = s.jacobian(z), fd = numeric_jacobian(s, z, 1e-6);
      const double scale = std::max(analytic.cwiseAbs().maxCoeff(), 1e-8);
      worst = std::max(worst, (analytic - fd).cwiseAbs().maxCoeff() / scale);
    }
    o.check(worst <= 1e-4, name + " Jacobian matches finite differences");

    const json report = io::read_json(only_report_dir(p.dir()) / "report.json");
    bool keyed = !report.at("channels").empty();
    for (const auto& c : report.at("channels")) keyed = keyed && c.contains("variance_ratio");
    o.check(keyed, name + " report carries variance_ratio");
    o.detail << name << ": loss " << first << " -> " << last << ", Jacobian rel. err " << worst << "; ";
  }
}

std::map<std::string, std::string> tree_hashes(const std::filesystem::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(root)) {
    if (!entry.is_regular_file()) continue;
    out[std::filesystem::relative(entry.path(), root).generic_string()] = io::fnv1a_hex(io::read_text(entry.path()));
  }
  return out;
}

void determinism(Outcome& o) {
  ScratchDir a("det-a"), b("det-b");
  for (auto e : kExperiments) {
    pipeline::Pipeline(pipeline::Manifest::from_json(tiny_manifest(e, a.path(), false))).run_all();
    pipeline::Pipeline(pipeline::Manifest::from_json(tiny_manifest(e, b.path(), false))).run_all();
  }
  const auto ha = tree_hashes(a.path()), hb = tree_hashes(b.path());
  std::size_t differing = 0;
  for (const auto& [file, hash] : ha)
    if (!hb.contains(file) || hb.at(file) != hash) ++differing;
  o.detail << ha.size() << " files per run, " << differing << " differ";
  o.check(!ha.empty() && ha.size() == hb.size() && differing == 0, "output trees hash-identical");
}

struct Criterion {
  const char* name;
  std::function<void(Outcome&)> run;
};

const std::map<int, Criterion>& criteria() {
  static const std::map<int, Criterion> table{
      {1, {"pce-exactness", pce_exactness}},
      {2, {"basis-orthonormality", basis_orthonormality}},
      {3, {"multi-index-count", multi_index_count}},
      {4, {"gradient-correctness", gradient_correctness}},
      {5, {"proportional-sampling", proportional_sampling}},
      {6, {"loss-oracles", loss_oracles}},
      {7, {"kl-expansion", kl_expansion}},
      {8, {"bge-correctness", bge_correctness}},
      {9, {"logit-round-trip", logit_round_trip}},
      {10, {"sobol-identities", sobol_identities}},
      {11, {"end-to-end-grid", end_to_end_grid}},
      {12, {"mlp-baseline", mlp_baseline}},
      {13, {"determinism", determinism}},
  };
  return table;
}

bool run_one(int id) {
  const auto& c = criteria().at(id);
  Outcome o;
  try {
    c.run(o);
  } catch (const std::exception& e) {
    o.pass = false;
    o.detail << "[exception: " << e.what() << "]";
  }
  std::printf("criterion %2d %-22s %s  %s\n", id, c.name, o.pass ? "PASS" : "FAIL", o.detail.str().c_str());
  std::fflush(stdout);
  return o.pass;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::vector<int> selected;
  app.add_option("--criterion", selected, "Criterion number(s) to run; all when omitted")
      ->check(CLI::Range(1, static_cast<int>(criteria().size())));
  CLI11_PARSE(app, argc, argv);
  if (selected.empty())
    for (const auto& [id, c] : criteria()) selected.push_back(id);
  bool all = true;
  for (int id : selected) all = run_one(id) && all;
  return all ? 0 : 1;
}
