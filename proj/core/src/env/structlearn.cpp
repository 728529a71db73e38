#include "uqgfn/env/structlearn.hpp"

#include <bit>
#include <cmath>
#include <numbers>

#include <Eigen/Cholesky>

#include "uqgfn/common/errors.hpp"

namespace uqgfn::env {

namespace {

double log_multigamma(int dim, double a) {
  double s = 0.25 * dim * (dim - 1) * std::log(std::numbers::pi);
  for (int j = 1; j <= dim; ++j) s += std::lgamma(a + 0.5 * (1 - j));
  return s;
}

std::vector<int> subset_members(std::uint32_t subset) {
  std::vector<int> idx;
  for (int i = 0; subset; ++i, subset >>= 1)
    if (subset & 1u) idx.push_back(i);
  return idx;
}

double log_det_spd(const Matrix& m) {
  Eigen::LLT<Matrix> llt(m);
  if (llt.info() != Eigen::Success) throw NumericalError("BGe: matrix is not positive definite");
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

}  // namespace

int Dag::num_edges() const { return std::popcount(edges); }

std::uint32_t Dag::parents(int node) const {
  std::uint32_t m = 0;
  for (int i = 0; i < nodes; ++i)
    if (has_edge(i, node)) m |= 1u << i;
  return m;
}

bool Dag::reaches(int from, int to) const {
  std::uint32_t seen = 1u << from, frontier = seen;
  while (frontier) {
    std::uint32_t next = 0;
    for (int i = 0; i < nodes; ++i) {
      if (!(frontier & (1u << i))) continue;
      for (int j = 0; j < nodes; ++j)
        if (has_edge(i, j) && !(seen & (1u << j))) next |= 1u << j;
    }
    if (next & (1u << to)) return true;
    seen |= next;
    frontier = next;
  }
  return from == to;
}

bool Dag::is_acyclic() const {
  std::uint32_t remaining = (1u << nodes) - 1u;
  while (remaining) {
    bool removed = false;
    for (int j = 0; j < nodes; ++j) {
      if (!(remaining & (1u << j))) continue;
      if ((parents(j) & remaining) == 0) {
        remaining &= ~(1u << j);
        removed = true;
      }
    }
    if (!removed) return false;
  }
  return true;
}

std::vector<std::pair<int, int>> Dag::edge_list() const {
  std::vector<std::pair<int, int>> out;
  for (int i = 0; i < nodes; ++i)
    for (int j = 0; j < nodes; ++j)
      if (has_edge(i, j)) out.emplace_back(i, j);
  return out;
}

Dag Dag::with_edges(std::span<const std::pair<int, int>> list) const {
  Dag g = *this;
  for (const auto& [i, j] : list) {
    if (i < 0 || j < 0 || i >= nodes || j >= nodes || i == j) throw UsageError("edge endpoints out of range");
    g.add_edge(i, j);
  }
  return g;
}

nlohmann::json Dag::to_json() const {
  nlohmann::json e = nlohmann::json::array();
  for (const auto& [i, j] : edge_list()) e.push_back({i, j});
  return {{"nodes", nodes}, {"edges", e}};
}

Dag Dag::from_json(const nlohmann::json& doc) {
  Dag g{doc.at("nodes").get<int>(), 0};
  if (g.nodes < 1 || g.nodes > kMaxGraphNodes) throw UsageError("graph size out of range");
  std::vector<std::pair<int, int>> list;
  for (const auto& e : doc.at("edges")) list.emplace_back(e.at(0).get<int>(), e.at(1).get<int>());
  g = g.with_edges(list);
  if (!g.is_acyclic()) throw UsageError("graph contains a cycle");
  return g;
}

LinearGaussianNetwork LinearGaussianNetwork::sample(const Dag& graph, double noise_variance, Rng& rng) {
  if (!graph.is_acyclic()) throw UsageError("network graph must be acyclic");
  if (!(noise_variance > 0.0)) throw UsageError("noise variance must be positive");
  LinearGaussianNetwork net{graph, Matrix::Zero(graph.nodes, graph.nodes), noise_variance};
  for (const auto& [i, j] : graph.edge_list()) net.weights(i, j) = standard_normal(rng);
  return net;
}

Matrix LinearGaussianNetwork::covariance() const {
  const Matrix a = (Matrix::Identity(graph.nodes, graph.nodes) - weights).inverse();
  return noise_variance * a.transpose() * a;
}

Matrix sample_dataset(const LinearGaussianNetwork& net, int n, Rng& rng) {
  const int k = net.graph.nodes;
  std::vector<int> order;
  std::uint32_t placed = 0;
  while (static_cast<int>(order.size()) < k) {
    for (int j = 0; j < k; ++j)
      if (!(placed & (1u << j)) && (net.graph.parents(j) & ~placed) == 0) {
        order.push_back(j);
        placed |= 1u << j;
      }
  }
  const double sd = std::sqrt(net.noise_variance);
  Matrix x = Matrix::Zero(n, k);
  for (int s = 0; s < n; ++s)
    for (int j : order) {
      double v = sd * standard_normal(rng);
      for (int i = 0; i < k; ++i)
        if (net.graph.has_edge(i, j)) v += net.weights(i, j) * x(s, i);
      x(s, j) = v;
    }
  return x;
}

Dag default_ground_truth() {
  const std::pair<int, int> e[] = {{0, 1}, {0, 2}, {1, 3}, {2, 3}, {1, 4}, {3, 4}, {2, 4}};
  return Dag{5, 0}.with_edges(e);
}

int encode_edge_action(int source, int target, int nodes) {
  if (source < 0 || target < 0 || source >= nodes || target >= nodes) throw UsageError("edge endpoints out of range");
  return nodes * source + target;
}

std::optional<std::pair<int, int>> decode_edge_action(int action, int nodes) {
  if (action == nodes * nodes) return std::nullopt;
  if (action < 0 || action > nodes * nodes) throw UsageError("action id out of range");
  return std::make_pair(action / nodes, action % nodes);
}

gfn::ActionMask structure_valid_actions(const Dag& g) {
  const int n = g.nodes;
  gfn::ActionMask mask(static_cast<std::size_t>(n * n + 1), 0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j && !g.has_edge(i, j) && !g.reaches(j, i)) mask[static_cast<std::size_t>(n * i + j)] = 1;
  mask.back() = 1;
  return mask;
}

BgeHyperparams BgeHyperparams::defaults(int nodes) {
  BgeHyperparams h;
  h.alpha_mu = 1.0;
  h.alpha_w = nodes + 2.0;
  h.nu = Vector::Zero(nodes);
  const double t = h.alpha_mu * (h.alpha_w - nodes - 1.0) / (h.alpha_mu + 1.0);
  h.t = t * Matrix::Identity(nodes, nodes);
  return h;
}

Matrix r_matrix(const Matrix& data, const BgeHyperparams& hyper) {
  const Eigen::Index k = hyper.t.rows();
  if (data.cols() != k || hyper.nu.size() != k) throw UsageError("r_matrix: dimension mismatch");
  const double n = static_cast<double>(data.rows());
  if (data.rows() == 0) return hyper.t;
  const Vector mean = data.colwise().mean().transpose();
  const Matrix centred = data.rowwise() - mean.transpose();
  const Vector d = hyper.nu - mean;
  return hyper.t + centred.transpose() * centred + (n * hyper.alpha_mu / (n + hyper.alpha_mu)) * d * d.transpose();
}

BgeScore::BgeScore(Matrix data, BgeHyperparams hyper)
    : nodes_(static_cast<int>(data.cols())), samples_(static_cast<int>(data.rows())), hyper_(std::move(hyper)) {
  if (nodes_ < 1 || nodes_ > kMaxGraphNodes) throw UsageError("BGe: unsupported number of variables");
  if (!(hyper_.alpha_w > nodes_ - 1)) throw UsageError("BGe: alpha_w must exceed nodes - 1");
  if (!(hyper_.alpha_mu > 0.0)) throw UsageError("BGe: alpha_mu must be positive");
  if (!data.allFinite()) throw NumericalError("BGe: data contain non-finite values");
  r_ = r_matrix(data, hyper_);
  subset_scores_.resize(std::size_t{1} << nodes_);
  for (std::uint32_t s = 0; s < subset_scores_.size(); ++s) subset_scores_[s] = compute_subset(s);
}

double BgeScore::compute_subset(std::uint32_t subset) const {
  if (subset == 0) return 0.0;
  const auto idx = subset_members(subset);
  const int l = static_cast<int>(idx.size());
  const double n = samples_, big_n = nodes_, aw = hyper_.alpha_w, am = hyper_.alpha_mu;
  Matrix t_yy(l, l), r_yy(l, l);
  for (int a = 0; a < l; ++a)
    for (int b = 0; b < l; ++b) {
      t_yy(a, b) = hyper_.t(idx[static_cast<std::size_t>(a)], idx[static_cast<std::size_t>(b)]);
      r_yy(a, b) = r_(idx[static_cast<std::size_t>(a)], idx[static_cast<std::size_t>(b)]);
    }
  const double prior_df = aw - big_n + l;
  return 0.5 * l * std::log(am / (n + am)) + log_multigamma(l, 0.5 * (n + prior_df)) -
         log_multigamma(l, 0.5 * prior_df) - 0.5 * l * n * std::log(std::numbers::pi) +
         0.5 * prior_df * log_det_spd(t_yy) - 0.5 * (n + prior_df) * log_det_spd(r_yy);
}

double BgeScore::local_score(int node, std::uint32_t parents) const {
  if (node < 0 || node >= nodes_ || (parents >> nodes_) || (parents & (1u << node)))
    throw UsageError("BGe: invalid family");
  return subset_scores_[parents | (1u << node)] - subset_scores_[parents];
}

double BgeScore::score(const Dag& g) const {
  if (g.nodes != nodes_) throw UsageError("BGe: graph size does not match the data");
  double s = 0.0;
  for (int j = 0; j < nodes_; ++j) s += local_score(j, g.parents(j));
  return s;
}

std::vector<Dag> enumerate_dags(int nodes) {
  if (nodes < 1 || nodes > 5) throw UsageError("DAG enumeration supports 1 to 5 nodes");
  std::vector<std::pair<int, int>> slots;
  for (int i = 0; i < nodes; ++i)
    for (int j = 0; j < nodes; ++j)
      if (i != j) slots.emplace_back(i, j);
  std::vector<Dag> out;
  const std::uint64_t total = std::uint64_t{1} << slots.size();
  for (std::uint64_t code = 0; code < total; ++code) {
    Dag g{nodes, 0};
    for (std::size_t k = 0; k < slots.size(); ++k)
      if (code >> k & 1u) g.add_edge(slots[k].first, slots[k].second);
    if (g.is_acyclic()) out.push_back(g);
  }
  return out;
}

StructureEnv::StructureEnv(BgeScore score) : score_(std::move(score)), offset_(score_.score(Dag{score_.nodes(), 0})) {}

gfn::ActionMask StructureEnv::valid_actions(const State& s) const {
  if (s.done) return gfn::ActionMask(static_cast<std::size_t>(num_actions()), 0);
  return structure_valid_actions(s.graph);
}

StructureEnv::State StructureEnv::step(const State& s, int action) const {
  const auto mask = valid_actions(s);
  if (action < 0 || action >= num_actions() || !mask[static_cast<std::size_t>(action)])
    throw UsageError("invalid structure action " + std::to_string(action));
  State next = s;
  if (auto edge = decode_edge_action(action, nodes())) next.graph.add_edge(edge->first, edge->second);
  else next.done = true;
  return next;
}

double StructureEnv::log_backward(const State&, const State& child) const {
  if (child.done) return 0.0;
  return -std::log(static_cast<double>(child.graph.num_edges()));
}

Matrix StructureEnv::encode(std::span<const State> states) const {
  const int n = nodes();
  Matrix x = Matrix::Zero(n * n, static_cast<Eigen::Index>(states.size()));
  for (std::size_t k = 0; k < states.size(); ++k)
    for (int b = 0; b < n * n; ++b)
      if (states[k].graph.edges >> b & 1u) x(b, static_cast<Eigen::Index>(k)) = 1.0;
  return x;
}

std::vector<StructureEnv::State> StructureEnv::follow(std::span<const int> actions) const {
  Rng unused(0);
  std::vector<State> path{initial_state(unused)};
  for (int a : actions) path.push_back(step(path.back(), a));
  return path;
}

}  // namespace uqgfn::env
