#include "uqgfn/pipeline/pipeline.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>

#include "uqgfn/common/errors.hpp"
#include "uqgfn/common/io.hpp"
#include "uqgfn/gfn/trainer.hpp"
#include "uqgfn/mlp/mlp_surrogate.hpp"
#include "uqgfn/pce/sobol.hpp"
#include "uqgfn/pipeline/statistics.hpp"

namespace uqgfn::pipeline {

using nlohmann::json;

namespace {

enum Stream : std::uint64_t {
  kRewardStream = 1,
  kTrainStream,
  kEmbedStream,
  kTrajectoryStream,
  kAugmentStream,
  kSurrogateStream,
  kSampleStream,
};

std::uint64_t role_tag(Role r) { return r == Role::kTrain ? 0x747261696eULL : 0x74657374ULL; }

std::string member_file(std::size_t index, const char* suffix) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "member-%04zu%s", index, suffix);
  return buf;
}

double tail_mean(const std::vector<double>& losses) {
  if (losses.empty()) return 0.0;
  const std::size_t n = std::min<std::size_t>(100, losses.size());
  return std::accumulate(losses.end() - static_cast<std::ptrdiff_t>(n), losses.end(), 0.0) / static_cast<double>(n);
}

json quantile_json(const std::array<double, 5>& q) { return std::vector<double>(q.begin(), q.end()); }

std::array<double, 5> quantiles_from(const json& doc) {
  const auto v = doc.get<std::vector<double>>();
  if (v.size() != 5) throw UsageError("quantile table needs five levels");
  std::array<double, 5> out{};
  std::copy(v.begin(), v.end(), out.begin());
  return out;
}

std::vector<double> values_of(const Tensor3& t, std::size_t step, std::size_t channel) {
  std::vector<double> out(t.items());
  for (std::size_t i = 0; i < t.items(); ++i) out[i] = t(i, step, channel);
  return out;
}

template <class Model>
json surrogate_document(SurrogateKind kind, const PolicyTensor& policies, const Model& model) {
  return {{"type", "surrogate"},
          {"kind", to_string(kind)},
          {"policy_kind", pce::to_string(policies.kind)},
          {"channels", policies.channels},
          {"trajectory_hash", trajectory_hash(policies.trajectory)},
          {"model", model.to_json()}};
}

}  // namespace

// ---------------------------------------------------------------------------

double ComparisonReport::fraction_within(double factor) const {
  if (channels.empty()) return 0.0;
  std::size_t ok = 0;
  for (const auto& c : channels) ok += c.w1_surrogate_test <= factor * c.w1_train_test + 1e-12 ? 1 : 0;
  return static_cast<double>(ok) / static_cast<double>(channels.size());
}

const ChannelComparison& ComparisonReport::at(std::size_t step, const std::string& channel) const {
  for (const auto& c : channels)
    if (c.step == step && c.channel == channel) return c;
  throw UsageError("no comparison for step " + std::to_string(step) + " channel " + channel);
}

json ComparisonReport::to_json() const {
  json cells = json::array();
  for (const auto& c : channels)
    cells.push_back({{"step", c.step},
                     {"channel", c.channel},
                     {"w1_surrogate_test", c.w1_surrogate_test},
                     {"w1_train_test", c.w1_train_test},
                     {"quantiles",
                      {{"test", quantile_json(c.quantiles_test)},
                       {"surrogate", quantile_json(c.quantiles_surrogate)},
                       {"train", quantile_json(c.quantiles_train)}}},
                     {"variance",
                      {{"test", c.variance_test}, {"surrogate", c.variance_surrogate}, {"train", c.variance_train}}},
                     {"variance_ratio", c.variance_ratio ? json(*c.variance_ratio) : json(nullptr)},
                     {"modes", {{"test", c.modes_test}, {"surrogate", c.modes_surrogate}, {"train", c.modes_train}}}});
  return {{"type", "comparison-report"},
          {"experiment", to_string(experiment)},
          {"surrogate", to_string(surrogate)},
          {"trajectory_hash", trajectory_hash},
          {"samples", samples},
          {"train_members", train_members},
          {"test_members", test_members},
          {"quantile_levels", std::vector<double>(kReportLevels.begin(), kReportLevels.end())},
          {"fraction_within_1_5", fraction_within(1.5)},
          {"channels", cells}};
}

ComparisonReport ComparisonReport::from_json(const json& doc) {
  if (doc.value("type", "") != "comparison-report") throw UsageError("not a comparison report");
  ComparisonReport r;
  r.experiment = experiment_from_string(doc.at("experiment").get<std::string>());
  r.surrogate = surrogate_kind_from_string(doc.at("surrogate").get<std::string>());
  r.trajectory_hash = doc.at("trajectory_hash");
  r.samples = doc.at("samples");
  r.train_members = doc.at("train_members");
  r.test_members = doc.at("test_members");
  for (const auto& c : doc.at("channels")) {
    ChannelComparison x;
    x.step = c.at("step");
    x.channel = c.at("channel");
    x.w1_surrogate_test = c.at("w1_surrogate_test");
    x.w1_train_test = c.at("w1_train_test");
    x.quantiles_test = quantiles_from(c.at("quantiles").at("test"));
    x.quantiles_surrogate = quantiles_from(c.at("quantiles").at("surrogate"));
    x.quantiles_train = quantiles_from(c.at("quantiles").at("train"));
    x.variance_test = c.at("variance").at("test");
    x.variance_surrogate = c.at("variance").at("surrogate");
    x.variance_train = c.at("variance").at("train");
    if (!c.at("variance_ratio").is_null()) x.variance_ratio = c.at("variance_ratio").get<double>();
    x.modes_test = c.at("modes").at("test");
    x.modes_surrogate = c.at("modes").at("surrogate");
    x.modes_train = c.at("modes").at("train");
    r.channels.push_back(std::move(x));
  }
  return r;
}

ComparisonReport compare_tensors(const Tensor3& surrogate, const Tensor3& test, const Tensor3& train,
                                 const std::vector<std::string>& channels) {
  for (const Tensor3* t : {&surrogate, &test, &train}) {
    if (t->steps() != test.steps() || t->channels() != test.channels())
      throw UsageError("policy tensors cover different (step, channel) grids");
    if (t->items() == 0) throw UsageError("cannot compare an empty policy tensor");
  }
  if (channels.size() != test.channels()) throw UsageError("one label per channel required");
  ComparisonReport report;
  report.samples = surrogate.items();
  report.test_members = test.items();
  report.train_members = train.items();
  for (std::size_t t = 0; t < test.steps(); ++t)
    for (std::size_t c = 0; c < test.channels(); ++c) {
      const auto s = values_of(surrogate, t, c), e = values_of(test, t, c), r = values_of(train, t, c);
      ChannelComparison x;
      x.step = t;
      x.channel = channels[c];
      x.w1_surrogate_test = wasserstein1(s, e);
      x.w1_train_test = wasserstein1(r, e);
      x.quantiles_test = report_quantiles(e);
      x.quantiles_surrogate = report_quantiles(s);
      x.quantiles_train = report_quantiles(r);
      x.variance_test = variance(e);
      x.variance_surrogate = variance(s);
      x.variance_train = variance(r);
      if (x.variance_test > 0.0) x.variance_ratio = x.variance_surrogate / x.variance_test;
      x.modes_test = mode_count(e);
      x.modes_surrogate = mode_count(s);
      x.modes_train = mode_count(r);
      report.channels.push_back(std::move(x));
    }
  return report;
}

// ---------------------------------------------------------------------------

Pipeline::Pipeline(Manifest manifest) : manifest_(std::move(manifest)), driver_(make_driver(manifest_)) {}

void Pipeline::log(const std::string& message) const {
  if (log_) log_(message);
}

std::filesystem::path Pipeline::rewards_path(Role role) const {
  return dir() / "rewards" / (std::string(to_string(role)) + ".json");
}
std::filesystem::path Pipeline::embedder_path() const { return dir() / "embed" / "embedder.json"; }
std::filesystem::path Pipeline::archive_path(Role role) const {
  return dir() / "ensemble" / std::string(to_string(role)) / "archive.json";
}
std::filesystem::path Pipeline::trajectory_path() const { return dir() / "trajectory.json"; }
std::filesystem::path Pipeline::policies_path(Role role) const {
  return dir() / "policies" / (std::string(to_string(role)) + ".json");
}
std::filesystem::path Pipeline::surrogate_path() const { return dir() / "surrogate" / "surrogate.json"; }
std::filesystem::path Pipeline::samples_path() const { return dir() / "surrogate" / "samples.csv"; }
std::filesystem::path Pipeline::report_dir(const std::string& hash) const { return dir() / hash; }

void Pipeline::sample_rewards() {
  json copy = manifest_.to_json();
  copy.erase("out_dir");
  io::write_json(dir() / "manifest.json", copy);
  for (Role role : {Role::kTrain, Role::kTest}) {
    const std::size_t n = role == Role::kTrain ? manifest_.train_members : manifest_.test_members;
    json members = json::array();
    for (std::size_t i = 0; i < n; ++i) {
      const std::uint64_t seed = derive_seed(manifest_.seed, {role_tag(role), i});
      Rng rng(derive_seed(seed, {kRewardStream}));
      members.push_back({{"index", i}, {"seed", seed}, {"reward", driver_->sample_reward(rng)}});
    }
    io::write_json(rewards_path(role), {{"type", "reward-set"},
                                        {"experiment", to_string(manifest_.experiment)},
                                        {"role", to_string(role)},
                                        {"members", members}});
    log("sampled " + std::to_string(n) + " " + std::string(to_string(role)) + " rewards");
  }
}

std::vector<json> Pipeline::load_rewards(Role role) const {
  const json doc = io::read_json(rewards_path(role));
  if (doc.value("type", "") != "reward-set" || doc.value("role", "") != to_string(role))
    throw UsageError("unexpected reward set in " + rewards_path(role).string());
  std::vector<json> out;
  for (const auto& m : doc.at("members")) out.push_back(m);
  return out;
}

void Pipeline::fit_embed() {
  std::vector<json> rewards;
  for (const auto& m : load_rewards(Role::kTrain)) rewards.push_back(m.at("reward"));
  Rng rng(derive_seed(manifest_.seed, {kEmbedStream}));
  log("fitting reward embedding");
  const json embedder = driver_->fit_embedder(rewards, rng);
  io::write_json(embedder_path(),
                 {{"type", "embedder"}, {"experiment", to_string(manifest_.experiment)}, {"embedder", embedder}});
  embedder_loaded_ = true;
}

void Pipeline::load_embedder() {
  if (embedder_loaded_) return;
  const json doc = io::read_json(embedder_path());
  if (doc.value("type", "") != "embedder") throw UsageError("not an embedder: " + embedder_path().string());
  driver_->load_embedder(doc.at("embedder"));
  embedder_loaded_ = true;
}

std::size_t Pipeline::train_ensemble(Role role) {
  load_embedder();
  const auto rewards = load_rewards(role);
  const auto folder = archive_path(role).parent_path();
  Archive archive;
  archive.experiment = manifest_.experiment;
  archive.role = role;
  for (const auto& entry : rewards) {
    MemberRecord rec;
    rec.index = entry.at("index");
    rec.seed = entry.at("seed");
    rec.reward = entry.at("reward");
    rec.latent = driver_->latent(rec.reward);
    Rng rng(derive_seed(rec.seed, {kTrainStream}));
    try {
      auto trained = driver_->train_member(rec.reward, rng);
      rec.checkpoint = member_file(rec.index, ".json");
      io::write_json(folder / rec.checkpoint, trained.checkpoint);
      gfn::write_loss_curve(folder / member_file(rec.index, "-loss.csv"), trained.losses);
      rec.final_loss = tail_mean(trained.losses);
      log(std::string(to_string(role)) + " member " + std::to_string(rec.index + 1) + "/" +
          std::to_string(rewards.size()) + " loss " + io::format_double(rec.final_loss));
    } catch (const NumericalError& e) {
      rec.ok = false;
      rec.checkpoint.clear();
      rec.error = e.what();
      log(std::string(to_string(role)) + " member " + std::to_string(rec.index + 1) + " failed: " + rec.error);
    }
    archive.members.push_back(std::move(rec));
  }
  io::write_json(archive_path(role), archive.to_json());
  return archive.failures();
}

Archive Pipeline::load_archive(Role role) const {
  Archive a = Archive::from_json(io::read_json(archive_path(role)));
  if (a.role != role || a.experiment != manifest_.experiment)
    throw UsageError("unexpected archive in " + archive_path(role).string());
  return a;
}

PolicyTensor Pipeline::load_policies(Role role) const {
  PolicyTensor p = PolicyTensor::from_json(io::read_json(policies_path(role)));
  if (p.role != role) throw UsageError("unexpected policy tensor in " + policies_path(role).string());
  return p;
}

void Pipeline::extract_policies(Role role) {
  const Archive archive = load_archive(role);
  const auto folder = archive_path(role).parent_path();

  json trajectory;
  if (std::filesystem::exists(trajectory_path())) {
    const json saved = io::read_json(trajectory_path());
    if (saved.at("spec") == manifest_.trajectory) trajectory = saved.at("resolved");
  }
  if (trajectory.is_null()) {
    const auto train_checkpoint = [this](std::size_t index) {
      const Archive train = load_archive(Role::kTrain);
      if (index >= train.members.size() || !train.members[index].ok)
        throw UsageError("trajectory source member " + std::to_string(index) + " is not a trained member");
      return io::read_json(archive_path(Role::kTrain).parent_path() / train.members[index].checkpoint);
    };
    Rng rng(derive_seed(manifest_.seed, {kTrajectoryStream}));
    trajectory = driver_->resolve_trajectory(manifest_.trajectory, train_checkpoint, rng);
    io::write_json(trajectory_path(), {{"spec", manifest_.trajectory},
                                       {"resolved", trajectory},
                                       {"hash", trajectory_hash(trajectory)}});
  }

  PolicyTensor out;
  out.role = role;
  out.kind = driver_->policy_kind();
  out.channels = driver_->channels();
  out.trajectory = trajectory;
  std::vector<Matrix> slices;
  for (const auto& m : archive.members) {
    if (!m.ok) continue;
    slices.push_back(driver_->extract(io::read_json(folder / m.checkpoint), m.reward, trajectory));
    out.members.push_back(m.index);
    if (slices.back().rows() != slices.front().rows() ||
        static_cast<std::size_t>(slices.back().cols()) != out.channels.size())
      throw UsageError("member policies have inconsistent shapes");
  }
  if (slices.empty()) throw NumericalError("no member of the " + std::string(to_string(role)) + " ensemble trained");
  out.values = Tensor3(slices.size(), static_cast<std::size_t>(slices.front().rows()), out.channels.size());
  for (std::size_t i = 0; i < slices.size(); ++i) out.values.set_item(i, slices[i]);
  io::write_json(policies_path(role), out.to_json());
  log("extracted " + std::to_string(slices.size()) + " " + std::string(to_string(role)) + " policies");
}

void Pipeline::fit_surrogate() {
  load_embedder();
  const PolicyTensor policies = load_policies(Role::kTrain);
  require_training_role(policies.role, "the policy tensor");
  const Archive archive = load_archive(Role::kTrain);
  require_training_role(archive.role, "the ensemble archive");

  std::vector<Vector> inputs;
  std::vector<std::size_t> source;
  for (std::size_t k = 0; k < policies.members.size(); ++k) {
    const auto& member = archive.members.at(policies.members[k]);
    inputs.push_back(member.latent);
    source.push_back(k);
    Rng rng(derive_seed(manifest_.seed, {kAugmentStream, member.index}));
    const Matrix extra = driver_->augmented_latents(member.reward, rng);
    for (Eigen::Index r = 0; r < extra.rows(); ++r) {
      inputs.push_back(extra.row(r).transpose());
      source.push_back(k);
    }
  }
  Matrix x(static_cast<Eigen::Index>(inputs.size()), inputs.front().size());
  Tensor3 y(inputs.size(), policies.values.steps(), policies.values.channels());
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    x.row(static_cast<Eigen::Index>(i)) = inputs[i].transpose();
    y.set_item(i, policies.values.item(source[i]));
  }
  const auto standardisation = pce::InputStandardisation::gaussian_mle(x);
  log("fitting " + std::string(to_string(manifest_.surrogate)) + " surrogate on " + std::to_string(inputs.size()) +
      " inputs");

  json doc;
  if (manifest_.surrogate == SurrogateKind::kPce) {
    pce::PolicySurrogateOptions options;
    options.ridge = {pce::BasisFamily::kHermite, manifest_.degree, manifest_.ridge};
    options.min_variance = manifest_.training.value("min_variance", options.min_variance);
    options.max_variance = manifest_.training.value("max_variance", options.max_variance);
    doc = surrogate_document(manifest_.surrogate, policies,
                             pce::fit_policy_surrogate(x, y, policies.kind, options, standardisation));
  } else {
    const auto config = mlp::MlpSurrogateConfig::from_json(manifest_.mlp);
    Rng rng(derive_seed(manifest_.seed, {kSurrogateStream}));
    std::vector<double> curve;
    const auto model = mlp::train_mlp_surrogate(x, y, policies.kind, config, standardisation, rng, &curve);
    io::CsvTable table;
    table.header = {"epoch", "loss"};
    for (std::size_t e = 0; e < curve.size(); ++e) table.rows.push_back({std::to_string(e), io::format_double(curve[e])});
    io::write_csv(surrogate_path().parent_path() / "mlp-loss.csv", table);
    doc = surrogate_document(manifest_.surrogate, policies, model);
  }
  io::write_json(surrogate_path(), doc);
}

void Pipeline::sample_surrogate() {
  load_embedder();
  const json doc = io::read_json(surrogate_path());
  if (doc.value("type", "") != "surrogate") throw UsageError("not a surrogate: " + surrogate_path().string());
  Rng rng(derive_seed(manifest_.seed, {kSampleStream}));
  const Matrix latents = driver_->sample_latents(manifest_.samples, rng);
  const auto kind = surrogate_kind_from_string(doc.at("kind").get<std::string>());
  const Tensor3 values = kind == SurrogateKind::kPce
                             ? pce::PolicySurrogate::from_json(doc.at("model")).sample_batch(latents)
                             : mlp::MlpSurrogate::from_json(doc.at("model")).sample_batch(latents);
  write_sample_table(samples_path(), values, doc.at("channels").get<std::vector<std::string>>());
  io::write_json(samples_path().parent_path() / "samples.json", {{"kind", doc.at("kind")},
                                                                 {"trajectory_hash", doc.at("trajectory_hash")},
                                                                 {"samples", manifest_.samples}});
  log("drew " + std::to_string(manifest_.samples) + " surrogate samples");
}

ComparisonReport Pipeline::compare() {
  const PolicyTensor test = load_policies(Role::kTest);
  const PolicyTensor train = load_policies(Role::kTrain);
  const json meta = io::read_json(samples_path().parent_path() / "samples.json");
  const std::string hash = trajectory_hash(test.trajectory);
  if (trajectory_hash(train.trajectory) != hash || meta.at("trajectory_hash") != hash)
    throw UsageError("training, testing and surrogate policies follow different trajectories; rerun extract-policies");
  const Tensor3 samples = read_sample_table(samples_path(), test.channels);
  ComparisonReport report = compare_tensors(samples, test.values, train.values, test.channels);
  report.experiment = manifest_.experiment;
  report.surrogate = surrogate_kind_from_string(meta.at("kind").get<std::string>());
  report.trajectory_hash = hash;
  io::write_json(report_dir(hash) / "report.json", report.to_json());
  write_plot_table(report_dir(hash) / "policies.csv",
                   {{"test", &test.values}, {"train", &train.values}, {"surrogate", &samples}}, test.channels);
  log("compared " + std::to_string(report.channels.size()) + " channels; W1 within 1.5x of train/test for " +
      io::format_double(100.0 * report.fraction_within(1.5)) + "%");
  return report;
}

void Pipeline::sobol() {
  const json doc = io::read_json(surrogate_path());
  const auto kind = surrogate_kind_from_string(doc.at("kind").get<std::string>());
  const auto channels = doc.at("channels").get<std::vector<std::string>>();
  const std::string hash = doc.at("trajectory_hash");
  json cells = json::array();
  io::CsvTable table;
  if (kind == SurrogateKind::kPce) {
    const auto model = pce::PolicySurrogate::from_json(doc.at("model"));
    table.header = {"step", "channel", "input", "first_order", "total"};
    for (std::size_t t = 0; t < model.steps(); ++t)
      for (std::size_t c = 0; c < model.channels(); ++c) {
        const auto s = pce::sobol_indices(model.channel_model(t, c));
        const bool zero = model.structural_zero(t, c);
        cells.push_back({{"step", t},
                         {"channel", channels[c]},
                         {"structural_zero", zero},
                         {"variance", s.variance},
                         {"zero_variance", s.zero_variance},
                         {"first_order", std::vector<double>(s.first_order.begin(), s.first_order.end())},
                         {"total", std::vector<double>(s.total.begin(), s.total.end())}});
        for (Eigen::Index i = 0; i < s.first_order.size(); ++i)
          table.rows.push_back({std::to_string(t), channels[c], std::to_string(i + 1),
                                io::format_double(s.first_order(i)), io::format_double(s.total(i))});
      }
    io::write_json(report_dir(hash) / "sobol.json", {{"type", "sobol"}, {"cells", cells}});
    io::write_csv(report_dir(hash) / "sobol.csv", table);
  } else {
    // Sensitivity of the network surrogate: Jacobian at the mean training input.
    const auto model = mlp::MlpSurrogate::from_json(doc.at("model"));
    const Matrix j = model.jacobian(model.standardisation().shift);
    table.header = {"step", "channel", "input", "derivative"};
    for (std::size_t t = 0; t < model.steps(); ++t)
      for (std::size_t c = 0; c < model.channels(); ++c) {
        const auto col = static_cast<Eigen::Index>(t * model.channels() + c);
        std::vector<double> d(static_cast<std::size_t>(j.rows()));
        for (Eigen::Index i = 0; i < j.rows(); ++i) {
          d[static_cast<std::size_t>(i)] = j(i, col);
          table.rows.push_back({std::to_string(t), channels[c], std::to_string(i + 1), io::format_double(j(i, col))});
        }
        cells.push_back({{"step", t}, {"channel", channels[c]}, {"jacobian", d}});
      }
    io::write_json(report_dir(hash) / "sensitivity.json", {{"type", "jacobian"}, {"cells", cells}});
    io::write_csv(report_dir(hash) / "sensitivity.csv", table);
  }
  log("wrote sensitivity indices for " + std::to_string(cells.size()) + " channels");
}

std::size_t Pipeline::run_all() {
  sample_rewards();
  fit_embed();
  std::size_t failures = train_ensemble(Role::kTrain);
  failures += train_ensemble(Role::kTest);
  extract_policies(Role::kTrain);
  extract_policies(Role::kTest);
  fit_surrogate();
  sample_surrogate();
  compare();
  sobol();
  return failures;
}

}  // namespace uqgfn::pipeline
