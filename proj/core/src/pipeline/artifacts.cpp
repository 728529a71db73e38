#include "uqgfn/pipeline/artifacts.hpp"

#include <fstream>
#include <map>
#include <sstream>
#include <tuple>

#include "uqgfn/common/errors.hpp"
#include "uqgfn/common/io.hpp"

namespace uqgfn::pipeline {

using nlohmann::json;

std::string_view to_string(Role r) { return r == Role::kTrain ? "train" : "test"; }

Role role_from_string(std::string_view name) {
  if (name == "train") return Role::kTrain;
  if (name == "test") return Role::kTest;
  throw UsageError("unknown ensemble role: " + std::string(name));
}

std::size_t Archive::failures() const {
  std::size_t n = 0;
  for (const auto& m : members) n += m.ok ? 0 : 1;
  return n;
}

Matrix Archive::latents() const {
  std::vector<const MemberRecord*> ok;
  for (const auto& m : members)
    if (m.ok) ok.push_back(&m);
  if (ok.empty()) throw NumericalError("no ensemble member trained successfully");
  Matrix out(static_cast<Eigen::Index>(ok.size()), ok.front()->latent.size());
  for (std::size_t i = 0; i < ok.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = ok[i]->latent.transpose();
  return out;
}

json Archive::to_json() const {
  json list = json::array();
  for (const auto& m : members)
    list.push_back({{"index", m.index},
                    {"seed", m.seed},
                    {"reward", m.reward},
                    {"latent", std::vector<double>(m.latent.begin(), m.latent.end())},
                    {"checkpoint", m.checkpoint},
                    {"ok", m.ok},
                    {"error", m.error},
                    {"final_loss", m.ok ? json(m.final_loss) : json(nullptr)}});
  return {{"type", "ensemble-archive"},
          {"experiment", to_string(experiment)},
          {"role", to_string(role)},
          {"members", list}};
}

Archive Archive::from_json(const json& doc) {
  if (doc.value("type", "") != "ensemble-archive") throw UsageError("not an ensemble archive");
  Archive a;
  a.experiment = experiment_from_string(doc.at("experiment").get<std::string>());
  a.role = role_from_string(doc.at("role").get<std::string>());
  for (const auto& m : doc.at("members")) {
    MemberRecord r;
    r.index = m.at("index");
    r.seed = m.at("seed");
    r.reward = m.at("reward");
    const auto z = m.at("latent").get<std::vector<double>>();
    r.latent = Eigen::Map<const Vector>(z.data(), static_cast<Eigen::Index>(z.size()));
    r.checkpoint = m.at("checkpoint");
    r.ok = m.at("ok");
    r.error = m.at("error");
    if (r.ok) r.final_loss = m.at("final_loss");
    a.members.push_back(std::move(r));
  }
  return a;
}

json PolicyTensor::to_json() const {
  return {{"type", "policy-tensor"},
          {"role", to_string(role)},
          {"kind", pce::to_string(kind)},
          {"channels", channels},
          {"members", members},
          {"trajectory", trajectory},
          {"shape", {values.items(), values.steps(), values.channels()}},
          {"values", values.data()}};
}

PolicyTensor PolicyTensor::from_json(const json& doc) {
  if (doc.value("type", "") != "policy-tensor") throw UsageError("not a policy tensor");
  PolicyTensor p;
  p.role = role_from_string(doc.at("role").get<std::string>());
  p.kind = pce::policy_kind_from_string(doc.at("kind").get<std::string>());
  p.channels = doc.at("channels").get<std::vector<std::string>>();
  p.members = doc.at("members").get<std::vector<std::size_t>>();
  p.trajectory = doc.at("trajectory");
  const auto shape = doc.at("shape").get<std::vector<std::size_t>>();
  const auto values = doc.at("values").get<std::vector<double>>();
  if (shape.size() != 3 || values.size() != shape[0] * shape[1] * shape[2] || shape[2] != p.channels.size() ||
      shape[0] != p.members.size())
    throw UsageError("policy tensor shape does not match its contents");
  p.values = Tensor3(shape[0], shape[1], shape[2]);
  std::size_t k = 0;
  for (std::size_t i = 0; i < shape[0]; ++i)
    for (std::size_t t = 0; t < shape[1]; ++t)
      for (std::size_t c = 0; c < shape[2]; ++c) p.values(i, t, c) = values[k++];
  return p;
}

void require_training_role(Role role, std::string_view what) {
  if (role != Role::kTrain)
    throw UsageError(std::string(what) + " comes from the testing ensemble; surrogates may only be fitted on training data");
}

std::vector<PlotRow> plot_rows(std::string_view source, const Tensor3& values,
                               const std::vector<std::string>& channels) {
  if (channels.size() != values.channels()) throw UsageError("one label per channel required");
  std::vector<PlotRow> rows;
  rows.reserve(values.data().size());
  for (std::size_t i = 0; i < values.items(); ++i)
    for (std::size_t t = 0; t < values.steps(); ++t)
      for (std::size_t c = 0; c < values.channels(); ++c)
        rows.push_back({std::string(source), t, channels[c], values(i, t, c)});
  return rows;
}

namespace {

std::ofstream open_table(const std::filesystem::path& path, const char* header) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << header << '\n';
  return out;
}

void close_table(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace

void write_plot_table(const std::filesystem::path& path, const std::vector<PlotRow>& rows) {
  auto out = open_table(path, "source,step,channel,value");
  for (const auto& r : rows) out << r.source << ',' << r.step << ',' << r.channel << ',' << io::format_double(r.value) << '\n';
  close_table(out, path);
}

void write_plot_table(const std::filesystem::path& path, const std::vector<PlotSource>& sources,
                      const std::vector<std::string>& channels) {
  auto out = open_table(path, "source,step,channel,value");
  for (const auto& [name, values] : sources) {
    if (values->channels() != channels.size()) throw UsageError("one label per channel required");
    for (std::size_t i = 0; i < values->items(); ++i)
      for (std::size_t t = 0; t < values->steps(); ++t)
        for (std::size_t c = 0; c < values->channels(); ++c)
          out << name << ',' << t << ',' << channels[c] << ',' << io::format_double((*values)(i, t, c)) << '\n';
  }
  close_table(out, path);
}

std::vector<PlotRow> read_plot_table(const std::filesystem::path& path) {
  const auto table = io::read_csv(path);
  if (table.header != std::vector<std::string>{"source", "step", "channel", "value"})
    throw IoError("unexpected plot table header in " + path.string());
  std::vector<PlotRow> rows;
  for (const auto& r : table.rows) {
    if (r.size() != 4) throw IoError("malformed plot table row in " + path.string());
    rows.push_back({r[0], static_cast<std::size_t>(std::stoull(r[1])), r[2], io::parse_double(r[3])});
  }
  return rows;
}

void write_sample_table(const std::filesystem::path& path, const Tensor3& values,
                        const std::vector<std::string>& channels) {
  if (channels.size() != values.channels()) throw UsageError("one label per channel required");
  auto out = open_table(path, "sample,step,channel,value");
  for (std::size_t i = 0; i < values.items(); ++i)
    for (std::size_t t = 0; t < values.steps(); ++t)
      for (std::size_t c = 0; c < values.channels(); ++c)
        out << i << ',' << t << ',' << channels[c] << ',' << io::format_double(values(i, t, c)) << '\n';
  close_table(out, path);
}

Tensor3 read_sample_table(const std::filesystem::path& path, const std::vector<std::string>& channels) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::map<std::string, std::size_t> channel_index;
  for (std::size_t c = 0; c < channels.size(); ++c) channel_index[channels[c]] = c;
  std::string line;
  std::getline(in, line);
  if (line != "sample,step,channel,value") throw IoError("unexpected sample table header in " + path.string());
  std::vector<std::tuple<std::size_t, std::size_t, std::size_t, double>> cells;
  std::size_t items = 0, steps = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string a, b, c, d;
    if (!std::getline(row, a, ',') || !std::getline(row, b, ',') || !std::getline(row, c, ',') ||
        !std::getline(row, d))
      throw IoError("malformed sample table row in " + path.string());
    const auto it = channel_index.find(c);
    if (it == channel_index.end()) throw IoError("unknown channel '" + c + "' in " + path.string());
    const std::size_t i = std::stoull(a), t = std::stoull(b);
    items = std::max(items, i + 1);
    steps = std::max(steps, t + 1);
    cells.emplace_back(i, t, it->second, io::parse_double(d));
  }
  if (cells.size() != items * steps * channels.size()) throw IoError("incomplete sample table " + path.string());
  Tensor3 out(items, steps, channels.size());
  for (const auto& [i, t, c, v] : cells) out(i, t, c) = v;
  return out;
}

std::string trajectory_hash(const json& trajectory) { return io::fnv1a_hex(trajectory.dump()); }

}  // namespace uqgfn::pipeline
