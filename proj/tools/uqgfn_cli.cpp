#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "uqgfn/common/errors.hpp"
#include "uqgfn/pipeline/manifest.hpp"
#include "uqgfn/pipeline/pipeline.hpp"

namespace {

using uqgfn::pipeline::Manifest;
using uqgfn::pipeline::Pipeline;
using uqgfn::pipeline::Role;

enum ExitCode { kOk = 0, kUsage = 1, kNumerical = 2, kIo = 3 };

struct Options {
  std::string manifest;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  std::string experiment;
  std::string surrogate;
  std::optional<int> degree;
  std::optional<double> ridge;
  std::optional<std::size_t> samples;
  std::string role = "both";
  bool quiet = false;
};

void add_common(CLI::App* cmd, Options& o) {
  cmd->add_option("--manifest", o.manifest, "Experiment manifest (JSON)");
  cmd->add_option("--seed", o.seed, "Base seed");
  cmd->add_option("--out-dir", o.out_dir, "Output root directory");
  cmd->add_option("--experiment", o.experiment, "discrete-grid | continuous-grid | symreg | structlearn");
  cmd->add_option("--surrogate", o.surrogate, "pce | mlp")->check(CLI::IsMember({"pce", "mlp"}));
  cmd->add_option("--degree", o.degree, "PCE total degree");
  cmd->add_option("--ridge", o.ridge, "Ridge penalty");
  cmd->add_option("--samples", o.samples, "Surrogate samples to draw");
  cmd->add_flag("--quiet", o.quiet, "Suppress progress messages");
}

Manifest resolve_manifest(const Options& o) {
  nlohmann::json doc;
  if (!o.manifest.empty()) {
    doc = uqgfn::pipeline::load_manifest(o.manifest).to_json();
    if (!o.experiment.empty() && o.experiment != doc.at("experiment"))
      throw uqgfn::UsageError("--experiment " + o.experiment + " contradicts the manifest");
  } else {
    if (o.experiment.empty()) throw uqgfn::UsageError("give --manifest or --experiment");
    doc = Manifest::defaults(uqgfn::pipeline::experiment_from_string(o.experiment)).to_json();
  }
  if (o.seed) doc["seed"] = *o.seed;
  if (!o.out_dir.empty()) doc["out_dir"] = o.out_dir;
  if (!o.surrogate.empty()) doc["surrogate"]["kind"] = o.surrogate;
  if (o.degree) doc["surrogate"]["degree"] = *o.degree;
  if (o.ridge) doc["surrogate"]["ridge"] = *o.ridge;
  if (o.samples) doc["surrogate"]["samples"] = *o.samples;
  return Manifest::from_json(doc);
}

std::vector<Role> roles(const std::string& name) {
  if (name == "both") return {Role::kTrain, Role::kTest};
  return {uqgfn::pipeline::role_from_string(name)};
}

int run(const std::string& command, const Options& o) {
  Pipeline p(resolve_manifest(o));
  if (!o.quiet) p.set_logger([](const std::string& m) { std::cerr << m << '\n'; });
  std::size_t failures = 0;
  if (command == "sample-rewards") p.sample_rewards();
  else if (command == "fit-embed") p.fit_embed();
  else if (command == "train-ensemble")
    for (Role r : roles(o.role)) failures += p.train_ensemble(r);
  else if (command == "extract-policies")
    for (Role r : roles(o.role)) p.extract_policies(r);
  else if (command == "fit-surrogate") p.fit_surrogate();
  else if (command == "sample-surrogate") p.sample_surrogate();
  else if (command == "compare") p.compare();
  else if (command == "sobol") p.sobol();
  else if (command == "run-all") failures = p.run_all();
  if (failures > 0) {
    std::cerr << failures << " ensemble member(s) failed to train\n";
    return kNumerical;
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Uncertainty quantification of GFlowNet policies with polynomial chaos surrogates"};
  app.require_subcommand(1);
  Options options;
  const std::vector<std::pair<std::string, std::string>> commands{
      {"sample-rewards", "Draw the reward functions of both ensembles"},
      {"fit-embed", "Fit the low-dimensional reward embedding"},
      {"train-ensemble", "Train one GFN per reward"},
      {"extract-policies", "Extract member policies along the focal trajectory"},
      {"fit-surrogate", "Fit the policy surrogate on the training ensemble"},
      {"sample-surrogate", "Draw policies from the surrogate"},
      {"compare", "Compare surrogate samples with the testing ensemble"},
      {"sobol", "Sensitivity indices of the fitted surrogate"},
      {"run-all", "Run every stage in order"},
  };
  for (const auto& [name, help] : commands) {
    auto* cmd = app.add_subcommand(name, help);
    add_common(cmd, options);
    if (name == "train-ensemble" || name == "extract-policies")
      cmd->add_option("--role", options.role, "train | test | both")->check(CLI::IsMember({"train", "test", "both"}));
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }
  const std::string command = app.get_subcommands().front()->get_name();
  try {
    return run(command, options);
  } catch (const uqgfn::UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const uqgfn::ParseError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const uqgfn::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return kNumerical;
  } catch (const uqgfn::IoError& e) {
    std::cerr << "I/O error: " << e.what() << '\n';
    return kIo;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "I/O error: " << e.what() << '\n';
    return kIo;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "I/O error: malformed artefact: " << e.what() << '\n';
    return kIo;
  }
}
