// qpburst: simulate, detect and analyse correlated qubit error bursts.

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "qpburst/pipeline.hpp"

namespace pl = qpburst::pipeline;

namespace {

struct Flags {
  std::string config;
  std::uint64_t seed = 0;
  std::string out;
  int threads = 0;
  bool ground_truth = false;
  bool strict = false;
};

void add_common(CLI::App* cmd, Flags& f, bool with_truth) {
  cmd->add_option("--config", f.config, "JSON run configuration")->check(CLI::ExistingFile);
  cmd->add_option("--seed", f.seed, "Master seed (overrides the config)");
  cmd->add_option("--out", f.out, "Output directory (overrides the config)");
  cmd->add_option("--threads", f.threads, "OpenMP threads (0 = default)")->check(CLI::NonNegativeNumber);
  cmd->add_flag("--strict", f.strict, "Exit with code 4 when a fit does not converge");
  if (with_truth) cmd->add_flag("--ground-truth", f.ground_truth, "Score against the .events.csv sidecars");
}

pl::CommonOptions to_options(const CLI::App* cmd, const Flags& f) {
  pl::CommonOptions o;
  if (!f.config.empty()) o.config = f.config;
  if (cmd->count("--seed")) o.seed = f.seed;
  if (!f.out.empty()) o.out = f.out;
  o.threads = f.threads;
  o.ground_truth = f.ground_truth;
  o.strict = f.strict;
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Correlated error-burst simulator and analysis pipeline"};
  app.require_subcommand(1);

  Flags f;
  std::vector<std::string> inputs;
  std::string material = "al";
  std::string energies = "5meV,1meV,0.36meV";
  bool csv = false;
  double center = 0.0;
  double width_us = 300.0;

  auto* simulate = app.add_subcommand("simulate", "Write simulated datasets and event sidecars");
  add_common(simulate, f, false);

  auto* detect = app.add_subcommand("detect", "Find and fit events; write *.peaks.csv and intervals.csv");
  add_common(detect, f, true);
  detect->add_option("inputs", inputs, "Dataset files or directories")->required();

  auto* stats = app.add_subcommand("stats", "Background histograms and inter-arrival fit");
  add_common(stats, f, false);
  stats->add_option("inputs", inputs, "Dataset files or directories")->required();

  auto* t1x = app.add_subcommand("t1x", "Extract average T1 from T-RReCS event heights");
  add_common(t1x, f, false);
  t1x->add_option("inputs", inputs, "T-RReCS dataset files or directories")->required();

  auto* hm = app.add_subcommand("heatmap", "Per-qubit error rate in a time window");
  add_common(hm, f, false);
  hm->add_option("inputs", inputs, "Dataset file")->required()->expected(1);
  hm->add_option("--center", center, "Window centre in s")->required();
  hm->add_option("--width-us", width_us, "Window width in us")->check(CLI::PositiveNumber);

  auto* cas = app.add_subcommand("cascade", "Print the derived cascade quantities");
  cas->add_option("--material", material, "Material preset (al, in)");
  cas->add_option("--energy", energies, "Comma-separated phonon energies with units");
  cas->add_flag("--csv", csv, "Print CSV instead of an aligned table");
  cas->add_option("--out", f.out, "Also write cascade.csv to this directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : pl::kConfigError;
  }

  return pl::run_guarded(
      [&]() -> int {
        std::vector<std::filesystem::path> paths(inputs.begin(), inputs.end());
        if (*simulate) return pl::cmd_simulate(to_options(simulate, f), std::cout);
        if (*detect) return pl::cmd_detect(to_options(detect, f), paths, std::cout);
        if (*stats) return pl::cmd_stats(to_options(stats, f), paths, std::cout);
        if (*t1x) return pl::cmd_t1x(to_options(t1x, f), paths, std::cout);
        if (*hm) return pl::cmd_heatmap(to_options(hm, f), paths.front(), center, width_us * 1e-6, std::cout);
        std::optional<std::filesystem::path> out;
        if (!f.out.empty()) out = f.out;
        return pl::cmd_cascade(material, energies, csv, out, std::cout);
      },
      std::cerr);
}
