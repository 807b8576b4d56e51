#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "qpburst/detector.hpp"
#include "qpburst/impact.hpp"
#include "qpburst/io.hpp"

// Subcommand implementations shared by the CLI and the tests. Each returns a
// process exit code and writes progress to `log`.
namespace qpburst::pipeline {

namespace fs = std::filesystem;

enum ExitCode : int { kOk = 0, kConfigError = 2, kIoError = 3, kNonConvergence = 4 };

struct CommonOptions {
  std::optional<fs::path> config;
  std::optional<std::uint64_t> seed;
  std::optional<fs::path> out;
  int threads = 0;  // 0 keeps the OpenMP default
  bool ground_truth = false;
  bool strict = false;
};

/// Loads the config (or defaults) and applies --seed / --out overrides.
io::RunConfig resolve_config(const CommonOptions& opts);

/// Per-dataset seeds: derive_seed(master, i); events and bits use the two
/// child streams derive_seed(seed_i, 0) and derive_seed(seed_i, 1).
std::uint64_t dataset_seed(std::uint64_t master, std::uint64_t index);
std::vector<ImpactEvent> dataset_events(const io::RunConfig& cfg, std::uint64_t index);
Dataset simulate_dataset(const io::RunConfig& cfg, std::uint64_t index);
std::string dataset_file_name(std::uint64_t index);

/// Truncated window for per-slot peak heights in T-RReCS data. A short tail
/// keeps the exponential template close to peaks that saturate near N_Q.
inline constexpr FitWindow kSlotHeightWindow{.pre = 20e-3, .post = 20e-3};

/// Slot used for detection: the one with the longest sampling time.
std::size_t detection_slot(const SamplingPlan& plan);

/// Largest expected error count within [t_e, t_e + horizon) of each event.
std::vector<double> true_event_heights(const Dataset& ds, const FootprintModel& model, std::size_t slot,
                                       double horizon = 20e-3);

struct MatchSummary {
  std::size_t n_truth = 0;
  std::size_t n_truth_detectable = 0;  // true height >= min_height
  std::size_t matched_detectable = 0;
  std::size_t n_detected = 0;  // converged fits
  std::size_t false_positives = 0;
  std::vector<std::pair<std::size_t, std::size_t>> pairs;  // (truth index, fit index)
};

/// Greedy one-to-one matching in time order: each true event takes the
/// closest unmatched converged fit within `tolerance` of its impact time.
MatchSummary match_events(std::span<const ImpactEvent> truth, std::span<const double> truth_heights,
                          std::span<const PeakFit> fits, double min_height = 6.0,
                          double tolerance = 30e-3);

int cmd_simulate(const CommonOptions& opts, std::ostream& log);
int cmd_detect(const CommonOptions& opts, const std::vector<fs::path>& inputs, std::ostream& log);
int cmd_stats(const CommonOptions& opts, const std::vector<fs::path>& inputs, std::ostream& log);
int cmd_t1x(const CommonOptions& opts, const std::vector<fs::path>& inputs, std::ostream& log);
int cmd_heatmap(const CommonOptions& opts, const fs::path& input, double center, double width,
                std::ostream& log);
/// energies: comma list with units, e.g. "5meV,1meV,0.36meV".
int cmd_cascade(const std::string& material, const std::string& energies, bool csv,
                const std::optional<fs::path>& out, std::ostream& log);

/// Parses "5meV", "0.1 eV", "80keV" into eV. Throws ConfigError.
double parse_energy(const std::string& text);

/// Runs body and maps library exceptions to exit codes, printing the message.
int run_guarded(const std::function<int()>& body, std::ostream& err);

}  // namespace qpburst::pipeline
