#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "qpburst/analytics.hpp"
#include "qpburst/detector.hpp"
#include "qpburst/impact.hpp"
#include "qpburst/sampler.hpp"

namespace qpburst::io {

namespace fs = std::filesystem;

struct RunConfig {
  DeviceConfig device = DeviceConfig::default_device();
  FootprintModel footprint;
  SamplingPlan plan;  // n_cycles is derived from dataset_duration
  EnergyDistribution energy;
  double event_rate = 0.1;  // 1/s
  int n_datasets = 100;
  double dataset_duration = 60.0;  // s
  std::uint64_t seed = 1;
  fs::path output_dir = "out";

  /// Throws ConfigError when a field or nested config is out of range.
  void validate() const;
};

/// Reads the JSON run configuration. Every key is optional; unknown keys are
/// rejected. Syntax errors raise ParseError with line and column.
RunConfig parse_run_config(const std::string& text, const std::string& source = "<config>");
RunConfig load_run_config(const fs::path& path);

/// Writes contents to path through a temporary file and a rename.
void write_file_atomic(const fs::path& path, const std::string& contents);
std::string read_file(const fs::path& path);

/// dataset.csv -> dataset.events.csv
fs::path events_sidecar_path(const fs::path& dataset_path);

std::string format_dataset(const Dataset& ds);
void write_dataset(const fs::path& path, const Dataset& ds);

/// Parses a dataset file against the given device (qubit count must match).
/// Loads the events sidecar when present.
Dataset parse_dataset(const std::string& text, const DeviceConfig& device, const std::string& source);
Dataset read_dataset(const fs::path& path, const DeviceConfig& device);

std::string format_events(std::span<const ImpactEvent> events);
std::vector<ImpactEvent> parse_events(const std::string& text, const std::string& source);

struct PeakRow {
  std::string dataset_id;
  PeakFit fit;
};
std::string format_peaks(std::span<const PeakRow> rows);
std::string format_intervals(std::span<const double> intervals);

std::string format_histogram(const HistogramComparison& h, const CountDistribution& model);
std::string format_heatmap(const Heatmap& h);

/// Lowercase hex SHA-256 of a byte string.
std::string sha256_hex(const std::string& bytes);

/// "<sha256>  <name>" lines (sha256sum format) for every file, names relative
/// to dir and sorted.
std::string format_manifest(const fs::path& dir, const std::vector<fs::path>& files);

}  // namespace qpburst::io
