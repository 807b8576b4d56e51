#include "qpburst/pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <exception>
#include <regex>
#include <sstream>

#include <fmt/format.h>
#include <omp.h>

#include "qpburst/analytics.hpp"
#include "qpburst/cascade.hpp"
#include "qpburst/errors.hpp"
#include "qpburst/rng.hpp"
#include "qpburst/units.hpp"

namespace qpburst::pipeline {

namespace {

// Files written by one command; removed again unless committed.
class OutputSet {
 public:
  ~OutputSet() {
    if (committed_) return;
    for (const auto& f : files_) {
      std::error_code ec;
      fs::remove(f, ec);
    }
  }

  void write(const fs::path& path, const std::string& contents) {
    io::write_file_atomic(path, contents);
    files_.push_back(path);
  }

  void write_dataset(const fs::path& path, const Dataset& ds) {
    io::write_dataset(path, ds);
    files_.push_back(path);
    if (ds.has_ground_truth) files_.push_back(io::events_sidecar_path(path));
  }

  const std::vector<fs::path>& files() const { return files_; }
  void commit() { committed_ = true; }

 private:
  std::vector<fs::path> files_;
  bool committed_ = false;
};

void apply_threads(const CommonOptions& opts) {
  if (opts.threads < 0) throw ConfigError("--threads must be non-negative");
  if (opts.threads > 0) omp_set_num_threads(opts.threads);
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory " + dir.string());
}

std::vector<fs::path> expand_inputs(const std::vector<fs::path>& inputs) {
  static const std::regex kName(R"(dataset_\d+\.csv)");
  std::vector<fs::path> out;
  for (const auto& in : inputs) {
    if (fs::is_directory(in)) {
      std::vector<fs::path> found;
      for (const auto& e : fs::directory_iterator(in)) {
        if (e.is_regular_file() && std::regex_match(e.path().filename().string(), kName)) {
          found.push_back(e.path());
        }
      }
      std::sort(found.begin(), found.end());
      out.insert(out.end(), found.begin(), found.end());
    } else if (fs::exists(in)) {
      out.push_back(in);
    } else {
      throw IoError("input " + in.string() + " does not exist");
    }
  }
  if (out.empty()) throw IoError("no dataset files found");
  return out;
}

std::string dataset_id(const fs::path& p) { return p.stem().string(); }

std::vector<PeakFit> converged_only(const std::vector<PeakFit>& fits) {
  std::vector<PeakFit> out;
  std::copy_if(fits.begin(), fits.end(), std::back_inserter(out), [](const PeakFit& f) { return f.converged; });
  return out;
}

Dataset load_checked(const fs::path& path, const io::RunConfig& cfg, bool need_truth) {
  Dataset ds = io::read_dataset(path, cfg.device);
  if (need_truth && !ds.has_ground_truth) {
    throw IoError("--ground-truth needs the sidecar " + io::events_sidecar_path(path).string());
  }
  return ds;
}

std::string json_number(double v) { return std::isfinite(v) ? fmt::format("{:.12g}", v) : "null"; }

}  // namespace

io::RunConfig resolve_config(const CommonOptions& opts) {
  io::RunConfig cfg = opts.config ? io::load_run_config(*opts.config) : io::RunConfig{};
  if (!opts.config) {
    cfg.plan.n_cycles = std::max<std::int64_t>(
        1, static_cast<std::int64_t>(std::llround(cfg.dataset_duration / cfg.plan.cycle_interval)));
  }
  if (opts.seed) cfg.seed = *opts.seed;
  if (opts.out) cfg.output_dir = *opts.out;
  cfg.validate();
  return cfg;
}

std::uint64_t dataset_seed(std::uint64_t master, std::uint64_t index) { return derive_seed(master, index); }

std::vector<ImpactEvent> dataset_events(const io::RunConfig& cfg, std::uint64_t index) {
  const auto s = dataset_seed(cfg.seed, index);
  return sample_events(cfg.dataset_duration, cfg.event_rate, cfg.energy, derive_seed(s, 0), cfg.device.chip());
}

Dataset simulate_dataset(const io::RunConfig& cfg, std::uint64_t index) {
  const auto events = dataset_events(cfg, index);
  const auto s = dataset_seed(cfg.seed, index);
  Dataset ds = run_rrecs(cfg.device, events, cfg.footprint, cfg.plan, derive_seed(s, 1));
  ds.seed = s;
  return ds;
}

std::string dataset_file_name(std::uint64_t index) { return fmt::format("dataset_{:04d}.csv", index); }

std::size_t detection_slot(const SamplingPlan& plan) {
  return static_cast<std::size_t>(
      std::max_element(plan.sampling_times.begin(), plan.sampling_times.end()) - plan.sampling_times.begin());
}

std::vector<double> true_event_heights(const Dataset& ds, const FootprintModel& model, std::size_t slot,
                                       double horizon) {
  const auto expected = expected_error_counts(ds, model);
  const auto times = ds.wall_times();
  const auto slots = ds.slots();
  std::vector<double> heights;
  for (const auto& e : ds.ground_truth) {
    auto i = static_cast<std::size_t>(std::lower_bound(times.begin(), times.end(), e.t_impact) - times.begin());
    double best = 0.0;
    for (; i < times.size() && times[i] < e.t_impact + horizon; ++i) {
      if (slots[i] == slot) best = std::max(best, expected[i]);
    }
    heights.push_back(best);
  }
  return heights;
}

MatchSummary match_events(std::span<const ImpactEvent> truth, std::span<const double> truth_heights,
                          std::span<const PeakFit> fits, double min_height, double tolerance) {
  if (truth.size() != truth_heights.size()) throw InvalidParameter("truth and heights differ in length");
  MatchSummary m;
  m.n_truth = truth.size();
  std::vector<std::size_t> order(truth.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return truth[a].t_impact < truth[b].t_impact; });
  std::vector<bool> used(fits.size(), false);
  for (const auto& f : fits) m.n_detected += f.converged ? 1 : 0;
  for (auto ti : order) {
    const bool detectable = truth_heights[ti] >= min_height;
    m.n_truth_detectable += detectable ? 1 : 0;
    std::optional<std::size_t> best;
    for (std::size_t k = 0; k < fits.size(); ++k) {
      if (used[k] || !fits[k].converged) continue;
      const double d = std::abs(fits[k].t0 - truth[ti].t_impact);
      if (d <= tolerance && (!best || d < std::abs(fits[*best].t0 - truth[ti].t_impact))) best = k;
    }
    if (best) {
      used[*best] = true;
      m.pairs.emplace_back(ti, *best);
      if (detectable) ++m.matched_detectable;
    }
  }
  m.false_positives = m.n_detected - m.pairs.size();
  return m;
}

int cmd_simulate(const CommonOptions& opts, std::ostream& log) {
  apply_threads(opts);
  const auto cfg = resolve_config(opts);
  ensure_dir(cfg.output_dir);

  OutputSet outputs;
  const int n = cfg.n_datasets;
  // Datasets are independent: render a batch in parallel, then write it in order.
  const int batch = std::max(1, omp_get_max_threads());
  std::size_t total_events = 0;
  for (int b0 = 0; b0 < n; b0 += batch) {
    const int b1 = std::min(n, b0 + batch);
    std::vector<std::string> text(static_cast<std::size_t>(b1 - b0));
    std::vector<std::string> events(text.size());
    std::vector<std::size_t> n_events(text.size());
    std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic)
    for (int i = b0; i < b1; ++i) {
      try {
        const auto ds = simulate_dataset(cfg, static_cast<std::uint64_t>(i));
        const auto k = static_cast<std::size_t>(i - b0);
        text[k] = io::format_dataset(ds);
        events[k] = io::format_events(ds.ground_truth);
        n_events[k] = ds.ground_truth.size();
      } catch (...) {
#pragma omp critical
        if (!failure) failure = std::current_exception();
      }
    }
    if (failure) std::rethrow_exception(failure);
    for (int i = b0; i < b1; ++i) {
      const auto k = static_cast<std::size_t>(i - b0);
      const auto path = cfg.output_dir / dataset_file_name(static_cast<std::uint64_t>(i));
      outputs.write(path, text[k]);
      outputs.write(io::events_sidecar_path(path), events[k]);
      total_events += n_events[k];
    }
  }
  const auto manifest = cfg.output_dir / "manifest.sha256";
  const auto files = outputs.files();
  outputs.write(manifest, io::format_manifest(cfg.output_dir, files));
  outputs.commit();
  log << fmt::format("simulated {} datasets ({} events) into {}\n", n, total_events, cfg.output_dir.string());
  return kOk;
}

int cmd_detect(const CommonOptions& opts, const std::vector<fs::path>& inputs, std::ostream& log) {
  apply_threads(opts);
  const auto cfg = resolve_config(opts);
  const auto files = expand_inputs(inputs);
  ensure_dir(cfg.output_dir);

  OutputSet outputs;
  std::vector<std::vector<double>> peak_times;
  std::string truth_table = "dataset_id,n_truth,n_truth_h6,matched_h6,n_detected,false_positives\n";
  std::string recovery = "dataset_id,t_true_s,t0_s,height_true,height_fit,tau_ms,energy_ev\n";
  MatchSummary total;
  bool any_nonconverged = false;
  std::size_t n_peaks = 0;

  for (const auto& path : files) {
    const auto ds = load_checked(path, cfg, opts.ground_truth);
    const auto series = error_counts(ds);
    const std::size_t slot = detection_slot(ds.plan());
    const auto fits = detect_events(series[slot], ds.n_qubits());
    std::vector<io::PeakRow> rows;
    std::vector<double> times;
    for (const auto& f : fits) {
      rows.push_back({dataset_id(path), f});
      if (f.converged) times.push_back(f.t0);
      any_nonconverged |= !f.converged;
    }
    n_peaks += fits.size();
    peak_times.push_back(times);
    outputs.write(cfg.output_dir / (dataset_id(path) + ".peaks.csv"), io::format_peaks(rows));

    if (opts.ground_truth) {
      const auto heights = true_event_heights(ds, cfg.footprint, slot);
      const auto m = match_events(ds.ground_truth, heights, fits);
      truth_table += fmt::format("{},{},{},{},{},{}\n", dataset_id(path), m.n_truth, m.n_truth_detectable,
                                 m.matched_detectable, m.n_detected, m.false_positives);
      for (const auto& [ti, fi] : m.pairs) {
        const auto& e = ds.ground_truth[ti];
        recovery += fmt::format("{},{:.9f},{:.9f},{:.4f},{:.4f},{:.4f},{:.6g}\n", dataset_id(path), e.t_impact,
                                fits[fi].t0, heights[ti], fits[fi].height, fits[fi].tau_decay * 1e3,
                                e.deposited_energy);
      }
      total.n_truth += m.n_truth;
      total.n_truth_detectable += m.n_truth_detectable;
      total.matched_detectable += m.matched_detectable;
      total.n_detected += m.n_detected;
      total.false_positives += m.false_positives;
    }
  }
  const auto intervals = inter_event_intervals(peak_times);
  outputs.write(cfg.output_dir / "intervals.csv", io::format_intervals(intervals));
  if (opts.ground_truth) {
    outputs.write(cfg.output_dir / "ground_truth_recall.csv", truth_table);
    outputs.write(cfg.output_dir / "ground_truth_recovery.csv", recovery);
    const double recall = total.n_truth_detectable
                              ? static_cast<double>(total.matched_detectable) / total.n_truth_detectable
                              : 1.0;
    const double precision =
        total.n_detected ? 1.0 - static_cast<double>(total.false_positives) / total.n_detected : 1.0;
    log << fmt::format("recall (true height >= 6): {:.4f}  precision: {:.4f}  false positives: {}\n", recall,
                       precision, total.false_positives);
  }
  outputs.commit();
  log << fmt::format("{} datasets, {} peaks, {} intervals\n", files.size(), n_peaks, intervals.size());
  if (opts.strict && any_nonconverged) {
    log << "some fits did not converge\n";
    return kNonConvergence;
  }
  return kOk;
}

int cmd_stats(const CommonOptions& opts, const std::vector<fs::path>& inputs, std::ostream& log) {
  apply_threads(opts);
  const auto cfg = resolve_config(opts);
  const auto files = expand_inputs(inputs);
  ensure_dir(cfg.output_dir);

  OutputSet outputs;
  std::vector<std::vector<double>> peak_times;
  std::ostringstream summary;
  summary << "{\n  \"datasets\": [\n";
  for (std::size_t i = 0; i < files.size(); ++i) {
    const auto ds = load_checked(files[i], cfg, false);
    const auto series = error_counts(ds);
    const std::size_t slot = detection_slot(ds.plan());
    const auto model = independent_count_pmf(ds.device(), ds.plan(), slot);
    const auto h = histogram_comparison(series[slot].y, model);
    outputs.write(cfg.output_dir / (dataset_id(files[i]) + ".hist.csv"), io::format_histogram(h, model));
    std::vector<double> times;
    for (const auto& f : converged_only(detect_events(series[slot], ds.n_qubits()))) times.push_back(f.t0);
    peak_times.push_back(times);
    summary << fmt::format(
        "    {{\"dataset_id\": \"{}\", \"total_variation\": {}, \"chi_square\": {}, \"chi_square_dof\": {}, "
        "\"excess_tail_mass\": {}, \"tail_threshold\": {}, \"n_events\": {}}}{}\n",
        dataset_id(files[i]), json_number(h.total_variation), json_number(h.chi_square), h.chi_square_dof,
        json_number(h.excess_tail_mass), h.tail_threshold, times.size(), i + 1 < files.size() ? "," : "");
  }
  summary << "  ],\n";
  const auto intervals = inter_event_intervals(peak_times);
  summary << fmt::format("  \"n_intervals\": {},\n", intervals.size());
  bool nonconverged = false;
  if (intervals.size() >= 2) {
    const auto fit = poisson_rate_fit(intervals, cfg.seed);
    summary << fmt::format("  \"interval_fit\": {{\"lambda_mle\": {}, \"ks_statistic\": {}, \"ks_pvalue\": {}}}\n",
                           json_number(fit.lambda_mle), json_number(fit.ks_statistic), json_number(fit.ks_pvalue));
    log << fmt::format("lambda_mle = {:.4f} 1/s over {} intervals, KS p = {:.4f}\n", fit.lambda_mle,
                       intervals.size(), fit.ks_pvalue);
  } else {
    summary << "  \"interval_fit\": null\n";
    nonconverged = true;
    log << "fewer than two intervals; no rate fit\n";
  }
  summary << "}\n";
  outputs.write(cfg.output_dir / "intervals.csv", io::format_intervals(intervals));
  outputs.write(cfg.output_dir / "stats.json", summary.str());
  outputs.commit();
  return opts.strict && nonconverged ? kNonConvergence : kOk;
}

int cmd_t1x(const CommonOptions& opts, const std::vector<fs::path>& inputs, std::ostream& log) {
  apply_threads(opts);
  const auto cfg = resolve_config(opts);
  const auto files = expand_inputs(inputs);
  ensure_dir(cfg.output_dir);

  OutputSet outputs;
  std::string table = "dataset_id,t0_s,t1_avg_us,amplitude_a,fit_rms,zero_param_residual,converged";
  bool header_done = false;
  bool any_nonconverged = false;
  std::size_t n_rows = 0;
  for (const auto& path : files) {
    const auto ds = load_checked(path, cfg, false);
    const auto& plan = ds.plan();
    if (plan.n_slots() < 3) throw InvalidInput(path.string() + " is not a T-RReCS dataset (needs >= 3 slots)");
    if (!header_done) {
      for (std::size_t s = 0; s < plan.n_slots(); ++s) table += fmt::format(",h{}", s);
      table += "\n";
      header_done = true;
    }
    const auto series = error_counts(ds);
    const std::size_t slot = detection_slot(plan);
    const auto fits = converged_only(detect_events(series[slot], ds.n_qubits()));

    double eps_a = 0.0, eps_b = 0.0;
    for (const auto& q : ds.device().qubits()) {
      eps_a += q.eps_read0_given1;
      eps_b += q.eps_read1_given0;
    }
    eps_a /= static_cast<double>(ds.n_qubits());
    eps_b /= static_cast<double>(ds.n_qubits());

    for (const auto& f : fits) {
      std::vector<double> heights;
      bool ok = true;
      for (std::size_t s = 0; s < plan.n_slots(); ++s) {
        PeakFit pf;
        try {
          pf = fit_event(series[s], f.t0, ds.n_qubits(), kSlotHeightWindow);
        } catch (const InsufficientData&) {
          pf.converged = false;
        }
        ok &= pf.converged;
        heights.push_back(std::max(1e-9, readout_corrected_height(pf.height, ds.n_qubits(), eps_a, eps_b)));
      }
      const auto x = t1_from_peak_heights(heights, plan.sampling_times, ds.n_qubits(), plan.extra_window);
      const bool conv = ok && x.converged;
      any_nonconverged |= !conv;
      table += fmt::format("{},{:.9f},{:.6f},{:.6f},{:.6f},{:.6f},{}", dataset_id(path), f.t0, x.t1_avg * 1e6,
                           x.amplitude_a, x.fit_rms, x.zero_param_residual, conv ? 1 : 0);
      for (double h : heights) table += fmt::format(",{:.6f}", h);
      table += "\n";
      ++n_rows;
    }
  }
  outputs.write(cfg.output_dir / "t1x.csv", table);
  outputs.commit();
  log << fmt::format("{} events analysed\n", n_rows);
  return opts.strict && any_nonconverged ? kNonConvergence : kOk;
}

int cmd_heatmap(const CommonOptions& opts, const fs::path& input, double center, double width, std::ostream& log) {
  apply_threads(opts);
  const auto cfg = resolve_config(opts);
  ensure_dir(cfg.output_dir);
  const auto ds = load_checked(input, cfg, false);
  const auto h = heatmap(ds, center, width);
  OutputSet outputs;
  const auto path = cfg.output_dir / fmt::format("{}.heatmap_{:.6f}.csv", dataset_id(input), center);
  outputs.write(path, io::format_heatmap(h));
  outputs.commit();
  log << fmt::format("heatmap over {} records written to {}\n", h.n_records, path.string());
  return kOk;
}

double parse_energy(const std::string& text) {
  std::string s;
  for (char c : text) {
    if (!std::isspace(static_cast<unsigned char>(c))) s += c;
  }
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw ConfigError("bad energy '" + text + "'");
  }
  const std::string unit = s.substr(used);
  double scale = 0.0;
  if (unit == "eV" || unit.empty()) {
    scale = 1.0;
  } else if (unit == "meV") {
    scale = units::kMeV;
  } else if (unit == "keV") {
    scale = units::kKeV;
  } else if (unit == "MeV") {
    scale = units::kMegaEV;
  } else {
    throw ConfigError("unknown energy unit '" + unit + "' in '" + text + "'");
  }
  return v * scale;
}

int cmd_cascade(const std::string& material, const std::string& energies, bool csv,
                const std::optional<fs::path>& out, std::ostream& log) {
  cascade::MaterialParams m;
  try {
    m = cascade::MaterialParams::preset(material);
  } catch (const InvalidParameter& e) {
    throw ConfigError(e.what());
  }
  std::vector<double> list;
  std::stringstream ss(energies);
  for (std::string tok; std::getline(ss, tok, ',');) {
    if (!tok.empty()) list.push_back(parse_energy(tok));
  }
  const auto rows = cascade::derived_table(m, list);

  std::string csv_text = "quantity,value,unit\n";
  for (const auto& r : rows) csv_text += fmt::format("\"{}\",{:.6g},{}\n", r.name, r.value, r.unit);
  if (csv) {
    log << csv_text;
  } else {
    std::size_t width = 0;
    for (const auto& r : rows) width = std::max(width, r.name.size());
    log << fmt::format("material: {}\n", m.name);
    for (const auto& r : rows) log << fmt::format("{:<{}}  {:>12.6g}  {}\n", r.name, width, r.value, r.unit);
  }
  if (out) {
    ensure_dir(*out);
    OutputSet outputs;
    outputs.write(*out / "cascade.csv", csv_text);
    outputs.commit();
  }
  return kOk;
}

int run_guarded(const std::function<int()>& body, std::ostream& err) {
  try {
    return body();
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kIoError;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kConfigError;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kIoError;
  }
}

}  // namespace qpburst::pipeline
