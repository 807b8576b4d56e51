#include "qpburst/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <openssl/evp.h>
#include <unistd.h>

#include "json.hpp"
#include "qpburst/errors.hpp"
#include "qpburst/units.hpp"

namespace qpburst::io {

using nlohmann::json;

namespace {

constexpr std::string_view kDatasetMagic = "# qpburst-dataset v1";

void check_keys(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw ConfigError(where + " must be an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : obj.items()) {
    if (!ok.count(key)) throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

template <typename T>
T get(const json& obj, const char* key, const std::string& where, T fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + "." + key + " has the wrong type");
  }
}

std::pair<std::size_t, std::size_t> line_col(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < std::min(byte, text.size()); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

DeviceConfig parse_device(const json& root) {
  const auto base = DeviceConfig::default_device();
  ChipExtent chip = base.chip();
  double pitch = base.qubit_pitch_mm();
  if (root.contains("chip")) {
    const auto& c = root.at("chip");
    check_keys(c, "chip", {"width_mm", "height_mm", "pitch_mm"});
    chip.width_mm = get(c, "width_mm", "chip", chip.width_mm);
    chip.height_mm = get(c, "height_mm", "chip", chip.height_mm);
    pitch = get(c, "pitch_mm", "chip", pitch);
  }
  const double omega = root.contains("omega_q_ghz")
                           ? units::angular_from_ghz(get(root, "omega_q_ghz", "config", 6.0))
                           : base.omega_q();

  std::vector<QubitSpec> qubits;
  if (root.contains("qubits")) {
    const auto& arr = root.at("qubits");
    if (!arr.is_array() || arr.empty()) throw ConfigError("qubits must be a non-empty array");
    std::vector<GridPos> grid;
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const auto& q = arr[i];
      const std::string where = "qubits[" + std::to_string(i) + "]";
      check_keys(q, where, {"id", "row", "col", "t1_us", "eps10", "eps01", "x_mm", "y_mm"});
      if (!q.contains("row") || !q.contains("col")) throw ConfigError(where + " needs row and col");
      QubitSpec s;
      s.id = get(q, "id", where, static_cast<int>(i));
      s.grid_pos = {get(q, "row", where, 0), get(q, "col", where, 0)};
      s.t1_baseline = units::s_from_us(get(q, "t1_us", where, units::us_from_s(s.t1_baseline)));
      s.eps_read0_given1 = get(q, "eps10", where, s.eps_read0_given1);
      s.eps_read1_given0 = get(q, "eps01", where, s.eps_read1_given0);
      grid.push_back(s.grid_pos);
      qubits.push_back(s);
    }
    const auto xy = DeviceConfig::layout(grid, chip, pitch);
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string where = "qubits[" + std::to_string(i) + "]";
      qubits[i].xy_mm = {get(arr[i], "x_mm", where, xy[i].x), get(arr[i], "y_mm", where, xy[i].y)};
    }
  } else {
    // Default grid re-centred on the configured chip.
    std::vector<GridPos> grid;
    for (const auto& q : base.qubits()) grid.push_back(q.grid_pos);
    const auto xy = DeviceConfig::layout(grid, chip, pitch);
    for (std::size_t i = 0; i < base.n_qubits(); ++i) {
      auto s = base.qubit(i);
      s.xy_mm = xy[i];
      qubits.push_back(s);
    }
  }
  try {
    return DeviceConfig::make(std::move(qubits), chip, pitch, omega);
  } catch (const InvalidParameter& e) {
    throw ConfigError(std::string("device: ") + e.what());
  }
}

cascade::MaterialParams parse_material(const json& v) {
  if (v.is_string()) {
    try {
      return cascade::MaterialParams::preset(v.get<std::string>());
    } catch (const InvalidParameter& e) {
      throw ConfigError(e.what());
    }
  }
  check_keys(v, "material", {"preset", "gap_delta_ev", "n_cp_per_um3", "tau0_ph_ns", "tau0_qp_ns",
                             "sound_speed_m_s", "thickness_nm"});
  auto m = cascade::MaterialParams::preset(get<std::string>(v, "preset", "material", "al"));
  m.gap_delta = get(v, "gap_delta_ev", "material", m.gap_delta);
  m.n_cp = get(v, "n_cp_per_um3", "material", m.n_cp);
  m.tau0_ph = get(v, "tau0_ph_ns", "material", m.tau0_ph * 1e9) * 1e-9;
  m.tau0_qp = get(v, "tau0_qp_ns", "material", m.tau0_qp * 1e9) * 1e-9;
  m.sound_speed = get(v, "sound_speed_m_s", "material", m.sound_speed);
  m.thickness = get(v, "thickness_nm", "material", m.thickness * 1e9) * 1e-9;
  return m;
}

std::string fmt_double(double v) { return fmt::format("{:.17g}", v); }

// Cursor over one CSV line for error reporting.
struct LineReader {
  std::string_view line;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  const std::string& source;

  [[noreturn]] void fail(const std::string& what) const {
    throw ParseError(source, line_no, pos + 1, what);
  }

  std::string_view field() {
    if (pos > line.size()) fail("missing field");
    const std::size_t end = std::min(line.find(',', pos), line.size());
    auto f = line.substr(pos, end - pos);
    pos = end + 1;
    return f;
  }

  template <typename T>
  T number() {
    const std::size_t start = pos;
    auto f = field();
    T v{};
    auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
    if (ec != std::errc() || ptr != f.data() + f.size() || f.empty()) {
      pos = start;
      fail("expected a number, got '" + std::string(f) + "'");
    }
    return v;
  }

  void expect_end() const {
    if (pos <= line.size()) {
      LineReader copy = *this;
      copy.fail("unexpected extra field");
    }
  }
};

std::vector<std::string_view> split_lines(const std::string& text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    std::string_view l(text.data() + start, end - start);
    if (!l.empty() && l.back() == '\r') l.remove_suffix(1);
    lines.push_back(l);
    start = end + 1;
  }
  return lines;
}

}  // namespace

void RunConfig::validate() const {
  try {
    footprint.validate();
    plan.validate();
    energy.validate();
  } catch (const InvalidParameter& e) {
    throw ConfigError(e.what());
  }
  if (n_datasets < 1) throw ConfigError("n_datasets must be at least 1");
  if (!(dataset_duration > 0.0)) throw ConfigError("dataset_duration must be positive");
  if (!(event_rate >= 0.0)) throw ConfigError("event_rate must be non-negative");
  if (footprint.chip.width_mm != device.chip().width_mm ||
      footprint.chip.height_mm != device.chip().height_mm) {
    throw ConfigError("footprint chip differs from device chip");
  }
}

RunConfig parse_run_config(const std::string& text, const std::string& source) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    const auto [line, col] = line_col(text, e.byte == 0 ? 0 : e.byte - 1);
    std::string what = e.what();
    if (auto p = what.find("syntax error"); p != std::string::npos) what = what.substr(p);
    throw ParseError(source, line, col, what);
  }
  check_keys(root, "config",
             {"qubits", "chip", "omega_q_ghz", "profile", "material", "phonon_fraction", "plan",
              "event_rate_hz", "energy_distribution", "n_datasets", "dataset_duration_s", "seed",
              "output_dir"});

  RunConfig cfg;
  cfg.device = parse_device(root);
  cfg.footprint.chip = cfg.device.chip();

  if (root.contains("profile")) {
    const auto& p = root.at("profile");
    check_keys(p, "profile", {"sigma0_mm", "sigma_chip_mm", "tau_rise_us", "tau_spread_us",
                              "tau_decay_ms", "x_qp_peak_scale"});
    auto& pr = cfg.footprint.profile;
    pr.sigma0_mm = get(p, "sigma0_mm", "profile", pr.sigma0_mm);
    pr.sigma_chip_mm = get(p, "sigma_chip_mm", "profile", pr.sigma_chip_mm);
    pr.tau_rise = units::s_from_us(get(p, "tau_rise_us", "profile", units::us_from_s(pr.tau_rise)));
    pr.tau_spread = units::s_from_us(get(p, "tau_spread_us", "profile", units::us_from_s(pr.tau_spread)));
    pr.tau_decay = get(p, "tau_decay_ms", "profile", pr.tau_decay * 1e3) * 1e-3;
    pr.x_qp_peak_scale = get(p, "x_qp_peak_scale", "profile", pr.x_qp_peak_scale);
  }
  if (root.contains("material")) cfg.footprint.material = parse_material(root.at("material"));
  cfg.footprint.phonon_fraction = get(root, "phonon_fraction", "config", cfg.footprint.phonon_fraction);

  if (root.contains("plan")) {
    const auto& p = root.at("plan");
    check_keys(p, "plan", {"prep_state", "sampling_times_us", "cycle_interval_us", "extra_window_us"});
    const auto prep = get<std::string>(p, "prep_state", "plan", "one");
    if (prep == "one") {
      cfg.plan.prep_state = PrepState::One;
    } else if (prep == "zero") {
      cfg.plan.prep_state = PrepState::Zero;
    } else {
      throw ConfigError("plan.prep_state must be 'one' or 'zero'");
    }
    if (p.contains("sampling_times_us")) {
      const auto us = get<std::vector<double>>(p, "sampling_times_us", "plan", {});
      cfg.plan.sampling_times.clear();
      for (double v : us) cfg.plan.sampling_times.push_back(units::s_from_us(v));
    }
    cfg.plan.cycle_interval = units::s_from_us(get(p, "cycle_interval_us", "plan", units::us_from_s(cfg.plan.cycle_interval)));
    cfg.plan.extra_window = units::s_from_us(get(p, "extra_window_us", "plan", units::us_from_s(cfg.plan.extra_window)));
  }
  cfg.event_rate = get(root, "event_rate_hz", "config", cfg.event_rate);
  if (root.contains("energy_distribution")) {
    cfg.energy = EnergyDistribution::parse(get<std::string>(root, "energy_distribution", "config", ""));
  }
  cfg.n_datasets = get(root, "n_datasets", "config", cfg.n_datasets);
  cfg.dataset_duration = get(root, "dataset_duration_s", "config", cfg.dataset_duration);
  cfg.seed = get(root, "seed", "config", cfg.seed);
  cfg.output_dir = get<std::string>(root, "output_dir", "config", cfg.output_dir.string());

  if (!(cfg.dataset_duration > 0.0) || !(cfg.plan.cycle_interval > 0.0)) {
    throw ConfigError("dataset_duration and cycle_interval must be positive");
  }
  cfg.plan.n_cycles = std::max<std::int64_t>(
      1, static_cast<std::int64_t>(std::llround(cfg.dataset_duration / cfg.plan.cycle_interval)));
  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const fs::path& path) { return parse_run_config(read_file(path), path.string()); }

void write_file_atomic(const fs::path& path, const std::string& contents) {
  const fs::path tmp = path.string() + ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) {
      std::error_code ec;
      fs::remove(tmp, ec);
      throw IoError("write failed for " + tmp.string());
    }
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw IoError("cannot rename " + tmp.string() + " to " + path.string());
  }
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("read failed for " + path.string());
  return ss.str();
}

fs::path events_sidecar_path(const fs::path& dataset_path) {
  fs::path p = dataset_path;
  p.replace_extension();
  return p.string() + ".events.csv";
}

std::string format_dataset(const Dataset& ds) {
  const auto& plan = ds.plan();
  json meta;
  meta["n_qubits"] = ds.n_qubits();
  meta["cycle_interval_us"] = units::us_from_s(plan.cycle_interval);
  std::vector<double> st;
  for (double t : plan.sampling_times) st.push_back(units::us_from_s(t));
  meta["sampling_times_us"] = st;
  meta["prep_state"] = plan.prep_state == PrepState::One ? "one" : "zero";
  meta["seed"] = ds.seed;
  meta["extra_window_us"] = units::us_from_s(plan.extra_window);
  meta["n_cycles"] = plan.n_cycles;

  const std::size_t nq = ds.n_qubits();
  fmt::memory_buffer buf;
  buf.reserve(ds.n_records() * (24 + 2 * nq));
  fmt::format_to(std::back_inserter(buf), "{}\n# {}\ncycle,slot,time_s", kDatasetMagic, meta.dump());
  for (std::size_t q = 0; q < nq; ++q) fmt::format_to(std::back_inserter(buf), ",b{}", q);
  buf.push_back('\n');
  const auto bits = ds.bits();
  for (std::size_t i = 0; i < ds.n_records(); ++i) {
    const auto r = ds.record(i);
    fmt::format_to(std::back_inserter(buf), "{},{},{:.12f}", r.cycle_index, r.sampling_time_index, r.wall_time);
    for (std::size_t q = 0; q < nq; ++q) {
      buf.push_back(',');
      buf.push_back(bits[i * nq + q] ? '1' : '0');
    }
    buf.push_back('\n');
  }
  return fmt::to_string(buf);
}

void write_dataset(const fs::path& path, const Dataset& ds) {
  write_file_atomic(path, format_dataset(ds));
  if (ds.has_ground_truth) write_file_atomic(events_sidecar_path(path), format_events(ds.ground_truth));
}

Dataset parse_dataset(const std::string& text, const DeviceConfig& device, const std::string& source) {
  const auto lines = split_lines(text);
  if (lines.empty() || lines[0] != kDatasetMagic) {
    throw ParseError(source, 1, 1, "missing '# qpburst-dataset v1' header");
  }
  if (lines.size() < 3 || lines[1].substr(0, 2) != "# ") {
    throw ParseError(source, 2, 1, "missing metadata line");
  }
  json meta;
  try {
    meta = json::parse(lines[1].substr(2));
  } catch (const json::parse_error& e) {
    throw ParseError(source, 2, 3 + (e.byte == 0 ? 0 : e.byte - 1), "malformed metadata");
  }
  SamplingPlan plan;
  std::size_t nq = 0;
  std::uint64_t seed = 0;
  try {
    check_keys(meta, "metadata", {"n_qubits", "cycle_interval_us", "sampling_times_us", "prep_state", "seed",
                                  "extra_window_us", "n_cycles"});
    nq = meta.at("n_qubits").get<std::size_t>();
    plan.cycle_interval = units::s_from_us(meta.at("cycle_interval_us").get<double>());
    plan.sampling_times.clear();
    for (double v : meta.at("sampling_times_us").get<std::vector<double>>()) plan.sampling_times.push_back(units::s_from_us(v));
    const auto prep = meta.at("prep_state").get<std::string>();
    if (prep != "one" && prep != "zero") throw ConfigError("prep_state must be 'one' or 'zero'");
    plan.prep_state = prep == "one" ? PrepState::One : PrepState::Zero;
    seed = meta.at("seed").get<std::uint64_t>();
    plan.extra_window = units::s_from_us(meta.value("extra_window_us", units::us_from_s(kDefaultExtraWindow)));
    plan.n_cycles = meta.value("n_cycles", std::int64_t{1});
    plan.validate();
  } catch (const json::exception& e) {
    throw ParseError(source, 2, 3, std::string("bad metadata: ") + e.what());
  } catch (const ConfigError& e) {
    throw ParseError(source, 2, 3, std::string("bad metadata: ") + e.what());
  }
  if (nq != device.n_qubits()) {
    throw ParseError(source, 2, 3,
                     "dataset has " + std::to_string(nq) + " qubits, device has " +
                         std::to_string(device.n_qubits()));
  }

  std::string expected_header = "cycle,slot,time_s";
  for (std::size_t q = 0; q < nq; ++q) expected_header += ",b" + std::to_string(q);
  if (lines[2] != expected_header) throw ParseError(source, 3, 1, "unexpected column header");

  Dataset ds(device, plan);
  ds.seed = seed;
  ds.reserve(lines.size() - 3);
  std::vector<std::uint8_t> bits(nq);
  for (std::size_t li = 3; li < lines.size(); ++li) {
    if (lines[li].empty()) continue;
    LineReader rd{lines[li], 0, li + 1, source};
    const auto cycle = rd.number<std::int64_t>();
    const auto slot = rd.number<std::size_t>();
    const auto time = rd.number<double>();
    for (std::size_t q = 0; q < nq; ++q) {
      const std::size_t at = rd.pos;
      const auto f = rd.field();
      if (f != "0" && f != "1") {
        rd.pos = at;
        rd.fail("bit must be 0 or 1");
      }
      bits[q] = f == "1" ? 1 : 0;
    }
    rd.expect_end();
    try {
      ds.append(cycle, slot, time, bits);
    } catch (const InvalidInput& e) {
      throw ParseError(source, li + 1, 1, e.what());
    }
  }
  return ds;
}

Dataset read_dataset(const fs::path& path, const DeviceConfig& device) {
  Dataset ds = parse_dataset(read_file(path), device, path.string());
  const auto sidecar = events_sidecar_path(path);
  if (fs::exists(sidecar)) {
    ds.ground_truth = parse_events(read_file(sidecar), sidecar.string());
    ds.has_ground_truth = true;
  }
  return ds;
}

std::string format_events(std::span<const ImpactEvent> events) {
  std::string out = "t_s,x_mm,y_mm,energy_ev,kind\n";
  for (const auto& e : events) {
    out += fmt::format("{},{},{},{},{}\n", fmt_double(e.t_impact), fmt_double(e.location.x),
                       fmt_double(e.location.y), fmt_double(e.deposited_energy), to_string(e.kind));
  }
  return out;
}

std::vector<ImpactEvent> parse_events(const std::string& text, const std::string& source) {
  const auto lines = split_lines(text);
  if (lines.empty() || lines[0] != "t_s,x_mm,y_mm,energy_ev,kind") {
    throw ParseError(source, 1, 1, "expected header 't_s,x_mm,y_mm,energy_ev,kind'");
  }
  std::vector<ImpactEvent> events;
  for (std::size_t li = 1; li < lines.size(); ++li) {
    if (lines[li].empty()) continue;
    LineReader rd{lines[li], 0, li + 1, source};
    ImpactEvent e;
    e.t_impact = rd.number<double>();
    e.location.x = rd.number<double>();
    e.location.y = rd.number<double>();
    e.deposited_energy = rd.number<double>();
    const std::size_t at = rd.pos;
    const auto kind = rd.field();
    try {
      e.kind = event_kind_from_string(std::string(kind));
    } catch (const InvalidInput& ex) {
      rd.pos = at;
      rd.fail(ex.what());
    }
    rd.expect_end();
    events.push_back(e);
  }
  return events;
}

std::string format_peaks(std::span<const PeakRow> rows) {
  std::string out = "dataset_id,t0_s,tau_ms,height,baseline,residual_rms,converged\n";
  for (const auto& r : rows) {
    out += fmt::format("{},{:.9f},{:.6f},{:.6f},{:.6f},{:.6f},{}\n", r.dataset_id, r.fit.t0,
                       r.fit.tau_decay * 1e3, r.fit.height, r.fit.baseline_c, r.fit.residual_rms,
                       r.fit.converged ? 1 : 0);
  }
  return out;
}

std::string format_intervals(std::span<const double> intervals) {
  std::string out = "interval_s\n";
  for (double v : intervals) out += fmt::format("{:.9f}\n", v);
  return out;
}

std::string format_histogram(const HistogramComparison& h, const CountDistribution& model) {
  std::string out = "count,observed,model\n";
  for (std::size_t k = 0; k < model.pmf.size(); ++k) {
    out += fmt::format("{},{:.12g},{:.12g}\n", k, h.observed[k], model.pmf[k]);
  }
  return out;
}

std::string format_heatmap(const Heatmap& h) {
  std::string out = "row,col,rate\n";
  for (int r = 0; r < h.rows; ++r) {
    for (int c = 0; c < h.cols; ++c) {
      const double v = h.grid[static_cast<std::size_t>(r * h.cols + c)];
      if (std::isnan(v)) continue;
      out += fmt::format("{},{},{:.9f}\n", r + h.min_row, c + h.min_col, v);
    }
  }
  return out;
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw IoError("SHA-256 computation failed");
  }
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", digest[i]);
  return hex;
}

std::string format_manifest(const fs::path& dir, const std::vector<fs::path>& files) {
  std::vector<std::pair<std::string, fs::path>> named;
  for (const auto& f : files) named.emplace_back(fs::relative(f, dir).generic_string(), f);
  std::sort(named.begin(), named.end());
  std::string out;
  for (const auto& [name, path] : named) out += sha256_hex(read_file(path)) + "  " + name + "\n";
  return out;
}

}  // namespace qpburst::io
