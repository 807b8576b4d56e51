#include "qpburst/impact.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

#include "qpburst/errors.hpp"
#include "qpburst/kernels.hpp"
#include "qpburst/rng.hpp"
#include "qpburst/units.hpp"

namespace qpburst {

namespace {

constexpr double kUm2PerMm2 = 1e6;

// Fraction of a 1-D Gaussian centred at c with std s that lies in [0, L].
double truncated_mass(double c, double s, double length) {
  const double k = 1.0 / (std::sqrt(2.0) * s);
  return 0.5 * (std::erf((length - c) * k) - std::erf(-c * k));
}

double parse_double(const std::string& tok, const std::string& ctx) {
  try {
    std::size_t used = 0;
    const double v = std::stod(tok, &used);
    if (used != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("energy distribution '" + ctx + "': bad number '" + tok + "'");
  }
}

}  // namespace

const char* to_string(EventKind kind) { return kind == EventKind::Gamma ? "gamma" : "muon"; }

EventKind event_kind_from_string(const std::string& s) {
  if (s == "gamma") return EventKind::Gamma;
  if (s == "muon") return EventKind::Muon;
  throw InvalidInput("unknown event kind '" + s + "'");
}

void EventProfileParams::validate() const {
  if (!(tau_rise > 0.0 && tau_spread > 0.0 && tau_decay > 0.0)) {
    throw InvalidParameter("profile durations must be positive");
  }
  if (!(tau_rise < tau_spread && tau_spread < tau_decay)) {
    throw InvalidParameter("profile needs tau_rise < tau_spread < tau_decay");
  }
  if (!(sigma0_mm > 0.0) || !(sigma_chip_mm >= sigma0_mm)) {
    throw InvalidParameter("profile needs 0 < sigma0 <= sigma_chip");
  }
  if (!(x_qp_peak_scale >= 0.0)) throw InvalidParameter("x_qp_peak_scale must be non-negative");
}

double EventProfileParams::sigma_sq(double dt) const {
  const double s0 = sigma0_mm * sigma0_mm;
  const double s1 = sigma_chip_mm * sigma_chip_mm;
  return s0 + (s1 - s0) * -std::expm1(-dt / tau_spread);
}

void FootprintModel::validate() const {
  profile.validate();
  material.validate();
  if (!(phonon_fraction >= 0.0 && phonon_fraction <= 1.0)) {
    throw InvalidParameter("phonon_fraction must lie in [0, 1]");
  }
  if (!(chip.width_mm > 0.0 && chip.height_mm > 0.0)) {
    throw InvalidParameter("chip extent must be positive");
  }
}

void EnergyDistribution::validate() const {
  if (kind == Kind::LogUniform) {
    if (!(e_min > 0.0 && e_max >= e_min)) {
      throw ConfigError("log-uniform energies need 0 < e_min <= e_max");
    }
  } else {
    if (!(gamma_energy > 0.0 && muon_energy > 0.0)) {
      throw ConfigError("mixture energies must be positive");
    }
    if (!(gamma_rate >= 0.0 && muon_rate >= 0.0 && gamma_rate + muon_rate > 0.0)) {
      throw ConfigError("mixture weights must be non-negative and not both zero");
    }
  }
}

EnergyDistribution EnergyDistribution::parse(const std::string& text) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  for (std::string tok; std::getline(ss, tok, ':');) parts.push_back(tok);
  if (parts.empty()) throw ConfigError("empty energy distribution");

  EnergyDistribution d;
  if (parts[0] == "log-uniform" || parts[0] == "loguniform") {
    d.kind = Kind::LogUniform;
    if (parts.size() == 3) {
      d.e_min = parse_double(parts[1], text);
      d.e_max = parse_double(parts[2], text);
    } else if (parts.size() != 1) {
      throw ConfigError("expected log-uniform[:EMIN:EMAX], got '" + text + "'");
    }
  } else if (parts[0] == "mixture") {
    d.kind = Kind::GammaMuonMixture;
    const auto rates = cascade::event_rates_for_area(20.0 * 26.0, 40.0, 1.0 / 100.0, 1.0 / 500.0);
    d.gamma_rate = rates.gamma_rate;
    d.muon_rate = rates.muon_rate;
    if (parts.size() == 3) {
      d.gamma_energy = parse_double(parts[1], text);
      d.muon_energy = parse_double(parts[2], text);
    } else if (parts.size() != 1) {
      throw ConfigError("expected mixture[:GAMMA_EV:MUON_EV], got '" + text + "'");
    }
  } else {
    throw ConfigError("unknown energy distribution '" + parts[0] + "'");
  }
  d.validate();
  return d;
}

std::string EnergyDistribution::to_string() const {
  std::ostringstream os;
  os.precision(17);
  if (kind == Kind::LogUniform) {
    os << "log-uniform:" << e_min << ':' << e_max;
  } else {
    os << "mixture:" << gamma_energy << ':' << muon_energy;
  }
  return os.str();
}

std::vector<ImpactEvent> sample_events(double duration, double rate_lambda,
                                       const EnergyDistribution& energy_dist, std::uint64_t seed,
                                       ChipExtent chip) {
  if (!(duration > 0.0)) throw InvalidParameter("duration must be positive");
  if (!(rate_lambda >= 0.0)) throw InvalidParameter("event rate must be non-negative");
  energy_dist.validate();

  std::vector<ImpactEvent> events;
  if (rate_lambda == 0.0) return events;

  Rng rng(seed);
  const double kind_split = std::sqrt(energy_dist.gamma_energy * energy_dist.muon_energy);
  const double p_gamma =
      energy_dist.gamma_rate / (energy_dist.gamma_rate + energy_dist.muon_rate);
  double t = 0.0;
  for (;;) {
    t += rng.exponential(rate_lambda);
    if (t >= duration) break;
    ImpactEvent e;
    e.t_impact = t;
    e.location = {rng.uniform(0.0, chip.width_mm), rng.uniform(0.0, chip.height_mm)};
    if (energy_dist.kind == EnergyDistribution::Kind::LogUniform) {
      const double lo = std::log(energy_dist.e_min);
      const double hi = std::log(energy_dist.e_max);
      e.deposited_energy = std::exp(rng.uniform(lo, hi));
      e.kind = e.deposited_energy < kind_split ? EventKind::Gamma : EventKind::Muon;
    } else if (rng.bernoulli(p_gamma)) {
      e.deposited_energy = energy_dist.gamma_energy;
      e.kind = EventKind::Gamma;
    } else {
      e.deposited_energy = energy_dist.muon_energy;
      e.kind = EventKind::Muon;
    }
    events.push_back(e);
  }
  return events;
}

double effective_footprint_area_mm2(Vec2 center, double sigma_sq_mm2, ChipExtent chip) {
  const double s = std::sqrt(sigma_sq_mm2);
  return 2.0 * units::kPi * sigma_sq_mm2 * truncated_mass(center.x, s, chip.width_mm) *
         truncated_mass(center.y, s, chip.height_mm);
}

EventSnapshot event_snapshot(const ImpactEvent& event, const FootprintModel& model, double t) {
  EventSnapshot snap;
  const double dt = t - event.t_impact;
  const auto& p = model.profile;
  if (!(dt > 0.0) || dt > kEventCutoffDecays * p.tau_decay) return snap;

  snap.sigma_sq_mm2 = p.sigma_sq(dt);
  const double area_mm2 = effective_footprint_area_mm2(event.location, snap.sigma_sq_mm2, model.chip);
  const double x0 = cascade::volume_qp_density(
      model.phonon_fraction * event.deposited_energy,
      area_mm2 * kUm2PerMm2 * (model.material.thickness / units::kUm), model.material);
  const double rise = -std::expm1(-dt / p.tau_rise);
  const double decay = std::exp(-dt / p.tau_decay);
  snap.amplitude = p.x_qp_peak_scale * x0 * rise * decay;
  snap.active = true;
  return snap;
}

double qp_density_at(const ImpactEvent& event, const FootprintModel& model, Vec2 pos, double t) {
  const auto snap = event_snapshot(event, model, t);
  if (!snap.active) return 0.0;
  return snap.amplitude * std::exp(-distance_sq(pos, event.location) / (2.0 * snap.sigma_sq_mm2));
}

double rise_decay_peak_time(const EventProfileParams& profile) {
  return profile.tau_rise * std::log1p(profile.tau_decay / profile.tau_rise);
}

FootprintModel uniform_floor_model(const FootprintModel& base) {
  FootprintModel m = base;
  const double big = 1000.0 * std::max(base.chip.width_mm, base.chip.height_mm);
  m.profile.sigma0_mm = big;
  m.profile.sigma_chip_mm = big;
  return m;
}

double energy_for_t1_floor(double t1_floor, const DeviceConfig& device, const FootprintModel& model) {
  if (!(t1_floor > 0.0)) throw InvalidParameter("t1 floor must be positive");
  model.validate();
  double base_rate = 0.0;
  for (const auto& q : device.qubits()) base_rate += 1.0 / q.t1_baseline;
  base_rate /= static_cast<double>(device.n_qubits());
  const double extra_rate = 1.0 / t1_floor - base_rate;
  if (!(extra_rate > 0.0)) throw InvalidParameter("t1 floor must lie below the baseline T1");

  const double x_target =
      extra_rate / cascade::relaxation_rate_per_x_qp(device.omega_q(), model.material);
  // x_qp is linear in energy: probe with 1 eV at the R*D maximum, averaged over qubits.
  const Vec2 centre{0.5 * model.chip.width_mm, 0.5 * model.chip.height_mm};
  const ImpactEvent probe{0.0, centre, 1.0, EventKind::Gamma};
  const double t_peak = rise_decay_peak_time(model.profile);
  double x_unit = 0.0;
  for (const auto& q : device.qubits()) x_unit += qp_density_at(probe, model, q.xy_mm, t_peak);
  x_unit /= static_cast<double>(device.n_qubits());
  if (!(x_unit > 0.0)) throw InvalidParameter("footprint model yields no density");
  return x_target / x_unit;
}

T1Table t1_trajectory(const DeviceConfig& device, std::span<const ImpactEvent> events,
                      const FootprintModel& model, std::span<const double> times) {
  if (!std::is_sorted(times.begin(), times.end())) {
    throw InvalidParameter("times must be ascending");
  }
  model.validate();
  std::vector<ImpactEvent> sorted(events.begin(), events.end());
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const ImpactEvent& a, const ImpactEvent& b) { return a.t_impact < b.t_impact; });

  std::vector<Vec2> xy;
  std::vector<double> base;
  for (const auto& q : device.qubits()) {
    xy.push_back(q.xy_mm);
    base.push_back(1.0 / q.t1_baseline);
  }
  T1Table out;
  out.n_times = times.size();
  out.n_qubits = device.n_qubits();
  out.data.resize(times.size() * out.n_qubits);

  kernels::RateGridInput in;
  in.qubit_xy = xy;
  in.baseline_rate = base;
  in.rate_per_x_qp = cascade::relaxation_rate_per_x_qp(device.omega_q(), model.material);
  in.events = sorted;
  in.model = &model;
  in.times = times;
  kernels::rate_grid_parallel(in, out.data);
  for (auto& v : out.data) v = 1.0 / v;
  return out;
}

}  // namespace qpburst
