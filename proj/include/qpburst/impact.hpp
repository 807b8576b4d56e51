#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "qpburst/cascade.hpp"
#include "qpburst/device.hpp"

namespace qpburst {

enum class EventKind { Gamma, Muon };

const char* to_string(EventKind kind);
EventKind event_kind_from_string(const std::string& s);

struct ImpactEvent {
  double t_impact = 0.0;          // s
  Vec2 location;                  // mm
  double deposited_energy = 0.0;  // eV
  EventKind kind = EventKind::Gamma;
};

/// Separable footprint: rise x Gaussian spread x exponential decay.
struct EventProfileParams {
  double sigma0_mm = 1.8;      // initial hotspot radius, about 10 mm^2
  double sigma_chip_mm = 4.0;  // asymptotic radius after the spread
  double tau_rise = 5e-6;
  double tau_spread = 180e-6;
  double tau_decay = 25e-3;
  double x_qp_peak_scale = 1.0;

  /// Positive durations ordered rise < spread < decay, sigma0 <= sigma_chip.
  void validate() const;

  /// Gaussian variance in mm^2 at dt after the impact.
  double sigma_sq(double dt) const;
};

/// Everything needed to turn an ImpactEvent into quasiparticle density.
struct FootprintModel {
  EventProfileParams profile;
  cascade::MaterialParams material = cascade::MaterialParams::aluminum();
  double phonon_fraction = 0.8;
  ChipExtent chip;

  void validate() const;
};

/// Events older than this many decay constants are treated as gone.
inline constexpr double kEventCutoffDecays = 40.0;

/// Event energy law used by sample_events.
struct EnergyDistribution {
  enum class Kind { LogUniform, GammaMuonMixture };
  Kind kind = Kind::LogUniform;
  double e_min = 20e3;  // eV, log-uniform bounds
  double e_max = 1e6;
  double gamma_energy = 100e3;  // eV, mixture atoms
  double muon_energy = 1e6;
  double gamma_rate = 1.0 / 7.69;  // relative weights of the two atoms
  double muon_rate = 1.0 / 38.5;

  void validate() const;

  /// "log-uniform[:EMIN:EMAX]" or "mixture[:GAMMA_EV:MUON_EV]"; the mixture
  /// weights default to the carrier-scaled rates. Throws ConfigError.
  static EnergyDistribution parse(const std::string& text);
  std::string to_string() const;
};

/// Homogeneous Poisson arrivals on [0, duration), uniform positions on the chip.
/// Log-uniform draws are labelled muon above the geometric mean of the two
/// reference energies.
std::vector<ImpactEvent> sample_events(double duration, double rate_lambda,
                                       const EnergyDistribution& energy_dist, std::uint64_t seed,
                                       ChipExtent chip = {});

/// Chip-truncated area of the Gaussian footprint, 2 pi sigma^2 Phi_x Phi_y, in mm^2.
double effective_footprint_area_mm2(Vec2 center, double sigma_sq_mm2, ChipExtent chip);

/// Time-dependent part of one event: x_qp(r, t) = amplitude * exp(-r^2 / (2 sigma_sq)).
struct EventSnapshot {
  double amplitude = 0.0;
  double sigma_sq_mm2 = 1.0;
  bool active = false;
};

EventSnapshot event_snapshot(const ImpactEvent& event, const FootprintModel& model, double t);

/// x_qp at pos and wall time t; zero before the impact and past the cutoff.
double qp_density_at(const ImpactEvent& event, const FootprintModel& model, Vec2 pos, double t);

/// Row-major [time][qubit] table.
struct T1Table {
  std::size_t n_times = 0;
  std::size_t n_qubits = 0;
  std::vector<double> data;
  double at(std::size_t it, std::size_t q) const { return data[it * n_qubits + q]; }
};

/// T1 per qubit and time with event rates added on top of the baseline rate.
/// times must be ascending.
T1Table t1_trajectory(const DeviceConfig& device, std::span<const ImpactEvent> events,
                      const FootprintModel& model, std::span<const double> times);

/// Energy of a chip-centred, spatially uniform event whose R*D maximum drives
/// every qubit to the given T1 floor. The model's profile should be flat over
/// the chip (sigma0 = sigma_chip >> chip size); see uniform_floor_model.
double energy_for_t1_floor(double t1_floor, const DeviceConfig& device, const FootprintModel& model);

/// Profile whose footprint is flat across the chip, for floor injection.
FootprintModel uniform_floor_model(const FootprintModel& base);

/// Time after impact at which R(t) D(t) peaks: tau_r ln(1 + tau_d / tau_r).
double rise_decay_peak_time(const EventProfileParams& profile);

}  // namespace qpburst
