#include "qpburst/cascade.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <string>

#include "qpburst/errors.hpp"
#include "qpburst/units.hpp"

namespace qpburst::cascade {

using namespace qpburst::units;

namespace {

// Numeric approximation of the recombination prefactor: 1/tau_r = x_qp * 21.8 / tau0.
constexpr double kRecombinationPrefactor = 21.8;

void require_positive(double v, const char* what) {
  if (!(v > 0.0)) throw InvalidParameter(std::string(what) + " must be positive");
}

std::string format_energy_label(double e) {
  char buf[64];
  if (e >= 1.0) {
    std::snprintf(buf, sizeof buf, "%.4g eV", e);
  } else {
    std::snprintf(buf, sizeof buf, "%.4g meV", e / kMeV);
  }
  return buf;
}

}  // namespace

void MaterialParams::validate(bool allow_bulk) const {
  require_positive(gap_delta, "gap_delta");
  require_positive(n_cp, "n_cp");
  require_positive(tau0_ph, "tau0_ph");
  require_positive(tau0_qp, "tau0_qp");
  require_positive(sound_speed, "sound_speed");
  if (!(allow_bulk && thickness == 0.0)) require_positive(thickness, "thickness");
}

MaterialParams MaterialParams::aluminum() {
  return {"aluminum", 0.18 * kMeV, 4e6, 0.24 * kNs, 440 * kNs, 6400.0, 100 * kNm};
}

MaterialParams MaterialParams::indium() {
  return {"indium", 0.52 * kMeV, 13e6, 0.799 * kNs, 0.799 * kNs, 1200.0, 5 * kUm};
}

MaterialParams MaterialParams::indium_near_gap() {
  auto m = indium();
  m.name = "indium (near gap)";
  m.tau0_ph = 170 * kPs;
  return m;
}

MaterialParams MaterialParams::preset(std::string_view name) {
  std::string key(name);
  std::transform(key.begin(), key.end(), key.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (key == "al" || key == "aluminum" || key == "aluminium") return aluminum();
  if (key == "in" || key == "indium") return indium();
  throw InvalidParameter("unknown material preset '" + std::string(name) + "'");
}

void SubstrateParams::validate() const {
  require_positive(debye_energy, "debye_energy");
  require_positive(pair_creation_energy, "pair_creation_energy");
  if (!(anharmonicity_g > 0.0 && anharmonicity_g < 1.0)) {
    throw InvalidParameter("anharmonicity_g must lie in (0, 1)");
  }
  if (!(phonon_fraction >= 0.0 && phonon_fraction <= 1.0)) {
    throw InvalidParameter("phonon_fraction must lie in [0, 1]");
  }
}

double phonon_downconversion_rate(double e_ph, const SubstrateParams& substrate) {
  require_positive(e_ph, "phonon energy");
  substrate.validate();
  const double ratio = e_ph / substrate.debye_energy;
  const double r2 = ratio * ratio;
  return substrate.anharmonicity_g * (e_ph / kHbarEvS) * r2 * r2;
}

double pair_breaking_time(double e_ph, const MaterialParams& m) {
  m.validate(/*allow_bulk=*/true);
  // Tolerate one rounding step so that E = 2 Delta written in other units passes.
  if (!(e_ph >= 2.0 * m.gap_delta * (1.0 - 1e-12))) {
    throw BelowGap("phonon energy " + format_energy_label(e_ph) +
                   " is below 2*Delta = " + format_energy_label(2.0 * m.gap_delta));
  }
  return std::min(m.tau0_ph, kPi * m.tau0_ph * m.gap_delta / e_ph);
}

double phonon_absorption_length(double e_ph, const MaterialParams& m) {
  return m.sound_speed * pair_breaking_time(e_ph, m);
}

double volume_qp_density(double e_hotspot, double volume_um3, const MaterialParams& m) {
  if (!(e_hotspot >= 0.0)) throw InvalidParameter("hotspot energy must be non-negative");
  require_positive(volume_um3, "volume");
  require_positive(m.gap_delta, "gap_delta");
  require_positive(m.n_cp, "n_cp");
  return e_hotspot / (volume_um3 * m.gap_delta * m.n_cp);
}

double hotspot_qp_density(double e_hotspot, double area, const MaterialParams& m) {
  require_positive(area, "area");
  require_positive(m.thickness, "thickness");
  return volume_qp_density(e_hotspot, area * m.thickness * kUm3PerM3, m);
}

double recombination_time(double x_qp, const MaterialParams& m) {
  require_positive(x_qp, "x_qp");
  require_positive(m.tau0_qp, "tau0_qp");
  return m.tau0_qp / (kRecombinationPrefactor * x_qp);
}

double effective_indium_recombination(double tau_r, double bump_height, double absorption_length) {
  require_positive(tau_r, "tau_r");
  require_positive(bump_height, "bump height");
  require_positive(absorption_length, "absorption length");
  return tau_r * bump_height / absorption_length;
}

double relaxation_rate_per_x_qp(double omega_q, const MaterialParams& m) {
  require_positive(omega_q, "omega_q");
  require_positive(m.gap_delta, "gap_delta");
  return omega_q * std::sqrt(2.0 * m.gap_delta / (kPi * kPi * kHbarEvS * omega_q));
}

double qubit_relaxation_rate(double x_qp, double omega_q, const MaterialParams& m) {
  if (!(x_qp >= 0.0)) throw InvalidParameter("x_qp must be non-negative");
  return relaxation_rate_per_x_qp(omega_q, m) * x_qp;
}

double x_qp_from_t1(double t1, double omega_q, const MaterialParams& m) {
  require_positive(t1, "t1");
  return 1.0 / (t1 * relaxation_rate_per_x_qp(omega_q, m));
}

double energy_for_uniform_density(double n_qp, double volume_um3, const MaterialParams& m) {
  if (!(n_qp >= 0.0)) throw InvalidParameter("n_qp must be non-negative");
  require_positive(volume_um3, "volume");
  require_positive(m.gap_delta, "gap_delta");
  return n_qp * volume_um3 * m.gap_delta;
}

EventRates event_rates_for_area(double area, double reference_area, double ref_gamma_rate,
                                double ref_muon_rate) {
  require_positive(area, "area");
  require_positive(reference_area, "reference area");
  require_positive(ref_gamma_rate, "reference gamma rate");
  require_positive(ref_muon_rate, "reference muon rate");
  const double scale = area / reference_area;
  return {ref_gamma_rate * scale, ref_muon_rate * scale};
}

std::vector<Quantity> derived_table(const MaterialParams& m, const std::vector<double>& energies,
                                    const SubstrateParams& substrate) {
  std::vector<Quantity> rows;
  for (double e : energies) {
    const auto label = format_energy_label(e);
    rows.push_back({"phonon_downconversion_rate(" + label + ")",
                    phonon_downconversion_rate(e, substrate), "1/s"});
    rows.push_back({"pair_breaking_time(" + label + ")", pair_breaking_time(e, m) / kPs, "ps"});
    rows.push_back(
        {"phonon_absorption_length(" + label + ")", phonon_absorption_length(e, m) / kNm, "nm"});
  }

  // Hotspot in the aluminium layer: 100 keV deposit, phonon_fraction of it
  // absorbed over 10 mm^2.
  const auto al = MaterialParams::aluminum();
  const double e_hs = 100 * kKeV * substrate.phonon_fraction;
  const double x_hs = hotspot_qp_density(e_hs, 10 * kMm2, al);
  rows.push_back({"hotspot_energy", e_hs / kKeV, "keV"});
  rows.push_back({"hotspot_x_qp(Al, 10 mm^2)", x_hs, "1"});
  rows.push_back({"recombination_time(Al hotspot)", recombination_time(x_hs, al) / kUs, "us"});

  // Indium bumps: 50 keV over 15% of the 10 mm^2 hotspot area, 5 um tall.
  const auto in = MaterialParams::indium();
  const double bump_volume_um3 = 0.15 * 10 * 1e6 * 5.0;
  const double x_in = volume_qp_density(50 * kKeV, bump_volume_um3, in);
  const double tau_in = recombination_time(x_in, in);
  const auto in_gap = MaterialParams::indium_near_gap();
  const double l_in = phonon_absorption_length(2.0 * in_gap.gap_delta, in_gap);
  rows.push_back({"indium_x_qp(50 keV)", x_in, "1"});
  rows.push_back({"indium_recombination_time", tau_in / kUs, "us"});
  rows.push_back({"indium_absorption_length(2*Delta_In)", l_in / kNm, "nm"});
  rows.push_back({"indium_effective_recombination",
                  effective_indium_recombination(tau_in, in.thickness, l_in) / kMs, "ms"});

  // Chip-wide consistency check for T1 = 1 us at 6 GHz.
  const double omega = angular_from_ghz(6.0);
  const double x_1us = x_qp_from_t1(1 * kUs, omega, al);
  const double n_qp = x_1us * al.n_cp;
  const double chip_volume_um3 = 10e3 * 10e3 * (al.thickness / kUm);
  rows.push_back({"x_qp_for_T1(1 us)", x_1us, "1"});
  rows.push_back({"n_qp_for_T1(1 us)", n_qp, "1/um^3"});
  rows.push_back({"energy_for_uniform_density(chip)",
                  energy_for_uniform_density(n_qp, chip_volume_um3, al) / kKeV, "keV"});

  // Rates scaled from a 40 mm^2 reference sample to the 20 mm x 26 mm carrier.
  const auto rates = event_rates_for_area(20.0 * 26.0, 40.0, 1.0 / 100.0, 1.0 / 500.0);
  rows.push_back({"gamma_event_interval", 1.0 / rates.gamma_rate, "s"});
  rows.push_back({"muon_event_interval", 1.0 / rates.muon_rate, "s"});
  rows.push_back({"total_event_interval", 1.0 / rates.total(), "s"});
  return rows;
}

}  // namespace qpburst::cascade
