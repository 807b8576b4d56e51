#pragma once

#include <string>
#include <string_view>
#include <vector>

// Closed-form energy cascade following an impact: phonon downconversion in the
// substrate, pair breaking and absorption in the superconductor, hotspot
// quasiparticle density, recombination, and the resulting qubit relaxation.
namespace qpburst::cascade {

struct MaterialParams {
  std::string name;
  double gap_delta = 0.0;    // eV
  double n_cp = 0.0;         // Cooper pairs per um^3
  double tau0_ph = 0.0;      // s, characteristic phonon lifetime
  double tau0_qp = 0.0;      // s, characteristic quasiparticle time
  double sound_speed = 0.0;  // m/s
  double thickness = 0.0;    // m; zero when only bulk quantities are needed

  /// Throws InvalidParameter unless every field is strictly positive
  /// (thickness may be zero when allow_bulk is set).
  void validate(bool allow_bulk = false) const;

  /// Al film: Delta = 0.18 meV, n_cp = 4e6 um^-3, tau0_ph = 0.24 ns,
  /// tau0 = 440 ns, c = 6.4 km/s, d = 100 nm.
  static MaterialParams aluminum();
  /// In bump bonds: Delta = 0.52 meV, n_cp = 13e6 um^-3, tau0_ph = tau0 =
  /// 0.799 ns, c = 1.2 km/s, bump height 5 um.
  static MaterialParams indium();
  /// Indium with the 170 ps phonon lifetime quoted at E = 2 Delta_In, used for
  /// the near-gap absorption length.
  static MaterialParams indium_near_gap();
  /// "al" | "aluminum" | "in" | "indium"; throws InvalidParameter otherwise.
  static MaterialParams preset(std::string_view name);
};

struct SubstrateParams {
  double debye_energy = 56e-3;         // eV, hbar*omega_D
  double anharmonicity_g = 0.01;
  double pair_creation_energy = 3.75;  // eV per electron-hole pair
  double phonon_fraction = 0.8;        // share of the deposit reaching the hotspot

  void validate() const;

  static SubstrateParams silicon() { return {}; }
};

/// g (E/hbar) (E/hbar omega_D)^4, in 1/s.
double phonon_downconversion_rate(double e_ph, const SubstrateParams& substrate);

/// min(tau0_ph, pi tau0_ph Delta / E): the near-gap constant joined to the
/// high-energy 1/E law. Throws BelowGap for E < 2 Delta.
double pair_breaking_time(double e_ph, const MaterialParams& m);

/// sound_speed * pair_breaking_time, in m.
double phonon_absorption_length(double e_ph, const MaterialParams& m);

/// x_qp = E / (A d Delta n_cp) for a hotspot of area A (m^2) in a film of
/// thickness m.thickness.
double hotspot_qp_density(double e_hotspot, double area, const MaterialParams& m);

/// Same as hotspot_qp_density for an explicit volume in um^3.
double volume_qp_density(double e_hotspot, double volume_um3, const MaterialParams& m);

/// tau_r = tau0 / (21.8 x_qp).
double recombination_time(double x_qp, const MaterialParams& m);

/// tau_r z / l: only recombination within one absorption length of the bump
/// surface radiates out.
double effective_indium_recombination(double tau_r, double bump_height, double absorption_length);

/// Gamma_1 = omega_q sqrt(2 Delta / (pi^2 hbar omega_q)) x_qp, in 1/s.
double qubit_relaxation_rate(double x_qp, double omega_q, const MaterialParams& m);

/// Inverse of qubit_relaxation_rate for Gamma_1 = 1/t1.
double x_qp_from_t1(double t1, double omega_q, const MaterialParams& m);

/// Proportionality constant Gamma_1 / x_qp.
double relaxation_rate_per_x_qp(double omega_q, const MaterialParams& m);

/// E = n_qp V Delta, with n_qp in um^-3 and V in um^3.
double energy_for_uniform_density(double n_qp, double volume_um3, const MaterialParams& m);

struct EventRates {
  double gamma_rate = 0.0;  // 1/s
  double muon_rate = 0.0;   // 1/s
  double total() const { return gamma_rate + muon_rate; }
};

/// Scales reference gamma and muon rates linearly with exposed area.
EventRates event_rates_for_area(double area, double reference_area, double ref_gamma_rate,
                                double ref_muon_rate);

struct Quantity {
  std::string name;
  double value = 0.0;
  std::string unit;
};

/// All derived quantities for a material and a list of phonon energies, in the
/// order printed by the `cascade` subcommand. The table always includes the
/// hotspot, indium-bump, T1 = 1 us chip-wide, and area-scaled rate rows.
std::vector<Quantity> derived_table(const MaterialParams& m, const std::vector<double>& energies,
                                    const SubstrateParams& substrate = SubstrateParams::silicon());

}  // namespace qpburst::cascade
