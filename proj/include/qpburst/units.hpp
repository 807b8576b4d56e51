#pragma once

#include <cmath>
#include <numbers>

// Internal unit system: energies in eV, times in s, lengths in m unless a name
// says otherwise (_mm, _um), densities n_cp in um^-3.
namespace qpburst::units {

inline constexpr double kHbarEvS = 6.582e-16;
inline constexpr double kPi = std::numbers::pi;

inline constexpr double kMeV = 1e-3;   // milli-eV in eV
inline constexpr double kKeV = 1e3;
inline constexpr double kMegaEV = 1e6;

inline constexpr double kUs = 1e-6;
inline constexpr double kNs = 1e-9;
inline constexpr double kPs = 1e-12;
inline constexpr double kMs = 1e-3;

inline constexpr double kMm = 1e-3;
inline constexpr double kUm = 1e-6;
inline constexpr double kNm = 1e-9;

inline constexpr double kMm2 = 1e-6;        // mm^2 in m^2
inline constexpr double kUm3PerM3 = 1e18;   // um^3 per m^3

/// Microsecond conversions for text formats. Writing rounds to the picosecond
/// and reading divides, so round values survive a write-read cycle exactly.
inline double us_from_s(double s) { return std::round(s * 1e12) / 1e6; }
inline constexpr double s_from_us(double us) { return us / 1e6; }

inline constexpr double angular_from_ghz(double f_ghz) { return 2.0 * kPi * f_ghz * 1e9; }

}  // namespace qpburst::units
