#include "qpburst/device.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <string>

#include "qpburst/errors.hpp"
#include "qpburst/units.hpp"

namespace qpburst {

namespace {

void check_probability(double p, const char* what) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw InvalidParameter(std::string(what) + " must lie in [0, 1], got " + std::to_string(p));
  }
}

}  // namespace

DeviceConfig DeviceConfig::make(std::vector<QubitSpec> qubits, ChipExtent chip,
                                double qubit_pitch_mm, double omega_q) {
  if (qubits.empty()) throw InvalidParameter("device needs at least one qubit");
  if (!(omega_q > 0.0)) throw InvalidParameter("omega_q must be positive");
  if (!(chip.width_mm > 0.0 && chip.height_mm > 0.0)) {
    throw InvalidParameter("chip extent must be positive");
  }
  if (!(qubit_pitch_mm > 0.0)) throw InvalidParameter("qubit pitch must be positive");

  std::set<int> ids;
  for (const auto& q : qubits) {
    if (!ids.insert(q.id).second) {
      throw InvalidParameter("duplicate qubit id " + std::to_string(q.id));
    }
    if (!(q.t1_baseline > 0.0)) {
      throw InvalidParameter("qubit " + std::to_string(q.id) + ": t1 must be positive");
    }
    if (!(q.eps_read0_given1 >= 0.0 && q.eps_read0_given1 < 0.5) ||
        !(q.eps_read1_given0 >= 0.0 && q.eps_read1_given0 < 0.5)) {
      throw InvalidParameter("qubit " + std::to_string(q.id) +
                             ": readout error rates must lie in [0, 0.5)");
    }
    if (!chip.contains(q.xy_mm)) {
      throw InvalidParameter("qubit " + std::to_string(q.id) + " lies outside the chip");
    }
  }

  DeviceConfig d;
  d.qubits_ = std::move(qubits);
  d.chip_ = chip;
  d.pitch_mm_ = qubit_pitch_mm;
  d.omega_q_ = omega_q;
  return d;
}

std::vector<Vec2> DeviceConfig::layout(std::span<const GridPos> grid, ChipExtent chip,
                                       double pitch_mm) {
  std::vector<Vec2> out;
  if (grid.empty()) return out;
  auto [rmin, rmax] = std::minmax_element(grid.begin(), grid.end(),
                                          [](auto a, auto b) { return a.row < b.row; });
  auto [cmin, cmax] = std::minmax_element(grid.begin(), grid.end(),
                                          [](auto a, auto b) { return a.col < b.col; });
  const double row_mid = 0.5 * (rmin->row + rmax->row);
  const double col_mid = 0.5 * (cmin->col + cmax->col);
  out.reserve(grid.size());
  for (const auto& g : grid) {
    out.push_back({0.5 * chip.width_mm + (g.col - col_mid) * pitch_mm,
                   0.5 * chip.height_mm + (g.row - row_mid) * pitch_mm});
  }
  return out;
}

DeviceConfig DeviceConfig::default_device() {
  constexpr int kRows = 5;
  constexpr int kCols = 6;
  std::vector<GridPos> grid;
  for (int r = 0; r < kRows; ++r) {
    for (int c = 0; c < kCols; ++c) {
      const bool corner = (r == 0 || r == kRows - 1) && (c == 0 || c == kCols - 1);
      if (!corner) grid.push_back({r, c});
    }
  }
  const ChipExtent chip{10.0, 10.0};
  const double pitch = 1.0;
  const auto xy = layout(grid, chip, pitch);
  std::vector<QubitSpec> qubits;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    QubitSpec q;
    q.id = static_cast<int>(i);
    q.grid_pos = grid[i];
    q.xy_mm = xy[i];
    qubits.push_back(q);
  }
  return make(std::move(qubits), chip, pitch, units::angular_from_ghz(6.0));
}

int DeviceConfig::min_row() const {
  int m = std::numeric_limits<int>::max();
  for (const auto& q : qubits_) m = std::min(m, q.grid_pos.row);
  return m;
}

int DeviceConfig::min_col() const {
  int m = std::numeric_limits<int>::max();
  for (const auto& q : qubits_) m = std::min(m, q.grid_pos.col);
  return m;
}

int DeviceConfig::grid_rows() const {
  int m = std::numeric_limits<int>::min();
  for (const auto& q : qubits_) m = std::max(m, q.grid_pos.row);
  return m - min_row() + 1;
}

int DeviceConfig::grid_cols() const {
  int m = std::numeric_limits<int>::min();
  for (const auto& q : qubits_) m = std::max(m, q.grid_pos.col);
  return m - min_col() + 1;
}

std::size_t DeviceConfig::nearest_qubit(Vec2 p) const {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < qubits_.size(); ++i) {
    const double d = distance_sq(qubits_[i].xy_mm, p);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

double decay_error_probability(double t1, double t_sampling, double extra_window) {
  if (!(t1 > 0.0)) throw InvalidParameter("t1 must be positive");
  if (!(t_sampling >= 0.0) || !(extra_window >= 0.0)) {
    throw InvalidParameter("sampling time and extra window must be non-negative");
  }
  return -std::expm1(-(t_sampling + extra_window) / t1);
}

double observed_error_probability(double p_decay, const QubitSpec& qubit, PrepState prep) {
  check_probability(p_decay, "p_decay");
  check_probability(qubit.eps_read0_given1, "eps_read0_given1");
  check_probability(qubit.eps_read1_given0, "eps_read1_given0");
  if (prep == PrepState::Zero) return qubit.eps_read1_given0;
  return p_decay * (1.0 - qubit.eps_read1_given0) + (1.0 - p_decay) * qubit.eps_read0_given1;
}

}  // namespace qpburst
