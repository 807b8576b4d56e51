#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace qpburst {

struct GridPos {
  int row = 0;
  int col = 0;
  friend bool operator==(const GridPos&, const GridPos&) = default;
};

/// Position on the chip in millimetres, origin at the lower-left chip corner.
struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

inline double distance_sq(Vec2 a, Vec2 b) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  return dx * dx + dy * dy;
}

enum class PrepState { One, Zero };

struct QubitSpec {
  int id = 0;
  GridPos grid_pos;
  Vec2 xy_mm;
  double t1_baseline = 15e-6;       // s
  double eps_read0_given1 = 0.02;   // measure |0> although the state is |1>
  double eps_read1_given0 = 0.005;  // measure |1> although the state is |0>
};

struct ChipExtent {
  double width_mm = 10.0;
  double height_mm = 10.0;
  bool contains(Vec2 p) const {
    return p.x >= 0.0 && p.x <= width_mm && p.y >= 0.0 && p.y <= height_mm;
  }
  double area_mm2() const { return width_mm * height_mm; }
};

/// The detector under simulation. Immutable once built through make().
class DeviceConfig {
 public:
  /// Validates every invariant and throws InvalidParameter on violation.
  static DeviceConfig make(std::vector<QubitSpec> qubits, ChipExtent chip, double qubit_pitch_mm,
                           double omega_q);

  /// 26 qubits on a 6x5 grid with the four corners removed, 1 mm pitch,
  /// centred on a 10 mm x 10 mm chip; homogeneous T1 = 15 us.
  static DeviceConfig default_device();

  /// Places grid positions on the chip: the grid's bounding box is centred on
  /// the chip and spaced by the pitch.
  static std::vector<Vec2> layout(std::span<const GridPos> grid, ChipExtent chip, double pitch_mm);

  std::span<const QubitSpec> qubits() const { return qubits_; }
  const QubitSpec& qubit(std::size_t i) const { return qubits_[i]; }
  std::size_t n_qubits() const { return qubits_.size(); }
  const ChipExtent& chip() const { return chip_; }
  double qubit_pitch_mm() const { return pitch_mm_; }
  double omega_q() const { return omega_q_; }

  int grid_rows() const;
  int grid_cols() const;
  int min_row() const;
  int min_col() const;

  /// Index of the qubit closest to p.
  std::size_t nearest_qubit(Vec2 p) const;

 private:
  DeviceConfig() = default;

  std::vector<QubitSpec> qubits_;
  ChipExtent chip_;
  double pitch_mm_ = 1.0;
  double omega_q_ = 0.0;
};

inline constexpr double kDefaultExtraWindow = 500e-9;

/// 1 - exp(-(t_sampling + extra_window) / t1).
double decay_error_probability(double t1, double t_sampling, double extra_window = kDefaultExtraWindow);

/// Probability that a single shot is recorded as an error.
///   prep One  (error = read |0>):
///     p_decay (1 - eps_read1_given0) + (1 - p_decay) eps_read0_given1
///   prep Zero (error = read |1>): eps_read1_given0, independent of p_decay
double observed_error_probability(double p_decay, const QubitSpec& qubit, PrepState prep);

}  // namespace qpburst
