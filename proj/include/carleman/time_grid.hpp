#ifndef CARLEMAN_TIME_GRID_HPP
#define CARLEMAN_TIME_GRID_HPP

#include <vector>

#include "carleman/grid.hpp"

namespace carleman {

/// Uniform observation window (t0, T) with m steps; m even so T′ = (t0+T)/2 is a node.
class TimeGrid {
 public:
  static TimeGrid build(double t0, double T, int m);

  [[nodiscard]] double t0() const { return t0_; }
  [[nodiscard]] double T() const { return T_; }
  [[nodiscard]] int steps() const { return m_; }
  [[nodiscard]] double dt() const { return dt_; }
  [[nodiscard]] int mid_index() const { return m_ / 2; }
  [[nodiscard]] double mid_time() const { return time(mid_index()); }
  /// t[i]; t[0] = t0 and t[m] = T exactly.
  [[nodiscard]] double time(int i) const;
  [[nodiscard]] std::vector<double> times() const;

  /// (t - t0)(T - t) at node i, evaluated as dt² i (m-i) so it is exactly symmetric about T′.
  [[nodiscard]] double bump(int i) const;
  /// 2t - t0 - T at node i, evaluated as dt (2i - m): exactly zero at T′.
  [[nodiscard]] double skew(int i) const;

 private:
  double t0_ = 0.0;
  double T_ = 1.0;
  int m_ = 2;
  double dt_ = 0.5;
};

/// Full solve axis from t = 0: a uniform prefix over (0, t0) followed by the
/// window nodes. window_start indexes t0.
struct TimeAxis {
  std::vector<double> times;
  int window_start = 0;
  TimeGrid window;

  [[nodiscard]] int size() const { return static_cast<int>(times.size()); }
  [[nodiscard]] int full_index(int window_index) const { return window_start + window_index; }
  [[nodiscard]] int mid_full_index() const { return full_index(window.mid_index()); }
};

/// Prefix steps are the smallest count with spacing no larger than the window dt.
TimeAxis make_time_axis(const TimeGrid& window);

/// Nodal values of a field over a time axis.
struct SpaceTimeField {
  std::vector<double> times;
  std::vector<Field> values;

  [[nodiscard]] int time_count() const { return static_cast<int>(values.size()); }
};

/// Slices of a full-axis field that fall in the observation window.
SpaceTimeField window_slices(const SpaceTimeField& full, const TimeAxis& axis);

/// Three-point time-derivative weights at slice i of an arbitrary increasing
/// axis: centered (Lagrange) in the interior, second-order one-sided at the ends.
struct TimeStencil {
  int first;
  double coeff[3];
};
TimeStencil time_derivative_stencil(const std::vector<double>& times, int i);

}  // namespace carleman

#endif
