#include "carleman/time_grid.hpp"

#include <cmath>
#include <stdexcept>

#include "carleman/errors.hpp"

namespace carleman {

TimeGrid TimeGrid::build(double t0, double T, int m) {
  if (!(t0 >= 0.0) || !(T > t0))
    throw ConfigError("TimeGrid: require T > t0 >= 0 (got t0=" + std::to_string(t0) + ", T=" + std::to_string(T) + ")");
  if (m < 2 || m % 2 != 0)
    throw ConfigError("TimeGrid invariant violated: steps m must be even and >= 2 so that T' is a grid node (got m=" +
                      std::to_string(m) + ")");
  TimeGrid g;
  g.t0_ = t0;
  g.T_ = T;
  g.m_ = m;
  g.dt_ = (T - t0) / m;
  return g;
}

double TimeGrid::time(int i) const {
  if (i == m_) return T_;
  return t0_ + i * dt_;
}

std::vector<double> TimeGrid::times() const {
  std::vector<double> t(m_ + 1);
  for (int i = 0; i <= m_; ++i) t[i] = time(i);
  return t;
}

double TimeGrid::bump(int i) const { return dt_ * dt_ * static_cast<double>(i) * static_cast<double>(m_ - i); }

double TimeGrid::skew(int i) const { return dt_ * static_cast<double>(2 * i - m_); }

TimeAxis make_time_axis(const TimeGrid& window) {
  TimeAxis axis;
  axis.window = window;
  const double t0 = window.t0();
  int prefix = 0;
  if (t0 > 0.0) prefix = static_cast<int>(std::ceil(t0 / window.dt() - 1e-9));
  const double dt0 = prefix > 0 ? t0 / prefix : 0.0;
  for (int k = 0; k < prefix; ++k) axis.times.push_back(k * dt0);
  axis.window_start = prefix;
  for (double t : window.times()) axis.times.push_back(t);
  return axis;
}

SpaceTimeField window_slices(const SpaceTimeField& full, const TimeAxis& axis) {
  if (full.time_count() != axis.size()) throw std::invalid_argument("window_slices: field does not span the time axis");
  SpaceTimeField w;
  const int m = axis.window.steps();
  for (int i = 0; i <= m; ++i) {
    w.times.push_back(full.times[axis.full_index(i)]);
    w.values.push_back(full.values[axis.full_index(i)]);
  }
  return w;
}

TimeStencil time_derivative_stencil(const std::vector<double>& times, int i) {
  const int n = static_cast<int>(times.size());
  if (n < 3) throw std::invalid_argument("time_derivative: need at least 3 time slices");
  int first = i - 1;
  if (i == 0) first = 0;
  if (i == n - 1) first = n - 3;
  const double t0 = times[first], t1 = times[first + 1], t2 = times[first + 2];
  const double x = times[i];
  // Derivative of the quadratic Lagrange basis at x.
  TimeStencil s{first, {0.0, 0.0, 0.0}};
  s.coeff[0] = ((x - t1) + (x - t2)) / ((t0 - t1) * (t0 - t2));
  s.coeff[1] = ((x - t0) + (x - t2)) / ((t1 - t0) * (t1 - t2));
  s.coeff[2] = ((x - t0) + (x - t1)) / ((t2 - t0) * (t2 - t1));
  return s;
}

}  // namespace carleman
