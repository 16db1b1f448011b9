#ifndef CARLEMAN_WEIGHTS_HPP
#define CARLEMAN_WEIGHTS_HPP

#include <array>
#include <cmath>
#include <memory>
#include <vector>

#include "carleman/grid.hpp"
#include "carleman/time_grid.hpp"

namespace carleman {

/// Shape of the auxiliary function β̃.
///  radial: β̃ = |x - x₀|².
///  planar: β̃ = (x_a - x₀_a)² along the axis normal to Γ₀ only. On the square
///          this is the variant that satisfies ∂_νβ̃ ≤ 0 on Γ∖Γ₀ when Γ₀ is one face.
enum class BetaShape { radial, planar };

struct WeightParams {
  double lambda = 1.0;
  double s = 1.0;
  double m = 2.0;  // K = m ‖β̃‖∞
  std::array<double, 2> x0{-1.0, -1.0};
  BetaShape shape = BetaShape::radial;
};

/// Carleman weights φ = e^{λβ}/((t-t0)(T-t)), η = (e^{2λK} - e^{λβ})/((t-t0)(T-t))
/// tabulated on the interior window slices t[1..m-1]. The endpoint slices are
/// absent; every e^{-2sη}φ^k integrand is taken as 0 there.
class WeightSet {
 public:
  static WeightSet build(const Grid& grid, const TimeGrid& time, const WeightParams& params);

  [[nodiscard]] const Grid& grid() const { return grid_; }
  [[nodiscard]] const TimeGrid& time() const { return time_; }
  [[nodiscard]] const WeightParams& params() const { return params_; }
  [[nodiscard]] double lambda() const { return params_.lambda; }
  [[nodiscard]] double s() const { return params_.s; }
  [[nodiscard]] double K() const { return K_; }
  [[nodiscard]] double C0() const { return C0_; }

  [[nodiscard]] const Field& beta_tilde() const { return beta_tilde_; }
  [[nodiscard]] const Field& beta() const { return beta_; }
  /// Closed-form ∇β (= ∇β̃).
  [[nodiscard]] const VectorField& grad_beta() const { return grad_beta_; }
  /// ∂_νβ at a boundary node (closed form, primary normal).
  [[nodiscard]] double normal_derivative_beta(int node) const;

  /// Whether slice i carries tabulated weights (0 < i < m).
  [[nodiscard]] bool has_slice(int i) const { return i > 0 && i < time_.steps(); }
  [[nodiscard]] double log_phi(int i, int node) const { return log_phi_[i][node]; }
  [[nodiscard]] double phi(int i, int node) const { return std::exp(log_phi_[i][node]); }
  [[nodiscard]] double eta(int i, int node) const { return eta_[i][node]; }
  /// η* = min η over the window, attained at T′ where β is largest.
  [[nodiscard]] double eta_floor() const { return eta_floor_; }
  /// η - η*, formed without cancellation. At λ = 2 η itself is ~1e14 and its
  /// rounding alone would move e^{-2sη} by tens of percent.
  [[nodiscard]] double eta_excess(int i, int node) const { return eta_excess_[i][node]; }
  [[nodiscard]] double dt_phi(int i, int node) const { return dt_phi_[i][node]; }
  [[nodiscard]] double dt_eta(int i, int node) const { return dt_eta_[i][node]; }
  /// log of e^{-2s(η-η*)} φ^k at (slice i, node). Every weighted quantity
  /// carries the common factor e^{-2sη*} exactly once, so it is left out and
  /// cancels from all ratios.
  [[nodiscard]] double log_weight(int i, int node, double k) const {
    return k * log_phi_[i][node] - 2.0 * params_.s * eta_excess_[i][node];
  }

  /// log ∫ ĥ_i(t) e^{-2s(η(x,t)-η*)} φ(x,t)^k dt per node, with ĥ_i the hat
  /// function of window node i. Window integrals use it in place of the
  /// trapezoid weight: near T′ the weight falls by e^{10⁴} or more within one
  /// step, so it is integrated in closed form against piecewise-linear data.
  /// Computed once per k and cached; safe to call concurrently.
  [[nodiscard]] const Field& log_time_weight(int i, double k) const;
  /// log e^{-2s(η-η*)} φ^k at an arbitrary window time for one node; -inf at t0 and T.
  [[nodiscard]] double log_weight_at(double t, int node, double k) const;

  /// Same weights with s replaced.
  [[nodiscard]] WeightSet with_s(double s) const;
  /// Test hook: η ≡ 0 (and ∂ₜη ≡ 0), φ untouched.
  [[nodiscard]] WeightSet with_eta_disabled() const;

 private:
  WeightSet(const Grid& grid, const TimeGrid& time) : grid_(grid), time_(time) {}

  Grid grid_;
  TimeGrid time_;
  WeightParams params_;
  double K_ = 0.0;
  double C0_ = 0.0;
  Field beta_tilde_;
  Field beta_;
  VectorField grad_beta_;
  std::vector<Field> log_phi_;
  std::vector<Field> eta_;
  std::vector<Field> eta_excess_;
  double eta_floor_ = 0.0;
  // closed-form pieces: η - η* = (Φ(t)-Φ(T′))·gap + Φ(T′)·rise
  Field gap_;
  Field rise_;
  bool eta_disabled_ = false;
  struct TimeWeightCache;
  std::shared_ptr<TimeWeightCache> cache_;
  std::vector<Field> dt_phi_;
  std::vector<Field> dt_eta_;
};

/// Φ(t) = 1/((t-t0)(T-t)) on the window nodes (+inf at the endpoints).
struct TimeProfile {
  std::vector<double> values;
  int argmin = 0;
  double min_value = 0.0;
};

/// Throws std::logic_error if the grid minimizer is not the midpoint.
TimeProfile weight_time_profile(const TimeGrid& time);

struct WeightBounds {
  double sup_dt_eta_over_phi2 = 0.0;
  double sup_dt_phi_over_phi3 = 0.0;
  double sup_phi_inv_over_phi = 0.0;
  double sup_phi_inv2_over_phi_inv = 0.0;
  bool finite = false;
};

/// Empirical suprema over interior space-time nodes of the pointwise ratios
/// that bound ∂ₜη, ∂ₜφ, φ⁻¹ and φ⁻² by powers of φ.
WeightBounds weight_bounds_check(const WeightSet& weights);

}  // namespace carleman

#endif
