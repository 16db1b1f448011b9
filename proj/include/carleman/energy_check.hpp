#ifndef CARLEMAN_ENERGY_CHECK_HPP
#define CARLEMAN_ENERGY_CHECK_HPP

#include <vector>

#include "carleman/forward.hpp"
#include "carleman/report.hpp"
#include "carleman/scaled.hpp"
#include "carleman/weights.hpp"

namespace carleman {

/// E(t) = ∫ c φ⁻¹ e^{-2sη} |∇y|² on the window nodes; the endpoint slices are 0.
struct EnergyCurve {
  std::vector<double> times;
  std::vector<Scaled> E;
  double s = 0.0;
  double lambda = 0.0;
  Scaled E_mid;
};

/// y holds one slice per window node. Throws ConfigError when y does not
/// vanish on Γ (|y| > 1e-10 at a boundary node).
EnergyCurve energy(const std::vector<Field>& y, const Field& c, const WeightSet& w);
/// Window part of a full-axis field.
EnergyCurve energy(const SpaceTimeField& y, const TimeAxis& axis, const Field& c, const WeightSet& w);

/// E(T′) through the generic weighted norm of √c ∇y at T′.
Scaled energy_at_mid(const SpaceTimeField& y, const TimeAxis& axis, const Field& c, const WeightSet& w);

/// ∫ e^{-2sη(T′)}|y(T′)|²  against
/// λ^{1/2} ∫∫_{Γ₀} e^{-2sη}φ|∂_νy|² + s^{-1/2}λ^{-1/2} ∬ e^{-2sη}(|γ|² + |∇γ|²).
EstimateReport snapshot_bound_sides(const SpaceTimeField& y, const Field& gamma, const TimeAxis& axis,
                                    const WeightSet& w);

/// E(T′)  against  sλ ∫∫_{Γ₀} e^{-2sη}φ|∂_νy|² + s ∬ e^{-2sη}(|γ|² + |∇γ|²).
EstimateReport energy_bound_sides(const SpaceTimeField& y, const Field& gamma, const Field& c, const TimeAxis& axis,
                                  const WeightSet& w);

/// f = ∇·(γ∇∂ₜq̃) on interior nodes at every window slice (diagnostic only).
std::vector<Field> forcing(const Field& gamma, const SpaceTimeField& q_tilde, const TimeAxis& axis, const Grid& grid);

}  // namespace carleman

#endif
