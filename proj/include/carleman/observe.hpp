#ifndef CARLEMAN_OBSERVE_HPP
#define CARLEMAN_OBSERVE_HPP

#include <iosfwd>
#include <vector>

#include "carleman/forward.hpp"
#include "carleman/grid.hpp"
#include "carleman/scaled.hpp"
#include "carleman/time_grid.hpp"
#include "carleman/weights.hpp"

namespace carleman {

/// Values of a normal derivative on Γ₀ at the interior window slices 1..m-1.
/// values[k][j] belongs to slice slices[k] and node gamma0_nodes[j].
struct BoundaryTrace {
  std::vector<int> slices;
  std::vector<double> times;
  std::vector<int> gamma0_nodes;
  std::vector<std::vector<double>> values;
};

/// Measurement set: flux trace of ∂ₜq on Γ₀ × (t₀,T) plus snapshots at T′.
struct ObservationSet {
  BoundaryTrace flux;
  Field q;
  VectorField grad_q;
  Field lap_q;
  VectorField grad_lap_q;
};

/// ∂_ν f on Γ₀ at every interior window slice of a full-axis field.
BoundaryTrace normal_trace(const SpaceTimeField& f, const Grid& grid, const TimeAxis& axis);

/// Same for window-indexed slices (slices[i] at window node i).
BoundaryTrace normal_trace(const std::vector<Field>& slices, const Grid& grid, const TimeGrid& window);

ObservationSet extract_observations(const SpaceTimeField& q, const Grid& grid, const TimeAxis& axis, const Field& c);

/// d - e, slice by slice; shapes must agree.
BoundaryTrace trace_difference(const BoundaryTrace& a, const BoundaryTrace& b);

/// Unweighted ‖trace‖² over (t₀,T) × Γ₀ (trapezoid in time, face trapezoid in space).
double boundary_norm(const BoundaryTrace& trace, const Grid& grid, const TimeGrid& window);

/// The four unweighted terms of the plain observation distance between two sets.
struct ObservationDistance {
  double flux = 0.0;
  double grad_lap = 0.0;
  double lap = 0.0;
  double grad = 0.0;
  [[nodiscard]] double total() const { return flux + grad_lap + lap + grad; }
};
ObservationDistance observation_distance(const ObservationSet& a, const ObservationSet& b, const Grid& grid,
                                         const TimeGrid& window);

// Weighted integrals ∫ e^{-2sη} φ^k · density. e^{-2sη} varies across a cell by
// far more than any polynomial rule resolves, so the weight is integrated
// exactly against interpolated data: densities linearly (fitted rule), norms
// as products of multilinear interpolants (fitted_inner). Over the window the
// time direction uses WeightSet::log_time_weight the same way. Results are
// exactly homogeneous in the data.

Scaled weighted_integral_space(std::span<const double> density, const WeightSet& w, double k, int slice);
Scaled weighted_norm_space(std::span<const double> f, const WeightSet& w, double k, int slice);
Scaled weighted_norm_space(const VectorField& f, const WeightSet& w, double k, int slice);

/// Over the window; densities[i] is slice i (i = 0..m). Endpoint slices contribute 0.
Scaled weighted_integral_spacetime(const std::vector<Field>& densities, const WeightSet& w, double k);
/// Time-independent density integrated over the window.
Scaled weighted_integral_spacetime(std::span<const double> density, const WeightSet& w, double k);
Scaled weighted_norm_spacetime(const std::vector<Field>& f, const WeightSet& w, double k);
Scaled weighted_norm_spacetime(const std::vector<VectorField>& f, const WeightSet& w, double k);

/// ∫ |f|² for a field that already carries its weight (f = e^{-sη}·g), fitted against e^{-2sη}.
Scaled weighted_norm_space(const ScaledField& f, const WeightSet& w, int slice);
Scaled weighted_norm_spacetime(const std::vector<ScaledField>& f, const WeightSet& w);

/// ∫∫_{Γ₀} e^{-2sη} φ |trace|², optionally with the extra factor ∂_νβ.
Scaled weighted_boundary_norm(const BoundaryTrace& trace, const WeightSet& w, bool with_dnu_beta = false);

/// Plain trapezoid ∫ |f|² for a scaled field, and its window integral (endpoint slices included as given).
Scaled scaled_norm_space(const ScaledField& f, const Grid& grid);
Scaled scaled_norm_spacetime(const std::vector<ScaledField>& f, const TimeGrid& window, const Grid& grid);

/// `kind,index1,index2,value`. Kinds: time (slice,0), flux (slice,node), q/lap_q (node,0),
/// grad_q/grad_lap_q (node,axis).
void write_observations(std::ostream& out, const ObservationSet& obs);
ObservationSet read_observations(std::istream& in, const Grid& grid);

}  // namespace carleman

#endif
