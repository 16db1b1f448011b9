#include "carleman/energy_check.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "carleman/errors.hpp"
#include "carleman/observe.hpp"

namespace carleman {

namespace {

std::vector<Field> window_part(const SpaceTimeField& f, const TimeAxis& axis) {
  if (f.time_count() != axis.size()) throw std::invalid_argument("energy: field does not span the time axis");
  return window_slices(f, axis).values;
}

Field sqrt_field(const Field& c) {
  Field r(c.size());
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (!(c[i] > 0.0)) throw ConfigError("energy: conductivity must be positive at node " + std::to_string(i));
    r[i] = std::sqrt(c[i]);
  }
  return r;
}

// γ as a time-independent window field
Scaled static_h1(const Field& gamma, const WeightSet& w) {
  const Grid& grid = w.grid();
  const int m = w.time().steps();
  const std::vector<Field> g(m + 1, gamma);
  const std::vector<VectorField> dg(m + 1, discrete_gradient(gamma, grid));
  return weighted_norm_spacetime(g, w, 0.0) + weighted_norm_spacetime(dg, w, 0.0);
}

}  // namespace

EnergyCurve energy(const std::vector<Field>& y, const Field& c, const WeightSet& w) {
  const Grid& grid = w.grid();
  const TimeGrid& tg = w.time();
  if (static_cast<int>(y.size()) != tg.steps() + 1)
    throw std::invalid_argument("energy: expected one slice per window node");
  const Field root = sqrt_field(c);
  EnergyCurve curve;
  curve.times = tg.times();
  curve.s = w.s();
  curve.lambda = w.lambda();
  curve.E.assign(y.size(), Scaled::zero());
  Field L = grid.make_field();
  for (int i = 0; i <= tg.steps(); ++i) {
    grid.check_field(y[i], "energy");
    for (int node : grid.boundary_nodes()) {
      if (std::abs(y[i][node]) > 1e-10)
        throw ConfigError("energy: y does not vanish on the boundary (slice " + std::to_string(i) + ", node " +
                          std::to_string(node) + ")");
    }
    if (!w.has_slice(i)) continue;
    for (int node = 0; node < grid.node_count(); ++node) L[node] = w.log_weight(i, node, -1.0);
    const VectorField dy = discrete_gradient(y[i], grid);
    for (const auto& comp : dy.components) {
      Field g(comp.size());
      for (std::size_t k = 0; k < g.size(); ++k) g[k] = root[k] * comp[k];
      curve.E[i] += fitted_inner(grid, L, g, g);
    }
  }
  curve.E_mid = curve.E[tg.mid_index()];
  return curve;
}

EnergyCurve energy(const SpaceTimeField& y, const TimeAxis& axis, const Field& c, const WeightSet& w) {
  return energy(window_part(y, axis), c, w);
}

Scaled energy_at_mid(const SpaceTimeField& y, const TimeAxis& axis, const Field& c, const WeightSet& w) {
  const Field root = sqrt_field(c);
  VectorField dy = discrete_gradient(y.values.at(axis.mid_full_index()), w.grid());
  for (auto& comp : dy.components)
    for (std::size_t k = 0; k < comp.size(); ++k) comp[k] *= root[k];
  return weighted_norm_space(dy, w, -1.0, w.time().mid_index());
}

EstimateReport snapshot_bound_sides(const SpaceTimeField& y, const Field& gamma, const TimeAxis& axis,
                                    const WeightSet& w) {
  const Grid& grid = w.grid();
  const double s = w.s(), lambda = w.lambda();
  EstimateReport rep;
  rep.name = "snapshot";
  rep.set("s", s);
  rep.set("lambda", lambda);
  rep.set("n", grid.cells());
  rep.add_lhs("y_mid", weighted_norm_space(y.values.at(axis.mid_full_index()), w, 0.0, w.time().mid_index()));
  rep.add_rhs("boundary", weighted_boundary_norm(normal_trace(y, grid, axis), w) * std::sqrt(lambda));
  rep.add_rhs("gamma", static_h1(gamma, w) * (1.0 / std::sqrt(s * lambda)));
  rep.finalize();
  return rep;
}

EstimateReport energy_bound_sides(const SpaceTimeField& y, const Field& gamma, const Field& c, const TimeAxis& axis,
                                  const WeightSet& w) {
  const Grid& grid = w.grid();
  const double s = w.s(), lambda = w.lambda();
  EstimateReport rep;
  rep.name = "energy";
  rep.set("s", s);
  rep.set("lambda", lambda);
  rep.set("n", grid.cells());
  rep.add_lhs("E_mid", energy(y, axis, c, w).E_mid);
  rep.add_rhs("boundary", weighted_boundary_norm(normal_trace(y, grid, axis), w) * (s * lambda));
  rep.add_rhs("gamma", static_h1(gamma, w) * s);
  rep.finalize();
  return rep;
}

std::vector<Field> forcing(const Field& gamma, const SpaceTimeField& q_tilde, const TimeAxis& axis, const Grid& grid) {
  const auto dq = window_part(time_derivative(q_tilde), axis);
  std::vector<Field> out;
  out.reserve(dq.size());
  for (const auto& slice : dq) out.push_back(divergence_flux_interior(gamma, slice, grid));
  return out;
}

}  // namespace carleman
