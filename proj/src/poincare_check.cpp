#include "carleman/poincare_check.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "carleman/errors.hpp"
#include "carleman/observe.hpp"

namespace carleman {

namespace {

void require_zero_on_boundary(const Field& g, const Grid& grid, const char* what) {
  double scale = 0.0;
  for (double v : g) scale = std::max(scale, std::abs(v));
  for (int node : grid.boundary_nodes()) {
    if (std::abs(g[node]) > 1e-14 * scale)
      throw ConfigError(std::string(what) + ": field does not vanish on the boundary (node " + std::to_string(node) +
                        ")");
  }
}

void require_nondegenerate(const TransportBase& base) {
  if (!(base.min_abs_beta_dot_grad > 1e-12))
    throw ConfigError("transport base is degenerate: min |grad beta . grad b| = " +
                      std::to_string(base.min_abs_beta_dot_grad));
}

}  // namespace

TransportBase make_transport_base(const Field& b, const WeightSet& w) {
  const Grid& grid = w.grid();
  grid.check_field(b, "make_transport_base");
  TransportBase base;
  base.b = b;
  base.grad = discrete_gradient(b, grid);
  base.beta_dot_grad = dot(w.grad_beta(), base.grad);
  base.min_abs_beta_dot_grad = std::numeric_limits<double>::infinity();
  for (double v : base.beta_dot_grad) base.min_abs_beta_dot_grad = std::min(base.min_abs_beta_dot_grad, std::abs(v));
  return base;
}

Field apply_P0(const Field& g, const TransportBase& base, const Grid& grid) {
  grid.check_field(g, "apply_P0");
  require_zero_on_boundary(g, grid, "apply_P0");
  return dot(base.grad, discrete_gradient(g, grid));
}

EstimateReport lemma_sides(const Field& g, const TransportBase& base, const WeightSet& w) {
  require_nondegenerate(base);
  const Grid& grid = w.grid();
  const int mid = w.time().mid_index();
  const double s = w.s(), lambda = w.lambda();
  EstimateReport rep;
  rep.name = "lemma";
  rep.set("s", s);
  rep.set("lambda", lambda);
  rep.set("n", grid.cells());
  rep.set("min_beta_dot_grad", base.min_abs_beta_dot_grad);
  rep.add_lhs("g", weighted_norm_space(g, w, 1.0, mid) * (s * s * lambda * lambda));
  rep.add_rhs("P0g", weighted_norm_space(apply_P0(g, base, grid), w, -1.0, mid));
  rep.finalize();
  return rep;
}

Field cit_residual(const Field& gamma, const Field& c, const Field& q_tilde, const Field& u, const Field& y,
                   const Grid& grid) {
  const Field a = divergence_flux_interior(gamma, q_tilde, grid);
  const Field b = divergence_flux_interior(c, u, grid);
  Field r = grid.make_field();
  for (int node : grid.interior_nodes()) r[node] = y[node] - a[node] - b[node];
  return r;
}

Field cit_residual(const Field& gamma, const Field& c, const TwinSolution& twin, const TimeAxis& axis,
                   const Grid& grid) {
  const int k = axis.mid_full_index();
  return cit_residual(gamma, c, twin.q_tilde.values[k], twin.u.values[k], twin.y.values[k], grid);
}

PropositionReport proposition_sides(const Field& gamma, const TwinSolution& twin, const TimeAxis& axis,
                                    const WeightSet& w) {
  const Grid& grid = w.grid();
  const int k = axis.mid_full_index();
  const int mid = w.time().mid_index();
  require_nondegenerate(make_transport_base(twin.q_tilde.values[k], w));
  require_zero_on_boundary(gamma, grid, "proposition_sides");

  const double s = w.s(), lambda = w.lambda();
  const double lead = s * s * lambda * lambda;
  const Field& y = twin.y.values[k];
  const Snapshot us = snapshot_of(twin.u.values[k], grid, grid.make_field(1.0));

  const Scaled g0 = weighted_norm_space(gamma, w, 1.0, mid) * lead;
  const Scaled g1 = weighted_norm_space(discrete_gradient(gamma, grid), w, 1.0, mid) * lead;
  const Scaled y0 = weighted_norm_space(y, w, -1.0, mid);
  const Scaled y1 = weighted_norm_space(discrete_gradient(y, grid), w, -1.0, mid);
  const Scaled u3 = weighted_norm_space(us.grad_lap_q, w, 0.0, mid);
  const Scaled u2 = weighted_norm_space(us.lap_q, w, 0.0, mid);
  const Scaled u1 = weighted_norm_space(us.grad_q, w, 0.0, mid);

  auto start = [&](const char* name) {
    EstimateReport r;
    r.name = name;
    r.set("s", s);
    r.set("lambda", lambda);
    r.set("n", grid.cells());
    return r;
  };
  auto u_terms = [&](EstimateReport& r) {
    r.add_rhs("grad_lap_u", u3);
    r.add_rhs("lap_u", u2);
    r.add_rhs("grad_u", u1);
  };
  PropositionReport out;
  out.scalar = start("scalar");
  out.scalar.add_lhs("gamma", g0);
  out.scalar.add_rhs("y", y0);
  u_terms(out.scalar);
  out.gradient = start("gradient");
  out.gradient.add_lhs("grad_gamma", g1);
  out.gradient.add_rhs("grad_y", y1);
  u_terms(out.gradient);
  out.combined = start("combined");
  out.combined.add_lhs("gamma", g0);
  out.combined.add_lhs("grad_gamma", g1);
  out.combined.add_rhs("y", y0);
  out.combined.add_rhs("grad_y", y1);
  u_terms(out.combined);
  for (auto* r : {&out.scalar, &out.gradient, &out.combined}) r->finalize();
  return out;
}

}  // namespace carleman
