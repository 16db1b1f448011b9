#include <cmath>
#include <random>

#include "carleman/errors.hpp"
#include "carleman/stability.hpp"
#include "doctest.h"

using namespace carleman;

namespace {

StabilitySetup setup_1d(int n, int m) {
  const Grid g = Grid::build(1, n, Face::east);
  return {g, make_time_axis(TimeGrid::build(0.5, 2.0, m)), default_heat_data(g, 1.0)};
}

WeightSet weights(const StabilitySetup& st, double s, double lambda) {
  WeightParams p;
  p.lambda = lambda;
  p.s = s;
  p.x0 = {-1.0, -1.0};
  p.shape = BetaShape::planar;
  return WeightSet::build(st.grid, st.axis.window, p);
}

// 1 + eps x²(1-x)² off the boundary layer
Field bumped(const Grid& g, double eps) {
  Field c = g.make_field(1.0);
  for (int node = 0; node < g.node_count(); ++node) {
    if (in_boundary_layer(g, node)) continue;
    const double x = g.coord(node, 0);
    c[node] += eps * x * x * (1.0 - x) * (1.0 - x);
  }
  return c;
}

double relative_h1_error(const Field& c, const Field& truth, const Grid& g) {
  Field e = g.make_field(), t = g.make_field();
  for (int k = 0; k < g.node_count(); ++k) {
    e[k] = c[k] - truth[k];
    t[k] = truth[k] - 1.0;
  }
  return std::sqrt(h1_norm_squared(e, g) / h1_norm_squared(t, g));
}

ObservationSet observe(const Field& c, const StabilitySetup& st) {
  return extract_observations(solve_heat({c, st.data}, st.grid, st.axis), st.grid, st.axis, c);
}

}  // namespace

TEST_CASE("admissible projection zeroes two rings") {
  const Grid g = Grid::build(2, 8, Face::north);
  const Field one = g.make_field(1.0);
  const Field p = project_admissible(one, g);
  int kept = 0;
  for (int node = 0; node < g.node_count(); ++node) kept += p[node] != 0.0;
  CHECK(kept == 5 * 5);
  CHECK(admissibility_defect(p, g) == 0.0);
  CHECK(admissibility_defect(one, g) == 1.0);

  const Grid g1 = Grid::build(1, 10, Face::east);
  Field ramp = g1.make_field();
  // boundary values zero, first ring not: the normal difference is 3/h
  ramp[1] = 3.0;
  CHECK(admissibility_defect(ramp, g1) == doctest::Approx(30.0));
}

TEST_CASE("coefficient pair validation") {
  const Grid g = Grid::build(1, 16, Face::east);
  const Field ct = g.make_field(1.0);
  CHECK_NOTHROW(make_coefficient_pair(bumped(g, 0.05), ct, g));
  Field c = ct;
  c[1] += 1e-3;
  CHECK_THROWS_AS(make_coefficient_pair(c, ct, g), ConfigError);
  c = bumped(g, 0.05);
  c[8] = -1.0;
  CHECK_THROWS_AS(make_coefficient_pair(c, ct, g), ConfigError);
}

TEST_CASE("identical coefficients give zero sides") {
  const StabilitySetup st = setup_1d(16, 64);
  const Field c = st.grid.make_field(1.0);
  const StabilityReport r = stability_sides(make_coefficient_pair(c, c, st.grid), st, weights(st, 1.0, 1.0));
  CHECK(r.weighted.lhs_total.is_zero());
  CHECK(r.weighted.ratio == 0.0);
  CHECK(r.plain.lhs_total.is_zero());
  CHECK(r.plain.ratio == 0.0);
}

TEST_CASE("stability ratios: finite, swap-symmetric, linear at small amplitude") {
  const StabilitySetup st = setup_1d(32, 128);
  const Field ct = st.grid.make_field(1.0);
  for (double lambda : {1.0, 2.0}) {
    const WeightSet w = weights(st, 1.0, lambda);
    const StabilityReport r = stability_sides(make_coefficient_pair(bumped(st.grid, 0.05), ct, st.grid), st, w);
    CHECK(std::isfinite(r.weighted.log_ratio));
    CHECK(std::isfinite(r.plain.log_ratio));
    CHECK(r.weighted.lhs_total.mantissa > 0.0);

    const Field c = bumped(st.grid, 0.01);
    const StabilityReport fwd = stability_sides(make_coefficient_pair(c, ct, st.grid), st, w);
    const StabilityReport back = stability_sides(make_coefficient_pair(ct, c, st.grid), st, w);
    CHECK(back.weighted.lhs_total.log_abs() == doctest::Approx(fwd.weighted.lhs_total.log_abs()).epsilon(1e-14));
    CHECK(std::abs(back.weighted.rhs_total.log_abs() - fwd.weighted.rhs_total.log_abs()) < std::log(1.1));
    CHECK(std::abs(back.plain.rhs_total.log_abs() - fwd.plain.rhs_total.log_abs()) < std::log(1.1));

    const StabilityReport half = stability_sides(make_coefficient_pair(bumped(st.grid, 0.005), ct, st.grid), st, w);
    CHECK(std::abs(half.weighted.log_ratio - fwd.weighted.log_ratio) < std::log(1.1));
    CHECK(std::abs(half.plain.log_ratio - fwd.plain.log_ratio) < std::log(1.1));
  }
}

TEST_CASE("stability sweep over the perturbation family") {
  const StabilitySetup st = setup_1d(32, 128);
  const WeightSet w = weights(st, 1.0, 1.0);
  const StabilitySweep sw =
      stability_sweep(perturbation_family(st.grid, {1e-3, 1e-2, 1e-1}), st.grid.make_field(1.0), st, w, 2);
  REQUIRE(sw.members.size() == 12);
  CHECK(sw.notes.empty());
  CHECK(std::isfinite(sw.max_ratio));
  REQUIRE(sw.argmax >= 0);
  for (const StabilityReport& r : sw.reports) {
    CHECK(std::isfinite(r.weighted.log_ratio));
    CHECK(r.weighted.ratio <= sw.max_ratio);
    CHECK(r.plain.ratio <= sw.max_plain_ratio);
  }
  REQUIRE(sw.slopes.size() == 4);
  for (const ShapeSlope& s : sw.slopes) {
    CHECK(s.points == 3);
    CHECK(s.slope == doctest::Approx(1.0).epsilon(0.2));
  }
  CHECK(sweep_table(sw).rows.size() == 12);

  // same run serially
  const StabilitySweep serial =
      stability_sweep(perturbation_family(st.grid, {1e-3, 1e-2, 1e-1}), st.grid.make_field(1.0), st, w, 1);
  CHECK(serial.max_ratio == sw.max_ratio);
}

TEST_CASE("zero member is excluded with a note") {
  const StabilitySetup st = setup_1d(16, 64);
  const StabilitySweep sw =
      stability_sweep(perturbation_family(st.grid, {0.0, 1e-2}), st.grid.make_field(1.0), st, weights(st, 1.0, 1.0));
  CHECK(sw.members.size() == 8);
  CHECK(sw.notes.size() == 4);
  for (std::size_t i = 0; i < sw.members.size(); ++i) CHECK(sw.included[i] == (sw.members[i].epsilon != 0.0));
  CHECK(sweep_table(sw).rows.size() == 4);
  CHECK(std::isfinite(sw.max_ratio));
}

TEST_CASE("misfit gradient against central differences") {
  const StabilitySetup st = setup_1d(32, 128);
  const Grid& g = st.grid;
  const ObservationSet data = observe(bumped(g, 0.05), st);
  InverseConfig cfg;
  Field c = g.make_field(1.0);
  for (int k = 0; k < g.node_count(); ++k)
    if (!in_boundary_layer(g, k)) c[k] += 0.02 * std::sin(3.0 * k / g.cells());
  const MisfitGradient mg = misfit_and_gradient(c, data, st, cfg);
  CHECK(mg.J == doctest::Approx(misfit_value(c, data, st, cfg)).epsilon(1e-14));
  for (int k = 0; k < g.node_count(); ++k)
    if (in_boundary_layer(g, k)) CHECK(mg.gradient[k] == 0.0);

  std::mt19937_64 rng(7);
  std::normal_distribution<double> normal;
  const double tau = 1e-5;
  for (int trial = 0; trial < 5; ++trial) {
    Field d = g.make_field();
    for (int k = 0; k < g.node_count(); ++k)
      if (!in_boundary_layer(g, k)) d[k] = normal(rng);
    Field cp = c, cm = c;
    double adj = 0.0;
    for (int k = 0; k < g.node_count(); ++k) {
      cp[k] += tau * d[k];
      cm[k] -= tau * d[k];
      adj += mg.gradient[k] * d[k];
    }
    const double fd = (misfit_value(cp, data, st, cfg) - misfit_value(cm, data, st, cfg)) / (2.0 * tau);
    CHECK(std::abs(fd - adj) <= 1e-5 * std::abs(fd));
  }
}

TEST_CASE("misfit at the truth and at the prior") {
  const StabilitySetup st = setup_1d(32, 128);
  const Field truth = bumped(st.grid, 0.05);
  const ObservationSet data = observe(truth, st);
  InverseConfig cfg;
  cfg.alpha = 0.0;
  const MisfitGradient at_truth = misfit_and_gradient(truth, data, st, cfg);
  CHECK(at_truth.J == 0.0);
  double gmax = 0.0;
  for (double v : at_truth.gradient) gmax = std::max(gmax, std::abs(v));
  CHECK(gmax == 0.0);

  cfg.alpha = 1e-3;
  const Field prior = st.grid.make_field(1.0);
  const MisfitGradient at_prior = misfit_and_gradient(prior, data, st, cfg);
  CHECK(at_prior.regularization == 0.0);
  CHECK(at_prior.J == at_prior.misfit);
  CHECK(at_prior.misfit > 0.0);
}

TEST_CASE("noiseless reconstruction") {
  const StabilitySetup st = setup_1d(32, 128);
  const Field truth = bumped(st.grid, 0.05);
  InverseConfig cfg;
  cfg.max_iterations = 200;
  const Reconstruction rec = reconstruct(observe(truth, st), st, cfg, &truth);
  REQUIRE(!rec.log.empty());
  CHECK(rec.log.back().iteration <= 200);
  CHECK(rec.log.back().h1_error <= 0.05);
  CHECK(relative_h1_error(rec.c, truth, st.grid) == doctest::Approx(rec.log.back().h1_error).epsilon(1e-12));
  for (double v : rec.c) CHECK(v >= cfg.c_min);
  for (std::size_t i = 1; i < rec.log.size(); ++i) CHECK(rec.log[i].J < rec.log[i - 1].J);
  CHECK(reconstruction_table(rec).rows.size() == rec.log.size());
}

TEST_CASE("data from the prior return the prior at once") {
  const StabilitySetup st = setup_1d(32, 128);
  const Field prior = st.grid.make_field(1.0);
  const Reconstruction rec = reconstruct(observe(prior, st), st, InverseConfig{});
  CHECK(rec.log.back().iteration <= 2);
  for (int k = 0; k < st.grid.node_count(); ++k) CHECK(rec.c[k] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("noise is reproducible and error grows with it") {
  const StabilitySetup st = setup_1d(32, 128);
  const Field truth = bumped(st.grid, 0.05);
  const ObservationSet clean = observe(truth, st);

  const ObservationSet a = add_noise(clean, 1e-3, 42), b = add_noise(clean, 1e-3, 42), c = add_noise(clean, 1e-3, 43);
  CHECK(a.flux.values == b.flux.values);
  CHECK(a.flux.values != c.flux.values);
  CHECK(a.grad_lap_q.components == clean.grad_lap_q.components);

  InverseConfig cfg;
  const std::vector<NoisePoint> pts = noise_sweep(clean, st, cfg, truth, {1e-4, 1e-3, 1e-2}, 3);
  REQUIRE(pts.size() == 3);
  for (std::size_t i = 1; i < pts.size(); ++i) CHECK(pts[i].h1_error >= 0.8 * pts[i - 1].h1_error);
  CHECK(pts.back().h1_error > pts.front().h1_error);
}
