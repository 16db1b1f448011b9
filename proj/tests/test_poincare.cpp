#include <cmath>
#include <numbers>
#include <random>

#include "carleman/errors.hpp"
#include "carleman/observe.hpp"
#include "carleman/poincare_check.hpp"
#include "doctest.h"

using namespace carleman;
using std::numbers::pi;

namespace {

WeightSet weights(const Grid& g, const TimeGrid& tg, double lambda = 1.0, double s = 1.0) {
  WeightParams p;
  p.lambda = lambda;
  p.s = s;
  p.x0 = {-1.0, -1.0};
  p.shape = BetaShape::planar;
  return WeightSet::build(g, tg, p);
}

Field bump_gamma(const Grid& g, double eps) {
  Field gam = g.make_field();
  for (int node = 0; node < g.node_count(); ++node) {
    double v = eps;
    for (int a = 0; a < g.dimension(); ++a) {
      const double x = g.coord(node, a);
      v *= x * x * (1.0 - x) * (1.0 - x);
    }
    gam[node] = v;
  }
  return gam;
}

Field plus(const Field& a, const Field& b) {
  Field r = a;
  for (std::size_t i = 0; i < r.size(); ++i) r[i] += b[i];
  return r;
}

double max_abs(const Field& f) {
  double m = 0.0;
  for (double v : f) m = std::max(m, std::abs(v));
  return m;
}

}  // namespace

TEST_CASE("P0 is exact on quadratics in 1D") {
  const Grid g = Grid::build(1, 10, Face::east);
  const TimeGrid tg = TimeGrid::build(0.5, 2.0, 8);
  Field b = g.make_field(), f = g.make_field();
  for (int node = 0; node < g.node_count(); ++node) {
    const double x = g.coord(node, 0);
    b[node] = x;
    f[node] = x * (1.0 - x);
  }
  const TransportBase base = make_transport_base(b, weights(g, tg));
  const Field p = apply_P0(f, base, g);
  for (int node = 0; node < g.node_count(); ++node) CHECK(p[node] == doctest::Approx(1.0 - 2.0 * g.coord(node, 0)).epsilon(1e-12));
  CHECK(max_abs(apply_P0(g.make_field(), base, g)) == 0.0);
  // β = (x+1)² + K, so ∇β·∇b = 2(x+1) ≥ 2
  CHECK(base.min_abs_beta_dot_grad == doctest::Approx(2.0).epsilon(1e-12));
  Field bad = f;
  bad[0] = 0.1;
  CHECK_THROWS_AS(apply_P0(bad, base, g), ConfigError);
}

TEST_CASE("P0 converges in 2D") {
  std::vector<double> err;
  for (int n : {8, 16, 32}) {
    const Grid g = Grid::build(2, n, Face::north);
    const TimeGrid tg = TimeGrid::build(0.5, 2.0, 8);
    Field b = g.make_field(), f = g.make_field();
    for (int node = 0; node < g.node_count(); ++node) {
      const double x = g.coord(node, 0), y = g.coord(node, 1);
      b[node] = x;
      f[node] = g.is_boundary(node) ? 0.0 : std::sin(pi * x) * std::sin(pi * y);
    }
    const Field p = apply_P0(f, make_transport_base(b, weights(g, tg)), g);
    double e = 0.0;
    for (int node = 0; node < g.node_count(); ++node)
      e = std::max(e, std::abs(p[node] - pi * std::cos(pi * g.coord(node, 0)) * std::sin(pi * g.coord(node, 1))));
    err.push_back(e);
  }
  CHECK(std::log2(err[0] / err[1]) >= 1.8);
  CHECK(std::log2(err[1] / err[2]) >= 1.8);
}

TEST_CASE("P0 is bilinear") {
  const Grid g = Grid::build(2, 6, Face::east);
  const TimeGrid tg = TimeGrid::build(0.5, 2.0, 8);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  auto random_field = [&](bool zero_boundary) {
    Field f = g.make_field();
    for (int node = 0; node < g.node_count(); ++node) f[node] = zero_boundary && g.is_boundary(node) ? 0.0 : u(rng);
    return f;
  };
  const WeightSet w = weights(g, tg);
  const Field b1 = random_field(false), b2 = random_field(false), f1 = random_field(true), f2 = random_field(true);
  const Field lhs = apply_P0(plus(f1, f2), make_transport_base(plus(b1, b2), w), g);
  const Field a = apply_P0(f1, make_transport_base(b1, w), g), b = apply_P0(f2, make_transport_base(b1, w), g);
  const Field c = apply_P0(f1, make_transport_base(b2, w), g), d = apply_P0(f2, make_transport_base(b2, w), g);
  for (int node = 0; node < g.node_count(); ++node)
    CHECK(lhs[node] == doctest::Approx(a[node] + b[node] + c[node] + d[node]).epsilon(1e-12));
}

TEST_CASE("lemma sides") {
  const Grid g = Grid::build(1, 32, Face::east);
  const TimeGrid tg = TimeGrid::build(0.5, 2.0, 16);
  Field b = g.make_field(), f = g.make_field();
  for (int node = 0; node < g.node_count(); ++node) {
    const double x = g.coord(node, 0);
    b[node] = x;
    f[node] = x * (1.0 - x);
  }
  const WeightSet w = weights(g, tg, 1.0, 4.0);
  const TransportBase base = make_transport_base(b, w);

  const EstimateReport zero = lemma_sides(g.make_field(), base, w);
  CHECK(zero.lhs_total.is_zero());
  CHECK(zero.rhs_total.is_zero());
  CHECK(zero.ratio == 0.0);

  const EstimateReport r = lemma_sides(f, base, w);
  CHECK(std::isfinite(r.ratio));
  CHECK(r.ratio > 0.0);
  Field f2 = f;
  for (double& v : f2) v *= 2.0;
  CHECK(lemma_sides(f2, base, w).ratio == doctest::Approx(r.ratio).epsilon(1e-13));

  // bounded by one constant over the s sweep
  double lo = 1e300, hi = 0.0;
  for (double s : {2.0, 4.0, 8.0}) {
    const double v = lemma_sides(f, base, w.with_s(s)).ratio;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  CHECK(std::isfinite(hi));
  CHECK(hi / lo < 10.0);

  CHECK_THROWS_AS(lemma_sides(f, make_transport_base(g.make_field(3.0), w), w), ConfigError);
}

TEST_CASE("interior data identity vanishes for identical coefficients") {
  const Grid g = Grid::build(1, 16, Face::east);
  const TimeAxis axis = make_time_axis(TimeGrid::build(0.5, 2.0, 32));
  const HeatData data = default_heat_data(g, 1.0);
  const Field c = g.make_field(1.0);
  const TwinSolution twin = solve_twin(c, c, data, g, axis);
  CHECK(max_abs(cit_residual(g.make_field(), c, twin, axis, g)) == 0.0);
}

TEST_CASE("interior data identity residual converges and scales with the data") {
  std::vector<double> res;
  for (int n : {16, 32, 64}) {
    const Grid g = Grid::build(1, n, Face::east);
    const TimeAxis axis = make_time_axis(TimeGrid::build(0.5, 2.0, 2 * n));
    const Field gam = bump_gamma(g, 0.1);
    const Field ct = g.make_field(1.0);
    const Field c = plus(ct, gam);
    const HeatData data = default_heat_data(g, 1.0);
    const TwinSolution twin = solve_twin(c, ct, data, g, axis);
    const Field r = cit_residual(gam, c, twin, axis, g);
    res.push_back(max_abs(r));
    if (n == 16) {
      HeatData twice = data;
      for (double& v : twice.q0) v *= 2.0;
      twice.g = [g0 = data.g](double t, int node) { return 2.0 * g0(t, node); };
      twice.r = 2.0;
      const Field r2 = cit_residual(gam, c, solve_twin(c, ct, twice, g, axis), axis, g);
      for (int node = 0; node < g.node_count(); ++node) CHECK(r2[node] == doctest::Approx(2.0 * r[node]).epsilon(1e-8));
    }
  }
  CHECK(res[2] < res[1]);
  CHECK(std::log2(res[0] / res[1]) >= 1.0);
  CHECK(std::log2(res[1] / res[2]) >= 1.0);
}

TEST_CASE("proposition sides") {
  const Grid g = Grid::build(1, 32, Face::east);
  const TimeAxis axis = make_time_axis(TimeGrid::build(0.5, 2.0, 64));
  const HeatData data = default_heat_data(g, 1.0);
  const Field ct = g.make_field(1.0);
  const WeightSet w = weights(g, axis.window, 1.0, 1.0);

  SUBCASE("zero perturbation") {
    const TwinSolution twin = solve_twin(ct, ct, data, g, axis);
    const PropositionReport p = proposition_sides(g.make_field(), twin, axis, w);
    CHECK(p.combined.lhs_total.is_zero());
    CHECK(p.combined.rhs_total.is_zero());
    CHECK(p.combined.ratio == 0.0);
  }

  SUBCASE("amplitude family") {
    std::vector<double> ratios;
    for (double eps : {0.01, 0.05, 0.1}) {
      const Field gam = bump_gamma(g, eps);
      const TwinSolution twin = solve_twin(plus(ct, gam), ct, data, g, axis);
      const PropositionReport p = proposition_sides(gam, twin, axis, w);
      for (const auto* r : {&p.scalar, &p.gradient, &p.combined}) {
        CHECK(std::isfinite(r->ratio));
        CHECK(r->ratio > 0.0);
      }
      CHECK(p.combined.lhs_total.log_abs() ==
            doctest::Approx((p.scalar.lhs_total + p.gradient.lhs_total).log_abs()).epsilon(1e-14));
      ratios.push_back(p.combined.ratio);

      // lower bound by the smallest weight times the unweighted H¹ norm
      const int mid = axis.window.mid_index();
      double min_log = 1e300;
      for (int node = 0; node < g.node_count(); ++node) min_log = std::min(min_log, w.log_weight(mid, node, 1.0));
      const Field zero = g.make_field();
      const VectorField dg = discrete_gradient(gam, g);
      const double plain = fitted_inner(g, zero, gam, gam).value() + fitted_inner(g, zero, dg.components[0], dg.components[0]).value();
      CHECK(p.combined.lhs_total.log_abs() >= min_log + std::log(plain));
    }
    const auto [lo, hi] = std::minmax_element(ratios.begin(), ratios.end());
    CHECK(*hi / *lo < 1.25);
  }
}
