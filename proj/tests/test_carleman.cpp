#include <cmath>
#include <numbers>

#include "carleman/carleman_check.hpp"
#include "carleman/errors.hpp"
#include "carleman/observe.hpp"
#include "doctest.h"

using namespace carleman;
using std::numbers::pi;

namespace {

WeightSet weights(const Grid& g, const TimeGrid& tg, double lambda, double s, double x0 = -1.0, double m = 2.0) {
  WeightParams p;
  p.lambda = lambda;
  p.s = s;
  p.m = m;
  p.x0 = {x0, x0};
  p.shape = BetaShape::planar;
  return WeightSet::build(g, tg, p);
}

Field ramp(const Grid& g) {
  Field c = g.make_field();
  for (int node = 0; node < g.node_count(); ++node) c[node] = 1.0 + 0.2 * g.coord(node, 0);
  return c;
}

WindowField sample(const Grid& g, const TimeGrid& tg, double (*f)(double, double)) {
  WindowField q;
  for (int i = 0; i <= tg.steps(); ++i) {
    Field slice = g.make_field();
    for (int node = 0; node < g.node_count(); ++node) slice[node] = f(g.coord(node, 0), tg.time(i));
    q.push_back(slice);
  }
  return q;
}

double q_exact(double x, double t) { return std::sin(pi * x) * std::cos(t); }

// ∫_0^1 e^{δu} a(u) b(u) du by composite Simpson.
double simpson(double delta, int a, int b) {
  const int n = 200000;
  auto hat = [](int k, double u) { return k == 0 ? 1.0 - u : u; };
  auto f = [&](double u) { return std::exp(delta * u) * hat(a, u) * hat(b, u); };
  double sum = f(0.0) + f(1.0);
  for (int i = 1; i < n; ++i) sum += (i % 2 ? 4.0 : 2.0) * f(static_cast<double>(i) / n);
  return sum / (3.0 * n);
}

// Closed-form e^{sη}M₁ψ and e^{sη}M₂ψ for 1D, c = 1 + 0.2x, planar β, by the
// chain rule on ψ = e^{-sη}q.
struct Oracle {
  double m1, m2;
};

Oracle oracle(const WeightSet& w, double x, double t, double x0) {
  const double s = w.s(), lam = w.lambda();
  const double bump = (t - w.time().t0()) * (w.time().T() - t);
  const double beta = (x - x0) * (x - x0) + w.K();
  const double b1 = 2.0 * (x - x0), b2 = 2.0;
  const double phi = std::exp(lam * beta) / bump;
  const double eta_x = -lam * phi * b1;
  const double eta_xx = -lam * phi * (lam * b1 * b1 + b2);
  const double dbump = w.time().T() + w.time().t0() - 2.0 * t;
  const double eta_t = -(std::exp(2.0 * lam * w.K()) - std::exp(lam * beta)) * dbump / (bump * bump);
  const double c = 1.0 + 0.2 * x, c1 = 0.2;
  const double q = q_exact(x, t);
  const double qx = pi * std::cos(pi * x) * std::cos(t);
  const double qxx = -pi * pi * q;
  const double qt = -std::sin(pi * x) * std::sin(t);
  const double px = qx - s * eta_x * q;
  const double pxx = qxx - 2.0 * s * eta_x * qx - s * eta_xx * q + s * s * eta_x * eta_x * q;
  Oracle o;
  o.m1 = c * pxx + c1 * px + s * s * lam * lam * c * b1 * b1 * phi * phi * q + s * eta_t * q;
  o.m2 = (qt - s * eta_t * q) + 2.0 * s * lam * phi * c * b1 * px - 2.0 * s * lam * lam * phi * c * b1 * b1 * q;
  return o;
}

}  // namespace

TEST_CASE("Gram kernel matches brute-force quadrature") {
  for (double d : {-60.0, -4.5, -3.5, -1e-3, 0.0, 1e-3, 2.0, 3.99, 4.01, 30.0}) {
    const auto k = log_linear_gram(d);
    CHECK(std::exp(k[0]) == doctest::Approx(simpson(d, 0, 0)).epsilon(1e-10));
    CHECK(std::exp(k[1]) == doctest::Approx(simpson(d, 0, 1)).epsilon(1e-10));
    CHECK(std::exp(k[2]) == doctest::Approx(simpson(d, 1, 1)).epsilon(1e-10));
  }
  // far beyond double range: leading asymptotics e^δ{2/δ³, 1/δ², 1/δ}
  const double d = 1e6;
  const auto k = log_linear_gram(d);
  CHECK(k[0] - d == doctest::Approx(std::log(2.0 / (d * d * d))).epsilon(1e-5));
  CHECK(k[1] - d == doctest::Approx(std::log(1.0 / (d * d))).epsilon(1e-5));
  CHECK(k[2] - d == doctest::Approx(std::log(1.0 / d)).epsilon(1e-5));
  const auto km = log_linear_gram(-d);
  CHECK(km[2] == doctest::Approx(std::log(2.0 / (d * d * d))).epsilon(1e-5));
}

TEST_CASE("fitted inner product is exact for a linear profile in a thin layer") {
  // ∫_0^1 e^{-2a(1-x)} (1-x)² dx with a layer far thinner than a cell
  const Grid g = Grid::build(1, 8, Face::east);
  for (double a : {1.0, 1e3, 1e8}) {
    Field L = g.make_field(), f = g.make_field();
    for (int node = 0; node < g.node_count(); ++node) {
      const double y = 1.0 - g.coord(node, 0);
      L[node] = -2.0 * a * y;
      f[node] = y;
    }
    const double b = 2.0 * a;
    const double exact = (2.0 - std::exp(-b) * (b * b + 2.0 * b + 2.0)) / (b * b * b);
    const Scaled v = fitted_inner(g, L, f, f);
    CHECK(v.log_abs() == doctest::Approx(std::log(exact)).epsilon(1e-10));
  }
}

TEST_CASE("fitted inner product in 2D separates across axes") {
  const Grid g = Grid::build(2, 4, Face::north);
  Field L = g.make_field(), f = g.make_field(), one = g.make_field(1.0);
  for (int node = 0; node < g.node_count(); ++node) {
    L[node] = 3.0 * g.coord(node, 1);
    f[node] = g.coord(node, 0);
  }
  // ∫x dx · ∫e^{3y} dy
  const double exact = 0.5 * std::expm1(3.0) / 3.0;
  CHECK(fitted_inner(g, L, f, one).value() == doctest::Approx(exact).epsilon(1e-12));
  CHECK(fitted_inner(g, g.make_field(), one, one).value() == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("eta excess equals eta minus its floor") {
  const Grid g = Grid::build(1, 16, Face::east);
  const TimeGrid tg = TimeGrid::build(0.5, 2.0, 16);
  const WeightSet w = weights(g, tg, 1.0, 1.0, -0.5, 1.2);
  double lowest = 1e300;
  for (int i = 1; i < tg.steps(); ++i)
    for (int node = 0; node < g.node_count(); ++node) {
      CHECK(w.eta_excess(i, node) == doctest::Approx(w.eta(i, node) - w.eta_floor()).epsilon(1e-11));
      CHECK(w.eta_excess(i, node) >= 0.0);
      lowest = std::min(lowest, w.eta_excess(i, node));
    }
  CHECK(lowest == 0.0);
  CHECK(w.eta_excess(tg.mid_index(), g.cells()) == 0.0);
}

TEST_CASE("conjugated M1 and M2 converge to the chain-rule forms") {
  std::vector<double> e1, e2;
  for (int n : {16, 32, 64}) {
    const Grid g = Grid::build(1, n, Face::east);
    const TimeGrid tg = TimeGrid::build(0.5, 2.0, 4 * n);
    const WeightSet w = weights(g, tg, 1.5, 2.0);
    const WindowField q = sample(g, tg, q_exact);
    const auto m1 = apply_M1(q, ramp(g), w);
    const auto m2 = apply_M2(q, ramp(g), w);
    double d1 = 0.0, d2 = 0.0;
    for (int i : {tg.steps() / 4, tg.mid_index(), 3 * tg.steps() / 4}) {
      for (int node = 0; node < g.node_count(); ++node) {
        const Oracle o = oracle(w, g.coord(node, 0), tg.time(i), -1.0);
        CHECK(m1[i].log_scale[node] == -w.s() * w.eta_excess(i, node));
        d1 = std::max(d1, std::abs(m1[i].mantissa[node] - o.m1) / (1.0 + std::abs(o.m1)));
        d2 = std::max(d2, std::abs(m2[i].mantissa[node] - o.m2) / (1.0 + std::abs(o.m2)));
      }
    }
    e1.push_back(d1);
    e2.push_back(d2);
  }
  CHECK(e1[2] < 1e-2);
  CHECK(e2[2] < 1e-2);
  CHECK(std::log2(e1[1] / e1[2]) >= 0.9);
  CHECK(std::log2(e2[1] / e2[2]) >= 1.8);
}

TEST_CASE("conjugated and direct forms agree where the grid resolves the weight") {
  std::vector<double> err;
  for (int n : {16, 32, 64}) {
    const Grid g = Grid::build(1, n, Face::east);
    // a long window keeps e^{-sη} smooth on the grid
    const TimeGrid tg = TimeGrid::build(1.0, 11.0, 2 * n);
    const WeightSet w = weights(g, tg, 1.0, 1.0, -0.05, 1.1);
    const WindowField q = sample(g, tg, q_exact);
    double d = 0.0;
    for (auto which : {0, 1}) {
      const auto a = which ? apply_M2(q, ramp(g), w) : apply_M1(q, ramp(g), w);
      const auto b = which ? apply_M2(q, ramp(g), w, {M2Sign::plus, PsiMode::direct})
                           : apply_M1(q, ramp(g), w, {M2Sign::plus, PsiMode::direct});
      const int i = tg.mid_index();
      for (int node : g.interior_nodes()) {
        const double va = a[i].mantissa[node] * std::exp(a[i].log_scale[node]);
        const double vb = b[i].mantissa[node] * std::exp(b[i].log_scale[node]);
        d = std::max(d, std::abs(va - vb) / (1.0 + std::abs(va)));
      }
    }
    err.push_back(d);
  }
  CHECK(err[1] < err[0]);
  CHECK(std::log2(err[1] / err[2]) >= 1.5);
}

TEST_CASE("M2 pairing agrees with its integrated-by-parts form under refinement") {
  std::vector<double> rel;
  for (int n : {16, 32, 64}) {
    const Grid g = Grid::build(1, n, Face::east);
    const TimeGrid tg = TimeGrid::build(1.0, 11.0, 2 * n);
    const WeightSet w = weights(g, tg, 1.0, 1.0, -0.05, 1.1);
    const auto suite = carleman_test_suite(g, tg, 2, 7);
    const M2Pairing p = m2_pairing(suite[1], ramp(g), w);
    rel.push_back(std::abs(log_ratio(p.nodal, p.by_parts)));
    CHECK(p.by_parts.mantissa < 0.0);
  }
  CHECK(rel[2] < rel[0]);
  CHECK(rel[2] < 0.1);
}

TEST_CASE("estimate sides are homogeneous of degree two") {
  const Grid g = Grid::build(1, 16, Face::east);
  const TimeGrid tg = TimeGrid::build(0.5, 2.0, 32);
  const WeightSet w = weights(g, tg, 2.0, 4.0);
  const auto suite = carleman_test_suite(g, tg, 3, 11);
  for (const auto& q : suite) {
    WindowField q2 = q;
    for (auto& slice : q2)
      for (double& v : slice) v *= 2.0;
    const EstimateReport a = carleman_sides(q, ramp(g), w);
    const EstimateReport b = carleman_sides(q2, ramp(g), w);
    CHECK(std::isfinite(a.ratio));
    CHECK(a.ratio > 0.0);
    CHECK(std::abs(b.ratio / a.ratio - 1.0) <= 1e-12);
    CHECK(std::abs(log_ratio(b.lhs_total, a.lhs_total) - std::log(4.0)) <= 1e-12);
  }
}

TEST_CASE("zero test function gives empty sides") {
  const Grid g = Grid::build(1, 8, Face::east);
  const TimeGrid tg = TimeGrid::build(0.5, 2.0, 8);
  const WindowField q(tg.steps() + 1, g.make_field());
  const EstimateReport r = carleman_sides(q, ramp(g), weights(g, tg, 1.0, 1.0));
  CHECK(r.lhs_total.is_zero());
  CHECK(r.rhs_total.is_zero());
  CHECK(r.ratio == 0.0);
}

TEST_CASE("test functions must vanish on the lateral boundary") {
  const Grid g = Grid::build(1, 8, Face::east);
  const TimeGrid tg = TimeGrid::build(0.5, 2.0, 8);
  auto suite = carleman_test_suite(g, tg, 1, 3);
  suite[0][4][0] = 1e-3;
  CHECK_THROWS_AS(carleman_sides(suite[0], ramp(g), weights(g, tg, 1.0, 1.0)), ConfigError);
}

TEST_CASE("seeded suite is deterministic and vanishes on the boundary") {
  const Grid g = Grid::build(2, 8, Face::north);
  const TimeGrid tg = TimeGrid::build(0.5, 2.0, 8);
  const auto a = carleman_test_suite(g, tg, 4, 99);
  const auto b = carleman_test_suite(g, tg, 4, 99);
  const auto c = carleman_test_suite(g, tg, 4, 100);
  CHECK(a == b);
  CHECK(a != c);
  for (const auto& q : a)
    for (const auto& slice : q)
      for (int node : g.boundary_nodes()) CHECK(slice[node] == 0.0);
}

TEST_CASE("sweep layout and the s-trend of the max ratio") {
  const Grid g = Grid::build(1, 16, Face::east);
  const TimeGrid tg = TimeGrid::build(0.5, 2.0, 32);
  const auto suite = carleman_test_suite(g, tg, 5, 42);
  WeightParams base;
  base.x0 = {-1.0, -1.0};
  base.shape = BetaShape::planar;
  const CarlemanSweep sw = carleman_sweep(suite, ramp(g), g, tg, base, {1, 2, 4, 8}, {1, 2}, {}, 2);
  REQUIRE(sw.reports.size() == 40);
  REQUIRE(sw.summary.size() == 8);
  CHECK(sw.test_ids[9] == 1);
  CHECK(sw.reports[9].param("lambda") == 1.0);
  CHECK(sw.reports[9].param("s") == 2.0);
  CHECK(sw.summary[5].lambda == 2.0);
  CHECK(sw.summary[5].s == 2.0);
  for (int p = 0; p < 8; ++p) {
    CHECK(std::isfinite(sw.summary[p].max_ratio));
    if (p % 4 != 0) CHECK(sw.summary[p].max_log_ratio - sw.summary[p - 1].max_log_ratio <= std::log(1.1));
  }
  const CarlemanSweep serial = carleman_sweep(suite, ramp(g), g, tg, base, {1, 2, 4, 8}, {1, 2}, {}, 1);
  for (std::size_t k = 0; k < serial.reports.size(); ++k) CHECK(serial.reports[k].ratio == sw.reports[k].ratio);
}
