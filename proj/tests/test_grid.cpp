#include <cmath>
#include <numbers>
#include <random>

#include "carleman/errors.hpp"
#include "carleman/grid.hpp"
#include "carleman/time_grid.hpp"
#include "doctest.h"

using namespace carleman;
using std::numbers::pi;

namespace {

Field sample(const Grid& g, auto&& fn) {
  Field f = g.make_field();
  for (int node = 0; node < g.node_count(); ++node) {
    const double x = g.coord(node, 0);
    const double y = g.dimension() == 2 ? g.coord(node, 1) : 0.0;
    f[node] = fn(x, y);
  }
  return f;
}

double max_interior_error(const Grid& g, const Field& a, const Field& b) {
  double e = 0.0;
  for (int node : g.interior_nodes()) e = std::max(e, std::abs(a[node] - b[node]));
  return e;
}

}  // namespace

TEST_CASE("build_grid examples") {
  const Grid g1 = Grid::build(1, 10, Face::east);
  CHECK(g1.node_count() == 11);
  REQUIRE(g1.gamma0_nodes().size() == 1);
  CHECK(g1.coord(g1.gamma0_nodes()[0], 0) == 1.0);
  CHECK(g1.spacing() == doctest::Approx(0.1));

  const Grid g2 = Grid::build(2, 8, Face::east);
  CHECK(g2.node_count() == 81);
  CHECK(g2.gamma0_nodes().size() == 9);
  for (int node : g2.gamma0_nodes()) {
    CHECK(g2.coord(node, 0) == 1.0);
    CHECK(g2.normal(node)[0] == 1.0);
    CHECK(g2.normal(node)[1] == 0.0);
  }
  for (int node : g2.boundary_nodes()) {
    const auto nu = g2.normal(node);
    CHECK(nu[0] * nu[0] + nu[1] * nu[1] == 1.0);
  }
  CHECK(g2.boundary_nodes().size() == 32);
  CHECK(g2.interior_nodes().size() == 49);

  CHECK_THROWS_AS(Grid::build(1, 2, Face::east), ConfigError);
  CHECK_THROWS_AS(Grid::build(1, 8, Face::north), ConfigError);
  CHECK_THROWS_AS(Grid::build(3, 8, Face::east), ConfigError);
}

TEST_CASE("laplacian is exact on quadratics") {
  const Grid g = Grid::build(1, 10, Face::east);
  const Field f = sample(g, [](double x, double) { return x * x; });
  const Field lap = discrete_laplacian(f, g);
  for (int node = 0; node < g.node_count(); ++node) CHECK(lap[node] == doctest::Approx(2.0).epsilon(1e-10));

  const Grid g2 = Grid::build(2, 8, Face::east);
  const Field f2 = sample(g2, [](double x, double y) { return x * x + 3 * y * y - x * y; });
  const Field lap2 = discrete_laplacian(f2, g2);
  for (int node = 0; node < g2.node_count(); ++node) CHECK(lap2[node] == doctest::Approx(8.0).epsilon(1e-10));
}

TEST_CASE("divergence_flux with unit coefficient equals the laplacian bitwise") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int dim : {1, 2}) {
    const Grid g = Grid::build(dim, 9, Face::east);
    Field f = g.make_field();
    for (double& v : f) v = u(rng);
    const Field one = g.make_field(1.0);
    const Field a = divergence_flux(one, f, g);
    const Field b = discrete_laplacian(f, g);
    for (int node = 0; node < g.node_count(); ++node) CHECK(a[node] - b[node] == 0.0);
  }
}

TEST_CASE("divergence_flux on c = 1 + x, f = x") {
  for (int n : {8, 16, 32}) {
    const Grid g = Grid::build(1, n, Face::east);
    const Field c = sample(g, [](double x, double) { return 1.0 + x; });
    const Field f = sample(g, [](double x, double) { return x; });
    const Field d = divergence_flux(c, f, g);
    for (int node = 0; node < g.node_count(); ++node) CHECK(d[node] == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("divergence_flux converges at second order on a smooth variable-coefficient case") {
  // ∇·((1+x)∇ sin πx) = π cos πx - (1+x) π² sin πx
  std::vector<double> errors;
  for (int n : {16, 32, 64}) {
    const Grid g = Grid::build(1, n, Face::east);
    const Field c = sample(g, [](double x, double) { return 1.0 + x; });
    const Field f = sample(g, [](double x, double) { return std::sin(pi * x); });
    const Field exact = sample(g, [](double x, double) {
      return pi * std::cos(pi * x) - (1.0 + x) * pi * pi * std::sin(pi * x);
    });
    errors.push_back(max_interior_error(g, divergence_flux(c, f, g), exact));
  }
  CHECK(std::log2(errors[0] / errors[1]) >= 1.9);
  CHECK(std::log2(errors[1] / errors[2]) >= 1.9);
}

TEST_CASE("laplacian refinement order on sin") {
  for (int dim : {1, 2}) {
    std::vector<double> errors;
    for (int n : {8, 16, 32}) {
      const Grid g = Grid::build(dim, n, Face::east);
      const auto fn = [dim](double x, double y) { return std::sin(pi * x) * (dim == 2 ? std::cos(pi * y) : 1.0); };
      const Field f = sample(g, fn);
      const Field exact = sample(g, [&](double x, double y) { return -dim * pi * pi * fn(x, y); });
      errors.push_back(max_interior_error(g, discrete_laplacian(f, g), exact));
    }
    CHECK(std::log2(errors[0] / errors[1]) >= 1.9);
    CHECK(std::log2(errors[1] / errors[2]) >= 1.9);
  }
}

TEST_CASE("summation by parts: integral of divergence_flux matches boundary flux") {
  for (int dim : {1, 2}) {
    std::vector<double> gaps;
    for (int n : {16, 32, 64}) {
      const Grid g = Grid::build(dim, n, Face::east);
      const Field c = sample(g, [](double x, double y) { return 1.0 + 0.5 * x + 0.25 * y; });
      const Field f = sample(g, [dim](double x, double y) {
        return std::sin(pi * x) * (dim == 2 ? std::sin(pi * y) : 1.0);
      });
      const double volume = quadrature_space(divergence_flux(c, f, g), g);
      // Boundary integral of c ∂_ν f with face trapezoid weights (corners counted per face).
      double flux = 0.0;
      const double h = g.spacing();
      for (int node : g.boundary_nodes()) {
        for (Face face : g.faces_of(node)) {
          const int axis = face_axis(face);
          const double dnu = face_sign(face) * derivative_stencil(g, node, axis).apply(f);
          double w = 1.0;
          if (dim == 2) {
            const int k = g.axis_index(node, 1 - axis);
            w = (k == 0 || k == n) ? 0.5 * h : h;
          }
          flux += w * c[node] * dnu;
        }
      }
      gaps.push_back(std::abs(volume - flux));
    }
    CHECK(gaps[2] < gaps[0]);
    CHECK(gaps[1] / gaps[2] > 3.0);
  }
}

TEST_CASE("divergence_flux is linear in f and in c") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.5, 2.0);
  const Grid g = Grid::build(2, 8, Face::east);
  Field c1 = g.make_field(), c2 = g.make_field(), f1 = g.make_field(), f2 = g.make_field();
  for (int i = 0; i < g.node_count(); ++i) {
    c1[i] = u(rng);
    c2[i] = u(rng);
    f1[i] = u(rng) - 1.0;
    f2[i] = u(rng) - 1.0;
  }
  Field fsum = f1, csum = c1;
  for (int i = 0; i < g.node_count(); ++i) {
    fsum[i] = 2.0 * f1[i] - 3.0 * f2[i];
    csum[i] = c1[i] + c2[i];
  }
  const Field a = divergence_flux(c1, fsum, g);
  const Field a1 = divergence_flux(c1, f1, g), a2 = divergence_flux(c1, f2, g);
  const Field b = divergence_flux(csum, f1, g);
  const Field b2 = divergence_flux(c2, f1, g);
  for (int i = 0; i < g.node_count(); ++i) {
    CHECK(a[i] == doctest::Approx(2.0 * a1[i] - 3.0 * a2[i]).epsilon(1e-12).scale(1e3));
    CHECK(b[i] == doctest::Approx(a1[i] + b2[i]).epsilon(1e-12).scale(1e3));
  }
}

TEST_CASE("divergence_flux rejects non-positive coefficient") {
  const Grid g = Grid::build(1, 8, Face::east);
  Field c = g.make_field(1.0);
  c[3] = 0.0;
  CHECK_THROWS_AS(divergence_flux(c, g.make_field(), g), std::invalid_argument);
}

TEST_CASE("quadrature examples") {
  const Grid g = Grid::build(1, 10, Face::east);
  CHECK(quadrature_space(g.make_field(1.0), g) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(quadrature_space(sample(g, [](double x, double) { return x; }), g) == doctest::Approx(0.5).epsilon(1e-15));

  const Grid g32 = Grid::build(1, 32, Face::east);
  const double s = quadrature_space(sample(g32, [](double x, double) { return std::sin(pi * x); }), g32);
  CHECK(std::abs(s - 2.0 / pi) < 2e-3);

  const Grid g2 = Grid::build(2, 6, Face::east);
  CHECK(quadrature_space(sample(g2, [](double x, double y) { return x * y; }), g2) ==
        doctest::Approx(0.25).epsilon(1e-14));

  Field bad = g.make_field(1.0);
  bad[2] = std::nan("");
  CHECK_THROWS_AS(quadrature_space(bad, g), NumericalError);
}

TEST_CASE("spacetime quadrature integrates t*x exactly") {
  const Grid g = Grid::build(1, 8, Face::east);
  const std::vector<double> times{0.0, 0.25, 0.5, 1.0};
  std::vector<Field> slices;
  for (double t : times) slices.push_back(sample(g, [t](double x, double) { return t * x; }));
  CHECK(quadrature_spacetime(slices, times, g) == doctest::Approx(0.25).epsilon(1e-14));
}

TEST_CASE("time grid invariants") {
  const TimeGrid tg = TimeGrid::build(0.5, 2.0, 128);
  CHECK(tg.time(0) == 0.5);
  CHECK(tg.time(128) == 2.0);
  CHECK(tg.mid_index() == 64);
  CHECK(tg.mid_time() == doctest::Approx(1.25));
  CHECK(tg.skew(64) == 0.0);
  for (int i = 1; i < 128; ++i) {
    CHECK(tg.time(i) > tg.time(i - 1));
    CHECK(tg.bump(i) == tg.bump(128 - i));
  }
  CHECK_THROWS_AS(TimeGrid::build(0.5, 2.0, 127), ConfigError);
  CHECK_THROWS_AS(TimeGrid::build(1.0, 0.5, 4), ConfigError);

  const TimeAxis axis = make_time_axis(tg);
  CHECK(axis.times.front() == 0.0);
  CHECK(axis.times[axis.window_start] == 0.5);
  CHECK(axis.times.back() == 2.0);
  for (int k = 1; k < axis.window_start; ++k) CHECK(axis.times[k] - axis.times[k - 1] <= tg.dt() + 1e-15);

  const TimeAxis from_zero = make_time_axis(TimeGrid::build(0.0, 2.0, 128));
  CHECK(from_zero.window_start == 0);
  CHECK(from_zero.times.size() == 129);
}

TEST_CASE("time derivative stencil is exact on quadratics for nonuniform spacing") {
  const std::vector<double> t{0.0, 0.1, 0.3, 0.35, 0.5};
  for (int i = 0; i < 5; ++i) {
    const TimeStencil s = time_derivative_stencil(t, i);
    double d = 0.0;
    for (int k = 0; k < 3; ++k) {
      const double tk = t[s.first + k];
      d += s.coeff[k] * (tk * tk - 2.0 * tk);
    }
    CHECK(d == doctest::Approx(2.0 * t[i] - 2.0).epsilon(1e-12).scale(1.0));
  }
}
