#include <cmath>
#include <random>

#include "carleman/errors.hpp"
#include "carleman/weights.hpp"
#include "doctest.h"

using namespace carleman;

namespace {

WeightSet reference_1d(double lambda = 1.0, double s = 1.0, int m = 128, double t0 = 0.0, double T = 2.0,
                       double mw = 2.0) {
  const Grid g = Grid::build(1, 32, Face::east);
  WeightParams p;
  p.lambda = lambda;
  p.s = s;
  p.m = mw;
  p.x0 = {-1.0, 0.0};
  return WeightSet::build(g, TimeGrid::build(t0, T, m), p);
}

}  // namespace

TEST_CASE("closed-form construction on the unit interval") {
  const WeightSet w = reference_1d();
  const Grid& g = w.grid();
  CHECK(w.beta_tilde().front() == 1.0);
  CHECK(w.beta_tilde().back() == 4.0);
  CHECK(w.K() == 8.0);
  CHECK(w.beta().front() == 9.0);
  CHECK(w.beta().back() == 12.0);
  CHECK(w.C0() == 2.0);
  // west endpoint: outward normal -1, β̃'(0) = 2(0+1) = 2
  CHECK(w.normal_derivative_beta(0) == -2.0);
  CHECK(w.normal_derivative_beta(g.cells()) == 4.0);
}

TEST_CASE("midpoint values for t0=0, T=2") {
  const WeightSet w = reference_1d(1.0, 1.0, 64);
  const int mid = w.time().mid_index();
  CHECK(w.time().bump(mid) == 1.0);
  for (int node = 0; node < w.grid().node_count(); ++node) {
    const double b = w.beta()[node];
    CHECK(w.log_phi(mid, node) == doctest::Approx(b).epsilon(1e-15));
    CHECK(w.eta(mid, node) == doctest::Approx(std::exp(16.0) - std::exp(b)).epsilon(1e-13));
  }
}

TEST_CASE("anchor inside the domain is rejected") {
  const Grid g = Grid::build(1, 16, Face::east);
  WeightParams p;
  p.x0 = {0.5, 0.0};
  CHECK_THROWS_AS(WeightSet::build(g, TimeGrid::build(0.5, 2.0, 16), p), ConfigError);
  p.x0 = {2.0, 0.0};  // outside, but on the Γ₀ side: ∂_νβ̃ > 0 at x = 0
  CHECK_THROWS_AS(WeightSet::build(g, TimeGrid::build(0.5, 2.0, 16), p), ConfigError);
}

TEST_CASE("2D: radial beta fails with a single observed face, planar beta passes") {
  const Grid g = Grid::build(2, 16, Face::east);
  WeightParams p;
  p.x0 = {-1.0, -1.0};
  p.shape = BetaShape::radial;
  CHECK_THROWS_AS(WeightSet::build(g, TimeGrid::build(0.5, 2.0, 32), p), ConfigError);
  p.shape = BetaShape::planar;
  const WeightSet w = WeightSet::build(g, TimeGrid::build(0.5, 2.0, 32), p);
  CHECK(w.C0() == 2.0);
  for (int node : g.boundary_nodes()) {
    if (g.in_gamma0(node)) continue;
    for (Face f : g.faces_of(node)) CHECK(face_sign(f) * w.grad_beta().components[face_axis(f)][node] <= 0.0);
  }
}

TEST_CASE("weight_time_profile") {
  const TimeProfile p = weight_time_profile(TimeGrid::build(0.0, 2.0, 8));
  CHECK(p.argmin == 4);
  CHECK(p.values[4] == 1.0);
  CHECK(p.values[2] == doctest::Approx(4.0 / 3.0).epsilon(1e-15));
  CHECK(std::isinf(p.values[0]));

  const TimeProfile p1 = weight_time_profile(TimeGrid::build(0.0, 1.0, 10));
  CHECK(p1.min_value == doctest::Approx(4.0).epsilon(1e-14));

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 5.0);
  for (int k = 0; k < 200; ++k) {
    const double t0 = u(rng);
    const double T = t0 + 0.01 + u(rng);
    const int m = 2 * (1 + static_cast<int>(u(rng) * 20));
    const TimeGrid tg = TimeGrid::build(t0, T, m);
    const TimeProfile pr = weight_time_profile(tg);
    // brute-force scan of the closed form (t - t0)(T - t) on the node times
    int best = 1;
    for (int i = 1; i < m; ++i) {
      if ((tg.time(i) - t0) * (T - tg.time(i)) > (tg.time(best) - t0) * (T - tg.time(best)) * (1 + 1e-12)) best = i;
    }
    CHECK(pr.argmin == tg.mid_index());
    CHECK(best == tg.mid_index());
  }
}

TEST_CASE("pointwise invariants of the tabulated weights") {
  for (double lambda : {1.0, 2.0, 4.0}) {
    const WeightSet w = reference_1d(lambda, 8.0, 32, 0.5, 2.0);
    for (int i = 1; i < w.time().steps(); ++i) {
      for (int node = 0; node < w.grid().node_count(); ++node) {
        CHECK(w.eta(i, node) > 0.0);
        CHECK(std::isfinite(w.log_phi(i, node)));
        const double log_e = -2.0 * w.s() * w.eta(i, node);
        CHECK(log_e <= 0.0);
      }
    }
    const int mid = w.time().mid_index();
    for (int node = 0; node < w.grid().node_count(); ++node) {
      CHECK(w.dt_eta(mid, node) == 0.0);
      CHECK(w.dt_phi(mid, node) == 0.0);
    }
  }
}

TEST_CASE("weights blow up towards the window ends") {
  const WeightSet w = reference_1d(1.0, 1.0, 64, 0.5, 2.0);
  const int node = 5;
  for (int i = 1; i < w.time().mid_index(); ++i) {
    CHECK(w.eta(i, node) > w.eta(i + 1, node));
    CHECK(w.log_phi(i, node) > w.log_phi(i + 1, node));
  }
}

TEST_CASE("monotonicity in K and lambda") {
  const WeightSet a = reference_1d(1.0, 1.0, 16, 0.5, 2.0, 2.0);
  const WeightSet b = reference_1d(1.0, 1.0, 16, 0.5, 2.0, 3.0);
  const WeightSet l2 = reference_1d(2.0, 1.0, 16, 0.5, 2.0, 2.0);
  for (int i = 1; i < 16; ++i) {
    for (int node = 0; node < a.grid().node_count(); ++node) {
      CHECK(b.eta(i, node) >= a.eta(i, node));
      CHECK(l2.log_phi(i, node) > a.log_phi(i, node));
    }
  }
}

TEST_CASE("closed-form time derivatives match centered differences at second order") {
  // Probe t = 1.625 on windows (0.5, 2) with m = 24, 48, 96 (index 9, 18, 36).
  std::vector<double> err_phi, err_eta;
  int probe = 9;
  for (int m : {24, 48, 96}) {
    const WeightSet w = reference_1d(1.0, 1.0, m, 0.5, 2.0);
    const double dt = w.time().dt();
    const int i = w.time().mid_index() + probe;
    double ep = 0.0, ee = 0.0;
    for (int node = 0; node < w.grid().node_count(); ++node) {
      const double fd_phi = (w.phi(i + 1, node) - w.phi(i - 1, node)) / (2 * dt);
      const double fd_eta = (w.eta(i + 1, node) - w.eta(i - 1, node)) / (2 * dt);
      ep = std::max(ep, std::abs(fd_phi - w.dt_phi(i, node)) / std::abs(w.dt_phi(i, node)));
      ee = std::max(ee, std::abs(fd_eta - w.dt_eta(i, node)) / std::abs(w.dt_eta(i, node)));
    }
    err_phi.push_back(ep);
    err_eta.push_back(ee);
    probe *= 2;
  }
  for (int k = 0; k < 2; ++k) {
    CHECK(std::log2(err_phi[k] / err_phi[k + 1]) >= 1.9);
    CHECK(std::log2(err_eta[k] / err_eta[k + 1]) >= 1.9);
  }
}

TEST_CASE("weight_bounds_check") {
  const WeightSet w = reference_1d(1.0, 1.0, 128, 0.5, 2.0);
  const WeightBounds b = weight_bounds_check(w);
  CHECK(b.finite);
  CHECK(b.sup_dt_eta_over_phi2 > 0.0);
  // At T′ the ratio is exactly zero.
  const int mid = w.time().mid_index();
  for (int node = 0; node < w.grid().node_count(); ++node) CHECK(std::abs(w.dt_eta(mid, node)) / std::exp(2 * w.log_phi(mid, node)) == 0.0);

  const WeightBounds fine = weight_bounds_check(reference_1d(1.0, 1.0, 256, 0.5, 2.0));
  CHECK(std::abs(fine.sup_dt_eta_over_phi2 / b.sup_dt_eta_over_phi2 - 1.0) < 0.05);
  CHECK(std::abs(fine.sup_dt_phi_over_phi3 / b.sup_dt_phi_over_phi3 - 1.0) < 0.05);
  CHECK(std::abs(fine.sup_phi_inv_over_phi / b.sup_phi_inv_over_phi - 1.0) < 0.05);
  CHECK(std::abs(fine.sup_phi_inv2_over_phi_inv / b.sup_phi_inv2_over_phi_inv - 1.0) < 0.05);
}

TEST_CASE("parameter preconditions") {
  const Grid g = Grid::build(1, 8, Face::east);
  const TimeGrid tg = TimeGrid::build(0.5, 2.0, 8);
  WeightParams p;
  p.lambda = 0.5;
  CHECK_THROWS_AS(WeightSet::build(g, tg, p), ConfigError);
  p = {};
  p.s = 0.5;
  CHECK_THROWS_AS(WeightSet::build(g, tg, p), ConfigError);
  p = {};
  p.m = 1.0;
  CHECK_THROWS_AS(WeightSet::build(g, tg, p), ConfigError);
}
