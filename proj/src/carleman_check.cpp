#include "carleman/carleman_check.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>

#include "carleman/errors.hpp"
#include "carleman/observe.hpp"
#include "carleman/parallel.hpp"
#include "carleman/time_grid.hpp"

namespace carleman {

namespace {

void check_window_field(const WindowField& q, const WeightSet& w, const char* what) {
  if (static_cast<int>(q.size()) != w.time().steps() + 1)
    throw std::invalid_argument(std::string(what) + ": expected one slice per window node");
  for (const auto& slice : q) w.grid().check_field(slice, what);
}

Field squared_norms(const VectorField& v) { return squared_magnitude(v); }

WindowField window_time_derivative(const WindowField& q, const TimeGrid& window) {
  return time_derivative(SpaceTimeField{window.times(), q}).values;
}

/// Per-node pieces that do not depend on the slice.
struct Geometry {
  VectorField grad_beta;
  Field grad_beta2;  // |∇β|²
  Field div_c_grad_beta;
};

Geometry geometry(const Field& c, const WeightSet& w) {
  Geometry g;
  g.grad_beta = w.grad_beta();
  g.grad_beta2 = squared_norms(g.grad_beta);
  g.div_c_grad_beta = divergence_flux(c, w.beta(), w.grid());
  return g;
}

std::vector<ScaledField> empty_slices(const WeightSet& w) {
  return std::vector<ScaledField>(w.time().steps() + 1, ScaledField::zeros(w.grid().node_count()));
}

double dot_at(const VectorField& a, const VectorField& b, int node) {
  double d = 0.0;
  for (int k = 0; k < a.dimension(); ++k) d += a.components[k][node] * b.components[k][node];
  return d;
}

enum class Which { m1, m2 };

std::vector<ScaledField> conjugated(Which which, const WindowField& q, const Field& c, const WeightSet& w,
                                    M2Sign sign) {
  const Grid& grid = w.grid();
  const Geometry geo = geometry(c, w);
  const double s = w.s(), lambda = w.lambda();
  const double pm = sign == M2Sign::plus ? 1.0 : -1.0;
  const WindowField dq = which == Which::m2 ? window_time_derivative(q, w.time()) : WindowField{};
  auto out = empty_slices(w);
  for (int i = 1; i < w.time().steps(); ++i) {
    const VectorField gq = discrete_gradient(q[i], grid);
    const Field Dq = which == Which::m1 ? divergence_flux(c, q[i], grid) : Field{};
    auto& res = out[i];
    for (int node = 0; node < grid.node_count(); ++node) {
      const double a = s * lambda * w.phi(i, node);
      const double cg2 = c[node] * geo.grad_beta2[node];
      const double bq = dot_at(geo.grad_beta, gq, node);
      const double qv = q[i][node];
      double v;
      if (which == Which::m1) {
        v = Dq[node] + 2.0 * a * c[node] * bq +
            qv * (2.0 * a * a * cg2 + a * geo.div_c_grad_beta[node] + lambda * a * cg2 + s * w.dt_eta(i, node));
      } else {
        v = dq[i][node] - s * w.dt_eta(i, node) * qv + pm * 2.0 * a * c[node] * (bq + a * qv * geo.grad_beta2[node]) -
            2.0 * lambda * a * cg2 * qv;
      }
      res.mantissa[node] = v;
      res.log_scale[node] = -s * w.eta_excess(i, node);
    }
  }
  return out;
}

Scaled at(const ScaledField& f, int node) { return {f.mantissa[node], f.log_scale[node]}; }

std::vector<ScaledField> direct(Which which, const WindowField& q, const Field& c, const WeightSet& w, M2Sign sign) {
  const Grid& grid = w.grid();
  const Geometry geo = geometry(c, w);
  const double s = w.s(), lambda = w.lambda();
  const double pm = sign == M2Sign::plus ? 1.0 : -1.0;
  const auto psi = make_psi(q, w);
  const auto times = w.time().times();
  auto out = empty_slices(w);
  for (int i = 1; i < w.time().steps(); ++i) {
    auto& res = out[i];
    const TimeStencil ts = time_derivative_stencil(times, i);
    for (int node = 0; node < grid.node_count(); ++node) {
      const double phi = w.phi(i, node);
      Scaled v;
      if (which == Which::m1) {
        const Scaled div = apply_scaled(flux_stencil(grid, c, node), psi[i]);
        const double zero = s * s * lambda * lambda * c[node] * geo.grad_beta2[node] * phi * phi + s * w.dt_eta(i, node);
        const double coeffs[2] = {1.0, zero};
        const Scaled terms[2] = {div, at(psi[i], node)};
        v = linear_combination(coeffs, terms);
      } else {
        std::vector<double> coeffs;
        std::vector<Scaled> terms;
        for (int k = 0; k < 3; ++k) {
          coeffs.push_back(ts.coeff[k]);
          terms.push_back(at(psi[ts.first + k], node));
        }
        for (int ax = 0; ax < grid.dimension(); ++ax) {
          coeffs.push_back(pm * 2.0 * s * lambda * phi * c[node] * geo.grad_beta.components[ax][node]);
          terms.push_back(apply_scaled(derivative_stencil(grid, node, ax), psi[i]));
        }
        coeffs.push_back(-2.0 * s * lambda * lambda * phi * c[node] * geo.grad_beta2[node]);
        terms.push_back(at(psi[i], node));
        v = linear_combination(coeffs, terms);
      }
      res.mantissa[node] = v.mantissa;
      res.log_scale[node] = v.log_scale;
    }
  }
  return out;
}

}  // namespace

std::vector<ScaledField> make_psi(const WindowField& q, const WeightSet& w) {
  check_window_field(q, w, "make_psi");
  auto out = empty_slices(w);
  for (int i = 1; i < w.time().steps(); ++i) {
    out[i].mantissa = q[i];
    for (int node = 0; node < w.grid().node_count(); ++node) out[i].log_scale[node] = -w.s() * w.eta_excess(i, node);
  }
  return out;
}

std::vector<ScaledField> apply_M1(const WindowField& q, const Field& c, const WeightSet& w,
                                  const CarlemanOptions& opt) {
  check_window_field(q, w, "apply_M1");
  return opt.mode == PsiMode::conjugated ? conjugated(Which::m1, q, c, w, opt.sign)
                                         : direct(Which::m1, q, c, w, opt.sign);
}

std::vector<ScaledField> apply_M2(const WindowField& q, const Field& c, const WeightSet& w,
                                  const CarlemanOptions& opt) {
  check_window_field(q, w, "apply_M2");
  return opt.mode == PsiMode::conjugated ? conjugated(Which::m2, q, c, w, opt.sign)
                                         : direct(Which::m2, q, c, w, opt.sign);
}

M2Pairing m2_pairing(const WindowField& q, const Field& c, const WeightSet& w, PsiMode mode) {
  const Grid& grid = w.grid();
  const auto m2 = apply_M2(q, c, w, {M2Sign::plus, mode});
  const Geometry geo = geometry(c, w);
  const double s = w.s(), lambda = w.lambda();
  M2Pairing out;
  for (int i = 1; i < w.time().steps(); ++i) {
    const Field& L = w.log_time_weight(i, 0.0);
    // ψ = e^{-s(η-η*)} q, M₂ψ = m e^{log_scale}
    Field r = grid.make_field(), weighted = grid.make_field();
    for (int node = 0; node < grid.node_count(); ++node) {
      r[node] = m2[i].log_scale[node] + s * w.eta_excess(i, node);
      weighted[node] = -s * lambda * w.phi(i, node) * q[i][node] *
                       (3.0 * lambda * c[node] * geo.grad_beta2[node] + geo.div_c_grad_beta[node]);
    }
    out.nodal += fitted_inner(grid, L, m2[i].mantissa, q[i], r);
    out.by_parts += fitted_inner(grid, L, q[i], weighted);
  }
  return out;
}

EstimateReport carleman_sides(const WindowField& q, const Field& c, const WeightSet& w, const CarlemanOptions& opt) {
  check_window_field(q, w, "carleman_sides");
  const Grid& grid = w.grid();
  double scale = 0.0;
  for (const auto& slice : q)
    for (double v : slice) scale = std::max(scale, std::abs(v));
  for (const auto& slice : q) {
    for (int node : grid.boundary_nodes()) {
      if (std::abs(slice[node]) > 1e-14 * scale)
        throw ConfigError("carleman_sides: test function does not vanish on the lateral boundary (node " +
                          std::to_string(node) + ")");
    }
  }

  const double s = w.s(), lambda = w.lambda();
  const TimeGrid& window = w.time();
  EstimateReport rep;
  rep.name = "carleman";
  rep.set("s", s);
  rep.set("lambda", lambda);
  rep.set("n", grid.cells());
  rep.set("m", window.steps());

  rep.add_lhs("M1", weighted_norm_spacetime(apply_M1(q, c, w, opt), w));
  rep.add_lhs("M2", weighted_norm_spacetime(apply_M2(q, c, w, opt), w));
  std::vector<VectorField> grads;
  grads.reserve(q.size());
  for (const auto& slice : q) grads.push_back(discrete_gradient(slice, grid));
  rep.add_lhs("grad", weighted_norm_spacetime(grads, w, 1.0) * (s * lambda * lambda));
  rep.add_lhs("zero", weighted_norm_spacetime(q, w, 3.0) * (s * s * s * std::pow(lambda, 4)));

  rep.add_rhs("boundary", weighted_boundary_norm(normal_trace(q, grid, window), w) * (s * lambda));
  const WindowField dq = window_time_derivative(q, window);
  WindowField residual(q.size());
  for (std::size_t i = 0; i < q.size(); ++i) {
    residual[i] = divergence_flux(c, q[i], grid);
    for (int node = 0; node < grid.node_count(); ++node) residual[i][node] = dq[i][node] - residual[i][node];
  }
  rep.add_rhs("residual", weighted_norm_spacetime(residual, w, 0.0));
  rep.finalize();
  return rep;
}

std::vector<WindowField> carleman_test_suite(const Grid& grid, const TimeGrid& window, int count, std::uint64_t seed) {
  using std::numbers::pi;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> coef;
  std::uniform_int_distribution<int> mode(1, 3);
  std::vector<WindowField> suite;
  for (int id = 0; id < count; ++id) {
    int k[2] = {mode(rng), mode(rng)};
    double a[4], b[4];
    for (int j = 0; j < 4; ++j) {
      a[j] = coef(rng);
      b[j] = coef(rng);
    }
    Field shape = grid.make_field();
    for (int node = 0; node < grid.node_count(); ++node) {
      double v = 1.0;
      for (int ax = 0; ax < grid.dimension(); ++ax) v *= std::sin(k[ax] * pi * grid.coord(node, ax));
      shape[node] = grid.is_boundary(node) ? 0.0 : v;
    }
    WindowField q;
    for (int i = 0; i <= window.steps(); ++i) {
      const double tau = static_cast<double>(i) / window.steps();
      double wt = a[0];
      for (int j = 1; j < 4; ++j) wt += a[j] * std::cos(j * pi * tau) + b[j] * std::sin(j * pi * tau);
      Field slice = shape;
      for (double& v : slice) v *= wt;
      q.push_back(std::move(slice));
    }
    suite.push_back(std::move(q));
  }
  return suite;
}

CarlemanSweep carleman_sweep(const std::vector<WindowField>& suite, const Field& c, const Grid& grid,
                             const TimeGrid& window, const WeightParams& base, const std::vector<double>& s_list,
                             const std::vector<double>& lambda_list, const CarlemanOptions& opt, int jobs) {
  if (suite.empty() || s_list.empty() || lambda_list.empty())
    throw std::invalid_argument("carleman_sweep: empty suite or parameter list");
  std::vector<WeightSet> weights;
  for (double lambda : lambda_list) {
    WeightParams p = base;
    p.lambda = lambda;
    p.s = s_list.front();
    const WeightSet w = WeightSet::build(grid, window, p);
    for (double s : s_list) weights.push_back(w.with_s(s));
  }
  const int per_test = static_cast<int>(weights.size());
  const int total = static_cast<int>(suite.size()) * per_test;
  CarlemanSweep out;
  out.reports.resize(total);
  out.test_ids.resize(total);
  parallel_for(total, jobs, [&](int task) {
    const int test = task / per_test;
    out.reports[task] = carleman_sides(suite[test], c, weights[task % per_test], opt);
    out.test_ids[task] = test;
  });

  for (int p = 0; p < per_test; ++p) {
    SweepPoint pt;
    pt.lambda = weights[p].lambda();
    pt.s = weights[p].s();
    pt.max_log_ratio = -std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < suite.size(); ++t) {
      const auto& rep = out.reports[t * per_test + p];
      if (pt.argmax < 0 || rep.log_ratio > pt.max_log_ratio) {
        pt.max_log_ratio = rep.log_ratio;
        pt.max_ratio = rep.ratio;
        pt.argmax = static_cast<int>(t);
      }
    }
    out.summary.push_back(pt);
  }
  return out;
}

}  // namespace carleman
