#include "carleman/stability.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <random>
#include <stdexcept>

#include "carleman/errors.hpp"
#include "carleman/parallel.hpp"
#include "carleman/poincare_check.hpp"

namespace carleman {

bool in_boundary_layer(const Grid& grid, int node) { return grid.boundary_distance(node) < 2; }

Field project_admissible(const Field& gamma, const Grid& grid) {
  grid.check_field(gamma, "project_admissible");
  Field out = gamma;
  for (int node = 0; node < grid.node_count(); ++node) {
    if (in_boundary_layer(grid, node)) out[node] = 0.0;
  }
  return out;
}

double admissibility_defect(const Field& gamma, const Grid& grid) {
  grid.check_field(gamma, "admissibility_defect");
  double d = 0.0;
  for (int node : grid.boundary_nodes()) {
    d = std::max(d, std::abs(gamma[node]));
    // every face the node lies on, not just the primary normal
    for (Face f : grid.faces_of(node)) {
      const int a = face_axis(f);
      const int inner = node - face_sign(f) * grid.stride(a);
      d = std::max(d, std::abs(gamma[inner] - gamma[node]) / grid.spacing());
    }
  }
  return d;
}

CoefficientPair make_coefficient_pair(const Field& c, const Field& c_tilde, const Grid& grid) {
  grid.check_field(c, "coefficient pair");
  grid.check_field(c_tilde, "coefficient pair");
  CoefficientPair p{c, c_tilde, grid.make_field()};
  for (int node = 0; node < grid.node_count(); ++node) {
    if (!(c[node] > 0.0) || !(c_tilde[node] > 0.0))
      throw ConfigError("coefficient pair: conductivity must be positive (node " + std::to_string(node) + ")");
    p.gamma[node] = c[node] - c_tilde[node];
  }
  const double defect = admissibility_defect(p.gamma, grid);
  if (defect >= 1e-12)
    throw ConfigError("coefficient pair: c - c~ does not vanish to first order on the boundary (defect " +
                      format_double(defect) + ")");
  return p;
}

double h1_norm_squared(const Field& v, const Grid& grid) {
  const auto& qw = grid.quadrature_weights();
  double sum = 0.0;
  for (int node = 0; node < grid.node_count(); ++node) sum += qw[node] * v[node] * v[node];
  for (const auto& comp : discrete_gradient(v, grid).components) {
    for (int node = 0; node < grid.node_count(); ++node) sum += qw[node] * comp[node] * comp[node];
  }
  return sum;
}

StabilityReport stability_sides(const CoefficientPair& pair, const StabilitySetup& setup, const WeightSet& w) {
  return stability_sides(pair, solve_heat({pair.c_tilde, setup.data}, setup.grid, setup.axis), setup, w);
}

StabilityReport stability_sides(const CoefficientPair& pair, const SpaceTimeField& q_tilde, const StabilitySetup& setup,
                                const WeightSet& w) {
  const Grid& grid = setup.grid;
  const TimeAxis& axis = setup.axis;
  const int mid = axis.window.mid_index();
  const Field& qt_mid = q_tilde.values.at(axis.mid_full_index());
  const TransportBase base = make_transport_base(qt_mid, w);
  if (!(base.min_abs_beta_dot_grad > 1e-12))
    throw ConfigError("stability: grad(beta).grad(q~(T')) vanishes; the reference solution is degenerate");

  const TwinSolution twin = solve_twin(pair.c, q_tilde, setup.data, grid, axis);
  const Snapshot du = snapshot_of(twin.u.values[axis.mid_full_index()], grid, pair.c);

  StabilityReport out;
  EstimateReport& wr = out.weighted;
  wr.name = "stability";
  wr.set("s", w.s());
  wr.set("lambda", w.lambda());
  wr.add_lhs("gamma", weighted_norm_space(pair.gamma, w, 1.0, mid));
  wr.add_lhs("grad_gamma", weighted_norm_space(discrete_gradient(pair.gamma, grid), w, 1.0, mid));
  wr.add_rhs("boundary", weighted_boundary_norm(normal_trace(twin.y, grid, axis), w, true));
  wr.add_rhs("grad_lap_u", weighted_norm_space(du.grad_lap_q, w, 0.0, mid));
  wr.add_rhs("lap_u", weighted_norm_space(du.lap_q, w, 0.0, mid));
  wr.add_rhs("grad_u", weighted_norm_space(du.grad_q, w, 0.0, mid));
  wr.finalize();

  const ObservationDistance d = observation_distance(extract_observations(twin.q, grid, axis, pair.c),
                                                     extract_observations(q_tilde, grid, axis, pair.c_tilde), grid,
                                                     axis.window);
  EstimateReport& pr = out.plain;
  pr.name = "stability_plain";
  pr.add_lhs("h1_gamma", Scaled::from_double(h1_norm_squared(pair.gamma, grid)));
  pr.add_rhs("flux", Scaled::from_double(d.flux));
  pr.add_rhs("grad_lap", Scaled::from_double(d.grad_lap));
  pr.add_rhs("lap", Scaled::from_double(d.lap));
  pr.add_rhs("grad", Scaled::from_double(d.grad));
  pr.finalize();
  return out;
}

std::vector<FamilyMember> perturbation_family(const Grid& grid, const std::vector<double>& amplitudes) {
  using std::numbers::pi;
  std::vector<FamilyMember> out;
  for (int k = 0; k <= 3; ++k) {
    Field shape = grid.make_field();
    for (int node = 0; node < grid.node_count(); ++node) {
      double v = 1.0;
      for (int a = 0; a < grid.dimension(); ++a) {
        const double x = grid.coord(node, a);
        v *= x * x * (1.0 - x) * (1.0 - x) * (k == 0 ? 1.0 : std::sin(k * pi * x));
      }
      shape[node] = v;
    }
    shape = project_admissible(shape, grid);
    for (double eps : amplitudes) {
      FamilyMember m{k == 0 ? "poly" : "sin" + std::to_string(k), eps, shape};
      for (double& v : m.gamma) v *= eps;
      out.push_back(std::move(m));
    }
  }
  return out;
}

StabilitySweep stability_sweep(const std::vector<FamilyMember>& family, const Field& c_tilde,
                               const StabilitySetup& setup, const WeightSet& w, int jobs) {
  StabilitySweep sw;
  sw.members = family;
  const int count = static_cast<int>(family.size());
  sw.reports.resize(count);
  sw.included.assign(count, false);
  for (int i = 0; i < count; ++i) {
    bool zero = true;
    for (double v : family[i].gamma) zero = zero && v == 0.0;
    if (zero) {
      sw.notes.push_back("member " + std::to_string(i) + " (" + family[i].shape + ", eps " +
                         format_double(family[i].epsilon) + ") excluded: zero perturbation gives 0/0");
    } else {
      sw.included[i] = true;
    }
  }
  const SpaceTimeField q_tilde = solve_heat({c_tilde, setup.data}, setup.grid, setup.axis);
  parallel_for(count, jobs, [&](int i) {
    if (!sw.included[i]) return;
    Field c = c_tilde;
    for (std::size_t k = 0; k < c.size(); ++k) c[k] += family[i].gamma[k];
    sw.reports[i] = stability_sides(make_coefficient_pair(c, c_tilde, setup.grid), q_tilde, setup, w);
  });

  std::map<std::string, std::vector<std::pair<double, double>>> points;
  std::vector<std::string> order;
  for (int i = 0; i < count; ++i) {
    if (!sw.included[i]) continue;
    const StabilityReport& r = sw.reports[i];
    if (sw.argmax < 0 || r.weighted.log_ratio > sw.reports[sw.argmax].weighted.log_ratio) sw.argmax = i;
    if (sw.argmax_plain < 0 || r.plain.log_ratio > sw.reports[sw.argmax_plain].plain.log_ratio) sw.argmax_plain = i;
    if (!points.count(family[i].shape)) order.push_back(family[i].shape);
    points[family[i].shape].emplace_back(r.plain.rhs_total.log_abs(), r.weighted.lhs_total.log_abs());
  }
  if (sw.argmax >= 0) sw.max_ratio = sw.reports[sw.argmax].weighted.ratio;
  if (sw.argmax_plain >= 0) sw.max_plain_ratio = sw.reports[sw.argmax_plain].plain.ratio;
  for (const auto& shape : order) {
    const auto& p = points[shape];
    ShapeSlope s{shape, std::numeric_limits<double>::quiet_NaN(), static_cast<int>(p.size())};
    if (p.size() >= 2) {
      double mx = 0.0, my = 0.0;
      for (const auto& [x, y] : p) {
        mx += x;
        my += y;
      }
      mx /= p.size();
      my /= p.size();
      double sxy = 0.0, sxx = 0.0;
      for (const auto& [x, y] : p) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
      }
      s.slope = sxy / sxx;
    }
    sw.slopes.push_back(s);
  }
  return sw;
}

CsvTable sweep_table(const StabilitySweep& sweep) {
  CsvTable t;
  t.header = {"member", "shape", "epsilon", "lhs", "rhs_weighted", "rhs_plain", "ratio", "ratio_plain"};
  for (std::size_t i = 0; i < sweep.members.size(); ++i) {
    if (!sweep.included[i]) continue;
    const StabilityReport& r = sweep.reports[i];
    t.add_row({std::to_string(i), sweep.members[i].shape, format_double(sweep.members[i].epsilon),
               format_double(r.weighted.lhs_total.value()), format_double(r.weighted.rhs_total.value()),
               format_double(r.plain.rhs_total.value()), format_double(r.weighted.ratio),
               format_double(r.plain.ratio)});
  }
  return t;
}

// ---------------------------------------------------------------------------
// inverse problem

namespace {

Field prior_of(const InverseConfig& cfg, const Grid& grid) {
  if (cfg.prior.empty()) return grid.make_field(1.0);
  grid.check_field(cfg.prior, "inverse prior");
  return cfg.prior;
}

void check_config(const InverseConfig& cfg) {
  if (!(cfg.alpha >= 0.0)) throw ConfigError("inverse: alpha must be >= 0");
  if (!(cfg.armijo > 0.0 && cfg.armijo < 1.0)) throw ConfigError("inverse: Armijo constant must lie in (0,1)");
  if (!(cfg.shrink > 0.0 && cfg.shrink < 1.0)) throw ConfigError("inverse: shrink factor must lie in (0,1)");
  if (!(cfg.gradient_tolerance > 0.0)) throw ConfigError("inverse: gradient tolerance must be > 0");
  if (cfg.max_iterations < 0) throw ConfigError("inverse: max iterations must be >= 0");
  if (!(cfg.noise >= 0.0)) throw ConfigError("inverse: noise level must be >= 0");
  if (!(cfg.c_min > 0.0)) throw ConfigError("inverse: c_min must be > 0");
}

// (α/2)(vᵀWv + Σ_a (G_a v)ᵀ W (G_a v)) and its gradient, v = c - prior
double regularization(const Field& v, const Grid& grid, double alpha, Field* grad) {
  const auto& qw = grid.quadrature_weights();
  double value = 0.0;
  for (int node = 0; node < grid.node_count(); ++node) {
    value += qw[node] * v[node] * v[node];
    if (grad) (*grad)[node] += alpha * qw[node] * v[node];
  }
  for (int a = 0; a < grid.dimension(); ++a) {
    for (int node = 0; node < grid.node_count(); ++node) {
      const Stencil st = derivative_stencil(grid, node, a);
      const double g = st.apply(v);
      value += qw[node] * g * g;
      if (grad) {
        for (const auto& e : st.entries()) (*grad)[e.node] += alpha * qw[node] * g * e.coeff;
      }
    }
  }
  return 0.5 * alpha * value;
}

struct FluxMisfit {
  double value = 0.0;
  // residual[k][j] · time weight · face weight, for the window slice k+1 and Γ₀ node j
  std::vector<std::vector<double>> weighted_residual;
};

FluxMisfit flux_misfit(const SpaceTimeField& q, const ObservationSet& data, const StabilitySetup& setup) {
  const Grid& grid = setup.grid;
  const BoundaryTrace model = normal_trace(time_derivative(q), grid, setup.axis);
  if (model.slices != data.flux.slices || model.gamma0_nodes != data.flux.gamma0_nodes)
    throw ConfigError("inverse: observation trace does not match the configured grid and window");
  const auto tw = trapezoid_weights(setup.axis.window.times());
  const auto& fw = grid.gamma0_weights();
  FluxMisfit m;
  m.weighted_residual.resize(model.values.size());
  for (std::size_t k = 0; k < model.values.size(); ++k) {
    m.weighted_residual[k].resize(fw.size());
    for (std::size_t j = 0; j < fw.size(); ++j) {
      const double r = model.values[k][j] - data.flux.values[k][j];
      m.value += 0.5 * tw[model.slices[k]] * fw[j] * r * r;
      m.weighted_residual[k][j] = tw[model.slices[k]] * fw[j] * r;
    }
  }
  return m;
}

// Σ_rows μ_r ∂/∂c [D(c) f]_r with the arithmetic-mean face form, accumulated into grad
void add_flux_coefficient_adjoint(const Grid& grid, const FluxOperator& op, const std::vector<double>& mu,
                                  const Field& f, double scale, Field& grad) {
  const double inv_h2 = 1.0 / (grid.spacing() * grid.spacing());
  const auto& nodes = op.nodes();
  for (std::size_t r = 0; r < nodes.size(); ++r) {
    const int i = nodes[r];
    const double m = scale * mu[r] * 0.5 * inv_h2;
    for (int a = 0; a < grid.dimension(); ++a) {
      for (int side : {-1, 1}) {
        const int j = i + side * grid.stride(a);
        const double t = m * (f[j] - f[i]);
        grad[i] += t;
        grad[j] += t;
      }
    }
  }
}

// out += Sᵀ r for the per-node stencils S(node)
template <class StencilAt>
void add_transpose(const Grid& grid, StencilAt stencil_at, const Field& r, Field& out) {
  for (int node = 0; node < grid.node_count(); ++node) {
    if (r[node] == 0.0) continue;
    for (const auto& e : stencil_at(node).entries()) out[e.node] += e.coeff * r[node];
  }
}

// ½ Σ_terms ‖S q(T′) - d‖² (trapezoid) for S ∈ {∇Δ, Δ, ∇}; ∂/∂q(T′) added into grad if given
double snapshot_misfit(const Field& q_mid, const ObservationSet& data, const Grid& grid, Field* grad) {
  const auto& qw = grid.quadrature_weights();
  const auto lap_at = [&](int node) { return laplacian_stencil(grid, node); };
  double value = 0.0;
  Field r(q_mid.size()), lap_adj = grid.make_field();
  auto accumulate = [&](const Field& model, const Field& observed) {
    if (observed.size() != model.size()) throw ConfigError("inverse: snapshot data do not match the grid");
    for (std::size_t k = 0; k < r.size(); ++k) {
      const double d = model[k] - observed[k];
      value += 0.5 * qw[k] * d * d;
      r[k] = qw[k] * d;
    }
  };
  const Field lap = discrete_laplacian(q_mid, grid);
  const VectorField grad_q = discrete_gradient(q_mid, grid);
  const VectorField grad_lap = discrete_gradient(lap, grid);
  accumulate(lap, data.lap_q);
  if (grad) lap_adj = r;
  for (int a = 0; a < grid.dimension(); ++a) {
    const auto d_at = [&](int node) { return derivative_stencil(grid, node, a); };
    accumulate(grad_q.components[a], data.grad_q.components.at(a));
    if (grad) add_transpose(grid, d_at, r, *grad);
    accumulate(grad_lap.components[a], data.grad_lap_q.components.at(a));
    if (grad) add_transpose(grid, d_at, r, lap_adj);
  }
  if (grad) add_transpose(grid, lap_at, lap_adj, *grad);
  return value;
}

}  // namespace

double misfit_value(const Field& c, const ObservationSet& data, const StabilitySetup& setup,
                    const InverseConfig& config) {
  check_config(config);
  const SpaceTimeField q = solve_heat({c, setup.data}, setup.grid, setup.axis);
  Field v = c;
  const Field prior = prior_of(config, setup.grid);
  for (std::size_t k = 0; k < v.size(); ++k) v[k] -= prior[k];
  // same summation order as misfit_and_gradient, so accepted steps compare exactly
  double misfit = flux_misfit(q, data, setup).value;
  if (config.snapshot_misfit) misfit += snapshot_misfit(q.values[setup.axis.mid_full_index()], data, setup.grid, nullptr);
  return misfit + regularization(v, setup.grid, config.alpha, nullptr);
}

MisfitGradient misfit_and_gradient(const Field& c, const ObservationSet& data, const StabilitySetup& setup,
                                   const InverseConfig& config) {
  check_config(config);
  const Grid& grid = setup.grid;
  const TimeAxis& axis = setup.axis;
  const SpaceTimeField q = solve_heat({c, setup.data}, grid, axis);
  const FluxMisfit fm = flux_misfit(q, data, setup);
  CrankNicolson cn(grid, c);
  const FluxOperator& op = cn.op();
  const int rows = op.rows();
  const int N = axis.size() - 1;

  // ∂(misfit)/∂q^p on interior rows, through ∂ₜ (three-point) and ∂_ν (one-sided)
  std::vector<std::vector<double>> dq(N + 1, std::vector<double>(rows, 0.0));
  std::vector<int> row_of(grid.node_count(), -1);
  for (int r = 0; r < rows; ++r) row_of[op.nodes()[r]] = r;
  const auto& g0 = grid.gamma0_nodes();
  for (std::size_t k = 0; k < fm.weighted_residual.size(); ++k) {
    const int p = axis.full_index(static_cast<int>(k) + 1);
    const TimeStencil ts = time_derivative_stencil(axis.times, p);
    double tc[3];
    double centre = 0.0;
    for (int l = 0; l < 3; ++l) {
      tc[l] = ts.first + l == p ? 0.0 : ts.coeff[l];
      centre -= tc[l];
    }
    for (int l = 0; l < 3; ++l) {
      if (ts.first + l == p) tc[l] = centre;
    }
    for (std::size_t j = 0; j < g0.size(); ++j) {
      const double wr = fm.weighted_residual[k][j];
      if (wr == 0.0) continue;
      for (const auto& e : normal_derivative_stencil(grid, g0[j]).entries()) {
        const int r = row_of[e.node];
        if (r < 0) continue;
        for (int l = 0; l < 3; ++l) dq[ts.first + l][r] += wr * tc[l] * e.coeff;
      }
    }
  }

  double snap = 0.0;
  if (config.snapshot_misfit) {
    const int p = axis.mid_full_index();
    Field g = grid.make_field();
    snap = snapshot_misfit(q.values[p], data, grid, &g);
    for (int r = 0; r < rows; ++r) dq[p][r] += g[op.nodes()[r]];
  }

  MisfitGradient out;
  out.gradient = grid.make_field();
  // R_n = (I - θ_n D) q^{n+1} - (I + θ_n D) q^n on interior rows, θ_n = dt_n/2.
  std::vector<double> mu(rows, 0.0);
  for (int n = N - 1; n >= 0; --n) {
    const double dt = axis.times[n + 1] - axis.times[n];
    std::vector<double> b(rows);
    if (n == N - 1) {
      for (int r = 0; r < rows; ++r) b[r] = -dq[N][r];
    } else {
      const double dt_next = axis.times[n + 2] - axis.times[n + 1];
      b = cn.explicit_apply(mu, dt_next);
      for (int r = 0; r < rows; ++r) b[r] -= dq[n + 1][r];
    }
    mu = cn.implicit_solve(b, dt);
    Field f = q.values[n + 1];
    for (std::size_t i = 0; i < f.size(); ++i) f[i] += q.values[n][i];
    add_flux_coefficient_adjoint(grid, op, mu, f, -0.5 * dt, out.gradient);
  }

  Field v = c;
  const Field prior = prior_of(config, grid);
  for (std::size_t k = 0; k < v.size(); ++k) v[k] -= prior[k];
  out.misfit = fm.value + snap;
  out.regularization = regularization(v, grid, config.alpha, &out.gradient);
  out.J = out.misfit + out.regularization;
  for (int node = 0; node < grid.node_count(); ++node) {
    if (in_boundary_layer(grid, node)) out.gradient[node] = 0.0;
  }
  return out;
}

ObservationSet add_noise(const ObservationSet& obs, double sigma, std::uint64_t seed, bool snapshots) {
  if (!(sigma >= 0.0)) throw ConfigError("noise level must be >= 0");
  ObservationSet out = obs;
  if (sigma == 0.0) return out;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, sigma);
  for (auto& row : out.flux.values)
    for (double& v : row) v += normal(rng);
  if (snapshots) {
    for (double& v : out.q) v += normal(rng);
    for (double& v : out.lap_q) v += normal(rng);
    for (auto* vf : {&out.grad_q, &out.grad_lap_q})
      for (auto& comp : vf->components)
        for (double& v : comp) v += normal(rng);
  }
  return out;
}

namespace {

// H¹ Gram matrix W + Σ G_aᵀ W G_a restricted to the admissible nodes
struct H1Metric {
  std::vector<int> free;
  Eigen::LDLT<Eigen::MatrixXd> factor;
  Eigen::MatrixXd gram;
};

H1Metric h1_metric(const Grid& grid) {
  H1Metric m;
  std::vector<int> index(grid.node_count(), -1);
  for (int node = 0; node < grid.node_count(); ++node) {
    if (!in_boundary_layer(grid, node)) {
      index[node] = static_cast<int>(m.free.size());
      m.free.push_back(node);
    }
  }
  const int nf = static_cast<int>(m.free.size());
  m.gram = Eigen::MatrixXd::Zero(nf, nf);
  const auto& qw = grid.quadrature_weights();
  for (int node = 0; node < grid.node_count(); ++node) {
    if (index[node] >= 0) m.gram(index[node], index[node]) += qw[node];
    for (int a = 0; a < grid.dimension(); ++a) {
      const Stencil st = derivative_stencil(grid, node, a);
      for (const auto& e1 : st.entries()) {
        if (index[e1.node] < 0) continue;
        for (const auto& e2 : st.entries()) {
          if (index[e2.node] < 0) continue;
          m.gram(index[e1.node], index[e2.node]) += qw[node] * e1.coeff * e2.coeff;
        }
      }
    }
  }
  m.factor.compute(m.gram);
  return m;
}

}  // namespace

Reconstruction reconstruct(const ObservationSet& data, const StabilitySetup& setup, const InverseConfig& config,
                           const Field* truth) {
  check_config(config);
  const Grid& grid = setup.grid;
  const Field prior = prior_of(config, grid);
  const ObservationSet noisy = add_noise(data, config.noise, config.seed, config.noisy_snapshots);
  const H1Metric metric = h1_metric(grid);
  const int nf = static_cast<int>(metric.free.size());

  double truth_norm = 0.0;
  Field truth_gamma;
  if (truth) {
    grid.check_field(*truth, "reconstruct truth");
    truth_gamma = grid.make_field();
    for (std::size_t k = 0; k < truth_gamma.size(); ++k)
      truth_gamma[k] = in_boundary_layer(grid, static_cast<int>(k)) ? 0.0 : (*truth)[k] - prior[k];
    truth_norm = std::sqrt(h1_norm_squared(truth_gamma, grid));
  }
  auto h1_error = [&](const Field& c) {
    if (!truth) return std::numeric_limits<double>::quiet_NaN();
    Field e = c;
    for (std::size_t k = 0; k < e.size(); ++k) e[k] -= prior[k] + truth_gamma[k];
    const double err = std::sqrt(h1_norm_squared(e, grid));
    return truth_norm > 0.0 ? err / truth_norm : err;
  };

  Reconstruction rec;
  rec.c = prior;
  MisfitGradient mg = misfit_and_gradient(rec.c, noisy, setup, config);
  double first_norm = -1.0;
  double step = -1.0;
  int stalled = 0;
  Eigen::VectorXd x_prev, g_prev;
  for (int it = 0;; ++it) {
    Eigen::VectorXd g(nf), x(nf);
    for (int k = 0; k < nf; ++k) {
      g[k] = mg.gradient[metric.free[k]];
      x[k] = rec.c[metric.free[k]];
    }
    const Eigen::VectorXd d = metric.factor.solve(g);
    const double slope = g.dot(d);  // ‖∇J‖²_{H¹}
    const double gnorm = std::sqrt(std::max(slope, 0.0));
    rec.log.push_back({it, mg.J, gnorm, h1_error(rec.c)});
    if (first_norm < 0.0) first_norm = gnorm;
    if (gnorm == 0.0 || gnorm <= config.gradient_tolerance * first_norm) {
      rec.stop_reason = "gradient tolerance";
      break;
    }
    if (it >= config.max_iterations) {
      rec.stop_reason = "max iterations";
      break;
    }
    // first trial step: Barzilai-Borwein in the H¹ metric, else double the last one
    double bb = -1.0;
    if (it > 0) {
      const Eigen::VectorXd sx = x - x_prev, yg = g - g_prev;
      const double sy = sx.dot(yg);
      if (sy > 0.0) bb = sx.dot(metric.gram * sx) / sy;
    }
    if (bb > 0.0) step = bb;
    else if (step < 0.0) step = 0.05 / std::max(d.cwiseAbs().maxCoeff(), 1e-300);
    else step *= 2.0;
    x_prev = x;
    g_prev = g;

    bool accepted = false;
    Field trial;
    MisfitGradient next;
    for (int b = 0; b <= config.max_backtracks; ++b, step *= config.shrink) {
      trial = rec.c;
      for (int k = 0; k < nf; ++k) {
        double& v = trial[metric.free[k]];
        v = std::max(config.c_min, v - step * d[k]);
      }
      const double J = misfit_value(trial, noisy, setup, config);
      if (J < mg.J && J <= mg.J - config.armijo * step * slope) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      rec.stop_reason = "line search found no decrease";
      break;
    }
    next = misfit_and_gradient(trial, noisy, setup, config);
    stalled = next.J >= mg.J ? stalled + 1 : 0;
    if (stalled >= 10)
      throw NumericalError("reconstruct: J did not decrease over 10 consecutive accepted steps (J = " +
                           format_double(next.J) + ")");
    rec.c = std::move(trial);
    mg = std::move(next);
  }
  return rec;
}

std::vector<NoisePoint> noise_sweep(const ObservationSet& clean, const StabilitySetup& setup, const InverseConfig& config,
                                    const Field& truth, const std::vector<double>& sigmas, int jobs) {
  std::vector<NoisePoint> out(sigmas.size());
  parallel_for(static_cast<int>(sigmas.size()), jobs, [&](int i) {
    InverseConfig cfg = config;
    cfg.noise = sigmas[i];
    const Reconstruction r = reconstruct(clean, setup, cfg, &truth);
    out[i] = {sigmas[i], r.log.back().h1_error, r.log.back().iteration, r.stop_reason};
  });
  return out;
}

CsvTable reconstruction_table(const Reconstruction& r) {
  CsvTable t;
  t.header = {"iter", "J", "grad_norm", "h1_error"};
  for (const auto& e : r.log)
    t.add_row({std::to_string(e.iteration), format_double(e.J), format_double(e.gradient_norm),
               format_double(e.h1_error)});
  return t;
}

}  // namespace carleman
