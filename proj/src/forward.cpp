#include "carleman/forward.hpp"

#include <cmath>
#include <numbers>
#include <ostream>
#include <stdexcept>

#include "carleman/csv.hpp"
#include "carleman/errors.hpp"

namespace carleman {

void validate_problem(const HeatProblem& problem, const Grid& grid, const std::vector<double>& times) {
  grid.check_field(problem.c, "HeatProblem.c");
  grid.check_field(problem.data.q0, "HeatProblem.q0");
  if (!problem.data.g) throw ConfigError("HeatProblem: boundary data missing");
  for (int node = 0; node < grid.node_count(); ++node) {
    if (!(problem.c[node] > 0.0) || !std::isfinite(problem.c[node]))
      throw ConfigError("HeatProblem: conductivity must be positive at node " + std::to_string(node));
  }
  const auto& d = problem.data;
  if (!d.verification_only) {
    if (!(d.r > 0.0)) throw ConfigError("HeatProblem: positivity floor r must be > 0");
    for (int node = 0; node < grid.node_count(); ++node) {
      if (!(d.q0[node] >= d.r))
        throw ConfigError("HeatProblem: q0 < r at node " + std::to_string(node));
    }
    for (double t : times) {
      for (int node : grid.boundary_nodes()) {
        if (!(d.g(t, node) >= d.r))
          throw ConfigError("HeatProblem: g < r at node " + std::to_string(node) + ", t=" + std::to_string(t));
      }
    }
  }
  for (int node : grid.boundary_nodes()) {
    if (std::abs(d.q0[node] - d.g(0.0, node)) > 1e-12)
      throw ConfigError("HeatProblem: q0 and g(0,.) disagree at boundary node " + std::to_string(node));
  }
}

HeatData default_heat_data(const Grid& grid, double r, double amplitude, double frequency) {
  HeatData d;
  d.r = r;
  d.q0 = grid.make_field();
  const int normal_axis = face_axis(grid.gamma0_face());
  Field ramp = grid.make_field();
  for (int node = 0; node < grid.node_count(); ++node) {
    double x = grid.coord(node, normal_axis);
    if (face_sign(grid.gamma0_face()) < 0) x = 1.0 - x;
    ramp[node] = 1.0 - x;
    d.q0[node] = r + 1.0 + x;
    if (grid.dimension() == 2) d.q0[node] += 0.5 * grid.coord(node, 1 - normal_axis);
  }
  d.g = [q0 = d.q0, ramp, amplitude, frequency](double t, int node) {
    return q0[node] + amplitude * std::sin(frequency * t) * ramp[node];
  };
  return d;
}

HeatData manufactured_heat_data(const Grid& grid) {
  HeatData d;
  d.verification_only = true;
  d.r = 0.0;
  d.q0 = grid.make_field();
  for (int node = 0; node < grid.node_count(); ++node) {
    double v = 1.0;
    for (int a = 0; a < grid.dimension(); ++a) v *= std::sin(std::numbers::pi * grid.coord(node, a));
    d.q0[node] = grid.is_boundary(node) ? 0.0 : v;
  }
  d.g = [](double, int) { return 0.0; };
  return d;
}

FluxOperator::FluxOperator(const Grid& grid, const Field& c) : node_count_(grid.node_count()) {
  grid.check_field(c, "FluxOperator");
  nodes_ = grid.interior_nodes();
  row_of_node_.assign(grid.node_count(), -1);
  for (int r = 0; r < rows(); ++r) row_of_node_[nodes_[r]] = r;
  rows_.resize(nodes_.size());
  for (int r = 0; r < rows(); ++r) {
    const Stencil st = flux_stencil(grid, c, nodes_[r]);
    Row& row = rows_[r];
    row.diag = 0.0;
    for (const auto& e : st.entries()) {
      if (e.node == nodes_[r]) {
        row.diag += e.coeff;
      } else if (row_of_node_[e.node] >= 0) {
        row.interior.emplace_back(row_of_node_[e.node], e.coeff);
      } else {
        row.boundary.emplace_back(e.node, e.coeff);
      }
    }
  }
}

std::vector<double> FluxOperator::apply(const std::vector<double>& x) const {
  std::vector<double> y(rows_.size());
  for (std::size_t r = 0; r < rows_.size(); ++r) {
    double v = rows_[r].diag * x[r];
    for (const auto& [k, a] : rows_[r].interior) v += a * x[k];
    y[r] = v;
  }
  return y;
}

std::vector<double> FluxOperator::apply_full(const Field& f) const {
  std::vector<double> y = apply(gather(f));
  for (std::size_t r = 0; r < rows_.size(); ++r) {
    for (const auto& [node, a] : rows_[r].boundary) y[r] += a * f[node];
  }
  return y;
}

std::vector<double> FluxOperator::gather(const Field& f) const {
  std::vector<double> x(nodes_.size());
  for (std::size_t r = 0; r < nodes_.size(); ++r) x[r] = f[nodes_[r]];
  return x;
}

void FluxOperator::scatter(const std::vector<double>& x, Field& f) const {
  for (std::size_t r = 0; r < nodes_.size(); ++r) f[nodes_[r]] = x[r];
}

ImplicitSolver::ImplicitSolver(std::shared_ptr<const FluxOperator> op, double theta, int max_iterations)
    : op_(std::move(op)), theta_(theta), max_iterations_(max_iterations) {
  const auto& rows = op_->row_data();
  const int n = op_->rows();
  // Tridiagonal when every row couples only to its immediate row neighbors.
  banded_ = true;
  for (int r = 0; r < n && banded_; ++r) {
    for (const auto& [k, a] : rows[r].interior) banded_ = banded_ && (k == r - 1 || k == r + 1);
  }
  if (!banded_) return;
  lower_.assign(n, 0.0);
  diag_.assign(n, 0.0);
  upper_.assign(n, 0.0);
  for (int r = 0; r < n; ++r) {
    diag_[r] = 1.0 - theta_ * rows[r].diag;
    for (const auto& [k, a] : rows[r].interior) {
      if (k == r - 1) lower_[r] = -theta_ * a;
      if (k == r + 1) upper_[r] = -theta_ * a;
    }
  }
  // In-place LU of the tridiagonal matrix: diag_ becomes the pivots, lower_ the multipliers.
  for (int r = 1; r < n; ++r) {
    lower_[r] /= diag_[r - 1];
    diag_[r] -= lower_[r] * upper_[r - 1];
  }
}

std::vector<double> ImplicitSolver::solve(const std::vector<double>& b) const {
  const int n = op_->rows();
  if (banded_) {
    std::vector<double> x(b);
    for (int r = 1; r < n; ++r) x[r] -= lower_[r] * x[r - 1];
    x[n - 1] /= diag_[n - 1];
    for (int r = n - 2; r >= 0; --r) x[r] = (x[r] - upper_[r] * x[r + 1]) / diag_[r];
    return x;
  }

  const auto& rows = op_->row_data();
  const auto apply_m = [&](const std::vector<double>& v) {
    std::vector<double> out = op_->apply(v);
    for (int r = 0; r < n; ++r) out[r] = v[r] - theta_ * out[r];
    return out;
  };
  const auto dotp = [](const std::vector<double>& a, const std::vector<double>& c) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * c[i];
    return s;
  };
  std::vector<double> inv_diag(n);
  for (int r = 0; r < n; ++r) inv_diag[r] = 1.0 / (1.0 - theta_ * rows[r].diag);

  std::vector<double> x(n, 0.0);
  const double bnorm = std::sqrt(dotp(b, b));
  if (bnorm == 0.0) return x;
  std::vector<double> res(b), z(n), p(n);
  for (int r = 0; r < n; ++r) z[r] = inv_diag[r] * res[r];
  p = z;
  double rz = dotp(res, z);
  for (int it = 0; it < max_iterations_; ++it) {
    const auto mp = apply_m(p);
    const double alpha = rz / dotp(p, mp);
    for (int r = 0; r < n; ++r) {
      x[r] += alpha * p[r];
      res[r] -= alpha * mp[r];
    }
    if (std::sqrt(dotp(res, res)) <= 1e-10 * bnorm) return x;
    for (int r = 0; r < n; ++r) z[r] = inv_diag[r] * res[r];
    const double rz_new = dotp(res, z);
    const double beta = rz_new / rz;
    rz = rz_new;
    for (int r = 0; r < n; ++r) p[r] = z[r] + beta * p[r];
  }
  throw NumericalError("conjugate gradients stalled: residual not reduced to 1e-10 in " +
                       std::to_string(max_iterations_) + " iterations");
}

CrankNicolson::CrankNicolson(const Grid& grid, const Field& c)
    : op_(std::make_shared<FluxOperator>(grid, c)),
      boundary_nodes_(grid.boundary_nodes()),
      max_iterations_(10 * grid.cells()) {}

const ImplicitSolver& CrankNicolson::solver_for(double dt) const {
  auto it = solvers_.find(dt);
  if (it == solvers_.end()) it = solvers_.emplace(dt, ImplicitSolver(op_, 0.5 * dt, max_iterations_)).first;
  return it->second;
}

std::vector<double> CrankNicolson::implicit_solve(const std::vector<double>& b, double dt) const {
  return solver_for(dt).solve(b);
}

std::vector<double> CrankNicolson::explicit_apply(const std::vector<double>& x, double dt) const {
  std::vector<double> y = op_->apply(x);
  for (std::size_t r = 0; r < y.size(); ++r) y[r] = x[r] + 0.5 * dt * y[r];
  return y;
}

Field CrankNicolson::step(const Field& q, double t, double dt, const BoundaryData& g) const {
  const double theta = 0.5 * dt;
  std::vector<double> rhs = op_->gather(q);
  const std::vector<double> dq = op_->apply_full(q);
  for (std::size_t r = 0; r < rhs.size(); ++r) rhs[r] += theta * dq[r];

  Field next(q.size(), 0.0);
  for (int node : boundary_nodes_) next[node] = g(t + dt, node);
  const auto& rows = op_->row_data();
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (const auto& [node, a] : rows[r].boundary) rhs[r] += theta * a * next[node];
  }
  op_->scatter(implicit_solve(rhs, dt), next);
  for (double v : next) {
    if (!std::isfinite(v)) throw NumericalError("solve_heat: non-finite state at t=" + std::to_string(t + dt));
  }
  return next;
}

std::vector<double> CrankNicolson::step_interior(const std::vector<double>& x, double dt) const {
  return implicit_solve(explicit_apply(x, dt), dt);
}

std::vector<double> CrankNicolson::step_interior_transpose(const std::vector<double>& y, double dt) const {
  return explicit_apply(implicit_solve(y, dt), dt);
}

SpaceTimeField solve_heat(const HeatProblem& problem, const Grid& grid, const TimeAxis& axis) {
  validate_problem(problem, grid, axis.times);
  CrankNicolson cn(grid, problem.c);
  SpaceTimeField out;
  out.times = axis.times;
  out.values.reserve(axis.times.size());
  out.values.push_back(problem.data.q0);
  for (std::size_t k = 0; k + 1 < axis.times.size(); ++k) {
    const double t = axis.times[k];
    out.values.push_back(cn.step(out.values.back(), t, axis.times[k + 1] - t, problem.data.g));
  }
  return out;
}

SpaceTimeField time_derivative(const SpaceTimeField& f) {
  const int nt = f.time_count();
  if (nt < 3) throw std::invalid_argument("time_derivative: need at least 3 time slices");
  SpaceTimeField d;
  d.times = f.times;
  d.values.assign(nt, Field(f.values[0].size(), 0.0));
  for (int i = 0; i < nt; ++i) {
    const TimeStencil st = time_derivative_stencil(f.times, i);
    const Field& center = f.values[i];
    Field& out = d.values[i];
    for (int k = 0; k < 3; ++k) {
      const int j = st.first + k;
      if (j == i) continue;
      const Field& other = f.values[j];
      for (std::size_t node = 0; node < out.size(); ++node) out[node] += st.coeff[k] * (other[node] - center[node]);
    }
  }
  return d;
}

Snapshot snapshot_of(const Field& slice, const Grid& grid, const Field& c) {
  Snapshot s;
  s.q = slice;
  s.grad_q = discrete_gradient(slice, grid);
  s.lap_q = discrete_laplacian(slice, grid);
  s.grad_lap_q = discrete_gradient(s.lap_q, grid);
  s.div_c_grad_q = divergence_flux(c, slice, grid);
  return s;
}

Snapshot snapshot_package(const SpaceTimeField& f, const Grid& grid, const TimeAxis& axis, const Field& c) {
  if (f.time_count() != axis.size()) throw std::invalid_argument("snapshot_package: field does not span the time axis");
  return snapshot_of(f.values[axis.mid_full_index()], grid, c);
}

namespace {

SpaceTimeField difference(const SpaceTimeField& a, const SpaceTimeField& b) {
  SpaceTimeField d;
  d.times = a.times;
  d.values = a.values;
  for (std::size_t k = 0; k < d.values.size(); ++k) {
    for (std::size_t i = 0; i < d.values[k].size(); ++i) d.values[k][i] -= b.values[k][i];
  }
  return d;
}

}  // namespace

TwinSolution solve_twin(const Field& c, const SpaceTimeField& q_tilde, const HeatData& data, const Grid& grid,
                        const TimeAxis& axis) {
  TwinSolution t;
  t.q = solve_heat({c, data}, grid, axis);
  t.q_tilde = q_tilde;
  t.u = difference(t.q, t.q_tilde);
  t.y = time_derivative(t.u);
  return t;
}

TwinSolution solve_twin(const Field& c, const Field& c_tilde, const HeatData& data, const Grid& grid,
                        const TimeAxis& axis) {
  return solve_twin(c, solve_heat({c_tilde, data}, grid, axis), data, grid, axis);
}

void write_spacetime_csv(std::ostream& out, const SpaceTimeField& f) {
  out << "t_index,node,value\n";
  for (int k = 0; k < f.time_count(); ++k) {
    for (std::size_t node = 0; node < f.values[k].size(); ++node)
      out << k << ',' << node << ',' << format_double(f.values[k][node]) << '\n';
  }
}

}  // namespace carleman
