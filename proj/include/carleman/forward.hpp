#ifndef CARLEMAN_FORWARD_HPP
#define CARLEMAN_FORWARD_HPP

#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <vector>

#include "carleman/grid.hpp"
#include "carleman/time_grid.hpp"

namespace carleman {

/// Dirichlet data g(t, boundary node).
using BoundaryData = std::function<double(double t, int node)>;

/// Initial/boundary data shared by both members of a twin solve.
struct HeatData {
  Field q0;
  BoundaryData g;
  double r = 1.0;  // positivity floor
  /// Admits data below r (e.g. g ≡ 0 for manufactured solutions); skips the positivity checks.
  bool verification_only = false;
};

struct HeatProblem {
  Field c;
  HeatData data;
};

/// Checks c > 0, q0 ≥ r, g ≥ r (on the supplied times) and q0|Γ = g(0,·).
void validate_problem(const HeatProblem& problem, const Grid& grid, const std::vector<double>& times);

/// Default smooth data satisfying positivity and a monotone profile in the
/// direction normal to Γ₀: q0 = r + 1 + x (+ y/2 in 2D),
/// g(t,x) = q0(x) + amplitude · sin(frequency · t) · (1 - x).
HeatData default_heat_data(const Grid& grid, double r, double amplitude = 0.3, double frequency = 3.0);

/// q0 = Π sin(πx_a), g ≡ 0, verification-only.
HeatData manufactured_heat_data(const Grid& grid);

/// Interior rows of the flux-form operator ∇·(c∇·): D q = D0 q_int + B q_bnd.
class FluxOperator {
 public:
  FluxOperator(const Grid& grid, const Field& c);

  [[nodiscard]] int rows() const { return static_cast<int>(nodes_.size()); }
  [[nodiscard]] const std::vector<int>& nodes() const { return nodes_; }
  [[nodiscard]] int node_count() const { return node_count_; }

  /// D0 x for an interior vector x.
  [[nodiscard]] std::vector<double> apply(const std::vector<double>& x) const;
  /// Full D applied to a full nodal field, restricted to interior rows.
  [[nodiscard]] std::vector<double> apply_full(const Field& f) const;
  [[nodiscard]] std::vector<double> gather(const Field& f) const;
  void scatter(const std::vector<double>& x, Field& f) const;

  struct Row {
    double diag;
    std::vector<std::pair<int, double>> interior;  // (row, coeff)
    std::vector<std::pair<int, double>> boundary;  // (node, coeff)
  };
  [[nodiscard]] const std::vector<Row>& row_data() const { return rows_; }

 private:
  int node_count_ = 0;
  std::vector<int> nodes_;
  std::vector<int> row_of_node_;
  std::vector<Row> rows_;
};

/// Solves (I - θ D0) x = b: banded (tridiagonal) elimination in 1D,
/// Jacobi-preconditioned conjugate gradients to relative residual 1e-10 in 2D.
class ImplicitSolver {
 public:
  ImplicitSolver(std::shared_ptr<const FluxOperator> op, double theta, int max_iterations);
  [[nodiscard]] std::vector<double> solve(const std::vector<double>& b) const;
  [[nodiscard]] double theta() const { return theta_; }

 private:
  std::shared_ptr<const FluxOperator> op_;
  double theta_;
  int max_iterations_;
  bool banded_ = false;
  std::vector<double> lower_, diag_, upper_;  // 1D factorization
};

/// Crank–Nicolson integrator for one coefficient field; caches one implicit
/// solver per distinct step size.
class CrankNicolson {
 public:
  CrankNicolson(const Grid& grid, const Field& c);

  /// Advance the full field q from t to t + dt with boundary values g(t+dt).
  [[nodiscard]] Field step(const Field& q, double t, double dt, const BoundaryData& g) const;
  /// One homogeneous step on interior vectors: x ↦ (I - dt/2 D0)⁻¹(I + dt/2 D0) x.
  [[nodiscard]] std::vector<double> step_interior(const std::vector<double>& x, double dt) const;
  /// Transpose of step_interior.
  [[nodiscard]] std::vector<double> step_interior_transpose(const std::vector<double>& y, double dt) const;
  /// (I - dt/2 D0)⁻¹ b (D0 is symmetric, so this is also the transpose solve).
  [[nodiscard]] std::vector<double> implicit_solve(const std::vector<double>& b, double dt) const;
  /// (I + dt/2 D0) x.
  [[nodiscard]] std::vector<double> explicit_apply(const std::vector<double>& x, double dt) const;

  [[nodiscard]] const FluxOperator& op() const { return *op_; }

 private:
  const ImplicitSolver& solver_for(double dt) const;

  std::shared_ptr<const FluxOperator> op_;
  std::vector<int> boundary_nodes_;
  int max_iterations_;
  mutable std::map<double, ImplicitSolver> solvers_;
};

/// Crank–Nicolson solve of ∂ₜq = ∇·(c∇q) over the full axis, Dirichlet data imposed strongly.
SpaceTimeField solve_heat(const HeatProblem& problem, const Grid& grid, const TimeAxis& axis);

/// ∂ₜ by three-point differences on the field's own time axis.
SpaceTimeField time_derivative(const SpaceTimeField& f);

/// Derived measurements of one slice.
struct Snapshot {
  Field q;
  VectorField grad_q;
  Field lap_q;
  VectorField grad_lap_q;
  Field div_c_grad_q;
};

/// Snapshot at T′ (the window midpoint of the axis).
Snapshot snapshot_package(const SpaceTimeField& f, const Grid& grid, const TimeAxis& axis, const Field& c);
Snapshot snapshot_of(const Field& slice, const Grid& grid, const Field& c);

/// Solutions for (c, c̃) with shared data, u = q - q̃ and y = ∂ₜu, all on the full axis.
struct TwinSolution {
  SpaceTimeField q;
  SpaceTimeField q_tilde;
  SpaceTimeField u;
  SpaceTimeField y;
};

TwinSolution solve_twin(const Field& c, const Field& c_tilde, const HeatData& data, const Grid& grid,
                        const TimeAxis& axis);
/// Twin solve reusing an existing q̃.
TwinSolution solve_twin(const Field& c, const SpaceTimeField& q_tilde, const HeatData& data, const Grid& grid,
                        const TimeAxis& axis);

/// `t_index,node,value` rows.
void write_spacetime_csv(std::ostream& out, const SpaceTimeField& f);

}  // namespace carleman

#endif
