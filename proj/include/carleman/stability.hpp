#ifndef CARLEMAN_STABILITY_HPP
#define CARLEMAN_STABILITY_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "carleman/csv.hpp"
#include "carleman/forward.hpp"
#include "carleman/observe.hpp"
#include "carleman/report.hpp"
#include "carleman/weights.hpp"

namespace carleman {

/// Boundary nodes and the first interior ring. A perturbation that vanishes
/// here has zero nodal boundary values and zero one-sided normal difference.
bool in_boundary_layer(const Grid& grid, int node);
/// γ with the boundary layer zeroed.
Field project_admissible(const Field& gamma, const Grid& grid);
/// max over boundary nodes of |γ| and of the first-order normal difference |γ(inner) - γ(b)|/h.
double admissibility_defect(const Field& gamma, const Grid& grid);

/// c = c̃ + γ with γ admissible (defect < 1e-12) and both coefficients positive.
struct CoefficientPair {
  Field c;
  Field c_tilde;
  Field gamma;
};
CoefficientPair make_coefficient_pair(const Field& c, const Field& c_tilde, const Grid& grid);

struct StabilitySetup {
  Grid grid;
  TimeAxis axis;
  HeatData data;
};

/// weighted: ∫ φe^{-2sη}(T′)(|γ|² + |∇γ|²) against
///   ∫∫_{Γ₀} φe^{-2sη} ∂_νβ |∂_νy|² + ∫ e^{-2sη(T′)}(|∇Δu|² + |Δu|² + |∇u|²)(T′).
/// plain: ‖γ‖²_{H¹} against the four unweighted observation terms.
struct StabilityReport {
  EstimateReport weighted;
  EstimateReport plain;
};

/// Throws ConfigError when ∇β·∇q̃(T′) vanishes somewhere (the transport step degenerates).
StabilityReport stability_sides(const CoefficientPair& pair, const StabilitySetup& setup, const WeightSet& w);
/// Same with q̃ already solved.
StabilityReport stability_sides(const CoefficientPair& pair, const SpaceTimeField& q_tilde, const StabilitySetup& setup,
                                const WeightSet& w);

struct FamilyMember {
  std::string shape;
  double epsilon = 0.0;
  Field gamma;
};

/// ε · x²(1-x)² · {1, sin kπx} for k = 1, 2, 3 (products over the axes in 2D),
/// projected; one member per shape and amplitude.
std::vector<FamilyMember> perturbation_family(const Grid& grid, const std::vector<double>& amplitudes);

struct ShapeSlope {
  std::string shape;
  double slope = 0.0;
  int points = 0;
};

struct StabilitySweep {
  std::vector<FamilyMember> members;
  std::vector<StabilityReport> reports;  // aligned with members; zero members keep empty reports
  std::vector<bool> included;
  std::vector<std::string> notes;
  double max_ratio = 0.0;
  int argmax = -1;
  double max_plain_ratio = 0.0;
  int argmax_plain = -1;
  /// log-log least-squares slope of the weighted LHS against the plain distance, per shape.
  std::vector<ShapeSlope> slopes;
};

StabilitySweep stability_sweep(const std::vector<FamilyMember>& family, const Field& c_tilde,
                               const StabilitySetup& setup, const WeightSet& w, int jobs = 1);

/// `member,shape,epsilon,lhs,rhs_weighted,rhs_plain,ratio,ratio_plain`, included members only.
CsvTable sweep_table(const StabilitySweep& sweep);

/// Unweighted discrete H¹ norm squared: trapezoid |v|² + |∇v|².
double h1_norm_squared(const Field& v, const Grid& grid);

struct InverseConfig {
  double alpha = 1e-8;
  Field prior;  // empty: c ≡ 1
  int max_iterations = 1000;
  double armijo = 1e-4;
  double shrink = 0.5;
  int max_backtracks = 40;
  /// Stop when the H¹ gradient norm falls below this fraction of its first value.
  double gradient_tolerance = 1e-8;
  /// Also fit the interior snapshot terms ∇Δq, Δq, ∇q at T′.
  bool snapshot_misfit = true;
  double noise = 0.0;
  bool noisy_snapshots = false;
  std::uint64_t seed = 42;
  double c_min = 0.1;
};

struct MisfitGradient {
  double J = 0.0;
  double misfit = 0.0;
  double regularization = 0.0;
  /// ∂J/∂c at the nodes, zero on the boundary layer.
  Field gradient;
};

/// J(c) = ½‖∂_ν∂ₜq[c] - d‖² over (t₀,T) × Γ₀ + α/2 ‖c - prior‖²_{H¹}
///        (+ ½ Σ ‖S q[c](T′) - d_S‖² over S ∈ {∇Δ, Δ, ∇} with snapshot_misfit),
/// with the gradient of exactly this discrete J by the adjoint of the Crank–Nicolson steps.
MisfitGradient misfit_and_gradient(const Field& c, const ObservationSet& data, const StabilitySetup& setup,
                                   const InverseConfig& config);
/// J alone (one forward solve).
double misfit_value(const Field& c, const ObservationSet& data, const StabilitySetup& setup,
                    const InverseConfig& config);

/// Additive N(0, σ²) noise on the flux trace (and on the snapshots if asked).
ObservationSet add_noise(const ObservationSet& obs, double sigma, std::uint64_t seed, bool snapshots = false);

struct IterationRecord {
  int iteration = 0;
  double J = 0.0;
  double gradient_norm = 0.0;
  double h1_error = 0.0;  // relative to the truth's perturbation; NaN without a truth
};

struct Reconstruction {
  Field c;
  std::vector<IterationRecord> log;
  std::string stop_reason;
};

/// Projected gradient descent from the prior. Directions are H¹ gradients
/// (the Riesz representer of ∂J/∂c in the H¹ inner product on the admissible
/// nodes); Armijo backtracking from a Barzilai–Borwein first trial; every
/// iterate is clipped to c ≥ c_min.
/// Throws NumericalError after 10 consecutive accepted steps without a decrease.
Reconstruction reconstruct(const ObservationSet& data, const StabilitySetup& setup, const InverseConfig& config,
                           const Field* truth = nullptr);

struct NoisePoint {
  double sigma = 0.0;
  double h1_error = 0.0;
  int iterations = 0;
  std::string stop_reason;
};

/// One reconstruction per noise level (config.noise replaced), each from the same clean data and seed.
std::vector<NoisePoint> noise_sweep(const ObservationSet& clean, const StabilitySetup& setup, const InverseConfig& config,
                                    const Field& truth, const std::vector<double>& sigmas, int jobs = 1);

/// `iter,J,grad_norm,h1_error`.
CsvTable reconstruction_table(const Reconstruction& r);

}  // namespace carleman

#endif
