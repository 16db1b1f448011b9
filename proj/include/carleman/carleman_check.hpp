#ifndef CARLEMAN_CARLEMAN_CHECK_HPP
#define CARLEMAN_CARLEMAN_CHECK_HPP

#include <cstdint>
#include <vector>

#include "carleman/grid.hpp"
#include "carleman/report.hpp"
#include "carleman/scaled.hpp"
#include "carleman/weights.hpp"

namespace carleman {

/// Sign in front of 2sλφc∇β·∇ψ in M₂.
enum class M2Sign { plus, minus };

/// How derivatives of ψ = e^{-sη}q are formed.
///  conjugated: product rule, ψ-derivatives = e^{-sη}·(discrete derivatives of q
///              combined with closed-form derivatives of η). Resolved for any s, λ.
///  direct:     stencils applied to ψ itself. Only meaningful when the grid
///              resolves e^{-sη}; kept for identity checks.
enum class PsiMode { conjugated, direct };

struct CarlemanOptions {
  M2Sign sign = M2Sign::plus;
  PsiMode mode = PsiMode::conjugated;
};

/// A window field: q[i] is the slice at window node i, i = 0..m.
using WindowField = std::vector<Field>;

/// ψ = e^{-sη}q as scaled fields; the endpoint slices are 0.
std::vector<ScaledField> make_psi(const WindowField& q, const WeightSet& w);

/// M₁ψ = ∇·(c∇ψ) + s²λ²c|∇β|²φ²ψ + s(∂ₜη)ψ, with ψ = e^{-sη}q. Endpoint slices are 0.
std::vector<ScaledField> apply_M1(const WindowField& q, const Field& c, const WeightSet& w,
                                  const CarlemanOptions& opt = {});
/// M₂ψ = ∂ₜψ ± 2sλφc∇β·∇ψ - 2sλ²φc|∇β|²ψ.
std::vector<ScaledField> apply_M2(const WindowField& q, const Field& c, const WeightSet& w,
                                  const CarlemanOptions& opt = {});

/// ∬ M₂ψ·ψ evaluated nodally and through the integrated-by-parts form
/// -sλ∬ φψ²(3λc|∇β|² + ∇·(c∇β)) (plus sign, ψ = 0 on Σ and at the window ends).
struct M2Pairing {
  Scaled nodal;
  Scaled by_parts;
};
M2Pairing m2_pairing(const WindowField& q, const Field& c, const WeightSet& w, PsiMode mode = PsiMode::conjugated);

/// Both sides of the global Carleman estimate for one test function vanishing on Σ.
EstimateReport carleman_sides(const WindowField& q, const Field& c, const WeightSet& w,
                              const CarlemanOptions& opt = {});

/// Seeded test functions Π sin(k_a π x_a) · w(t), k_a ∈ {1,2,3}, w a random
/// trigonometric polynomial; boundary nodes are exactly 0.
std::vector<WindowField> carleman_test_suite(const Grid& grid, const TimeGrid& window, int count, std::uint64_t seed);

struct SweepPoint {
  double s = 0.0;
  double lambda = 0.0;
  double max_ratio = 0.0;
  double max_log_ratio = 0.0;
  int argmax = -1;
};

struct CarlemanSweep {
  /// Ordered by (test, λ, s).
  std::vector<EstimateReport> reports;
  std::vector<int> test_ids;
  /// Ordered by (λ, s).
  std::vector<SweepPoint> summary;
};

CarlemanSweep carleman_sweep(const std::vector<WindowField>& suite, const Field& c, const Grid& grid,
                             const TimeGrid& window, const WeightParams& base, const std::vector<double>& s_list,
                             const std::vector<double>& lambda_list, const CarlemanOptions& opt = {}, int jobs = 1);

}  // namespace carleman

#endif
