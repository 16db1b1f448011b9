#ifndef CARLEMAN_POINCARE_CHECK_HPP
#define CARLEMAN_POINCARE_CHECK_HPP

#include "carleman/forward.hpp"
#include "carleman/grid.hpp"
#include "carleman/report.hpp"
#include "carleman/weights.hpp"

namespace carleman {

/// Base field b of the transport operator P₀g = ∇b·∇g, with the
/// non-degeneracy datum min |∇β·∇b| over all nodes.
struct TransportBase {
  Field b;
  VectorField grad;
  Field beta_dot_grad;
  double min_abs_beta_dot_grad = 0.0;
};

TransportBase make_transport_base(const Field& b, const WeightSet& w);

/// ∇b·∇g; g must vanish on Γ.
Field apply_P0(const Field& g, const TransportBase& base, const Grid& grid);

/// s²λ² ∫ e^{-2sη(T′)} φ(T′) |g|²  against  ∫ e^{-2sη(T′)} φ⁻¹(T′) |P₀g|².
/// Throws ConfigError when min |∇β·∇b| ≤ 1e-12.
EstimateReport lemma_sides(const Field& g, const TransportBase& base, const WeightSet& w);

/// y(T′) - ∇·(γ∇q̃(T′)) - ∇·(c∇u(T′)) on interior nodes (boundary rows 0).
Field cit_residual(const Field& gamma, const Field& c, const Field& q_tilde, const Field& u, const Field& y,
                   const Grid& grid);
/// Same at the window midpoint of a twin solution.
Field cit_residual(const Field& gamma, const Field& c, const TwinSolution& twin, const TimeAxis& axis,
                   const Grid& grid);

/// The proposition split into its scalar part (|γ|² against |y|² and the u
/// terms), its gradient part (|∇γ|² against |∇y|² and the u terms) and the
/// full statement.
struct PropositionReport {
  EstimateReport scalar;
  EstimateReport gradient;
  EstimateReport combined;
};

PropositionReport proposition_sides(const Field& gamma, const TwinSolution& twin, const TimeAxis& axis,
                                    const WeightSet& w);

}  // namespace carleman

#endif
