#ifndef CARLEMAN_SCALED_HPP
#define CARLEMAN_SCALED_HPP

#include <array>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "carleman/grid.hpp"

namespace carleman {

/// A nonnegative-or-signed real stored as mantissa · e^{log_scale}.
///
/// Carleman weights e^{-2sη} routinely sit far below the smallest double
/// (η ~ e^{2λK}), so every weighted quantity travels in this form and is only
/// collapsed to a plain double at the very end.
struct Scaled {
  double mantissa = 0.0;
  double log_scale = 0.0;

  static Scaled zero() { return {}; }
  static Scaled from_double(double v) { return {v, 0.0}; }

  [[nodiscard]] bool is_zero() const { return mantissa == 0.0; }
  /// Collapsed value; underflows to 0 or overflows to inf when out of range.
  [[nodiscard]] double value() const { return is_zero() ? 0.0 : mantissa * std::exp(log_scale); }
  /// Natural log of |value|; -inf for zero.
  [[nodiscard]] double log_abs() const {
    return is_zero() ? -std::numeric_limits<double>::infinity() : std::log(std::abs(mantissa)) + log_scale;
  }
  [[nodiscard]] double log10_abs() const { return log_abs() / std::log(10.0); }

  Scaled& operator+=(const Scaled& other);
  Scaled& operator*=(double factor) {
    mantissa *= factor;
    return *this;
  }
};

Scaled operator+(Scaled a, const Scaled& b);
Scaled operator*(Scaled a, double factor);
Scaled operator*(double factor, Scaled a);

/// a / b as a plain double. 0 when a is 0 (including 0/0); +inf when only b is 0.
double ratio(const Scaled& a, const Scaled& b);
/// log(a/b); -inf when a is 0.
double log_ratio(const Scaled& a, const Scaled& b);

/// A field with one exponent per node: value_i = mantissa_i · e^{log_scale_i}.
struct ScaledField {
  Field mantissa;
  Field log_scale;

  [[nodiscard]] std::size_t size() const { return mantissa.size(); }
  static ScaledField zeros(std::size_t n) { return {Field(n, 0.0), Field(n, 0.0)}; }
};

/// Apply a linear stencil to a scaled field; each node is rescaled to the
/// largest exponent among the stencil's nonzero inputs.
Scaled apply_scaled(const Stencil& stencil, const ScaledField& f);

/// Σ coeff_k · a_k for scaled inputs.
Scaled linear_combination(std::span<const double> coeffs, std::span<const Scaled> terms);

/// Logs of ∫_0^1 e^{δu} φ_a(u) φ_b(u) du for the hat functions φ_0 = 1-u,
/// φ_1 = u, as {K00, K01, K11}. Finite for any finite δ.
std::array<double, 3> log_linear_gram(double delta);

/// ∫ e^{L} g h over the grid with g, h multilinear on each cell and L
/// exponential-linear on each cell (slopes from the cell's edge means).
/// g_i = g[i]·e^{g_log[i]} when g_log is given, likewise h; empty spans mean 0.
/// Unlike a nodal rule this stays exact for g linear inside a boundary layer far
/// thinner than a cell. With L constant it is the consistent mass matrix.
Scaled fitted_inner(const Grid& grid, std::span<const double> L, std::span<const double> g,
                    std::span<const double> h, std::span<const double> g_log = {},
                    std::span<const double> h_log = {});
/// Same along a line of equally spaced points; one point gives e^{L} g h.
Scaled fitted_inner_line(std::span<const double> L, std::span<const double> g, std::span<const double> h,
                         double spacing);

}  // namespace carleman

#endif
