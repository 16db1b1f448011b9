#include "carleman/scaled.hpp"

#include <algorithm>
#include <vector>
#include <stdexcept>
#include <string>

namespace carleman {

Scaled& Scaled::operator+=(const Scaled& other) {
  if (other.is_zero()) return *this;
  if (is_zero()) {
    *this = other;
    return *this;
  }
  const double top = std::max(log_scale, other.log_scale);
  mantissa = mantissa * std::exp(log_scale - top) + other.mantissa * std::exp(other.log_scale - top);
  log_scale = top;
  return *this;
}

Scaled operator+(Scaled a, const Scaled& b) { return a += b; }
Scaled operator*(Scaled a, double factor) { return a *= factor; }
Scaled operator*(double factor, Scaled a) { return a *= factor; }

double ratio(const Scaled& a, const Scaled& b) {
  if (a.is_zero()) return 0.0;
  if (b.is_zero()) return std::numeric_limits<double>::infinity();
  return (a.mantissa / b.mantissa) * std::exp(a.log_scale - b.log_scale);
}

double log_ratio(const Scaled& a, const Scaled& b) {
  if (a.is_zero()) return -std::numeric_limits<double>::infinity();
  if (b.is_zero()) return std::numeric_limits<double>::infinity();
  return std::log(std::abs(a.mantissa / b.mantissa)) + (a.log_scale - b.log_scale);
}

Scaled apply_scaled(const Stencil& stencil, const ScaledField& f) {
  double top = -std::numeric_limits<double>::infinity();
  for (const auto& e : stencil.entries()) {
    if (e.coeff != 0.0 && f.mantissa[e.node] != 0.0) top = std::max(top, f.log_scale[e.node]);
  }
  if (!std::isfinite(top)) return Scaled::zero();
  double sum = 0.0;
  for (const auto& e : stencil.entries()) {
    if (f.mantissa[e.node] == 0.0) continue;
    sum += e.coeff * f.mantissa[e.node] * std::exp(f.log_scale[e.node] - top);
  }
  if (sum == 0.0) return Scaled::zero();
  return {sum, top};
}

Scaled linear_combination(std::span<const double> coeffs, std::span<const Scaled> terms) {
  if (coeffs.size() != terms.size()) throw std::invalid_argument("linear_combination: size mismatch");
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < terms.size(); ++k) {
    if (coeffs[k] != 0.0 && !terms[k].is_zero()) top = std::max(top, terms[k].log_scale);
  }
  if (!std::isfinite(top)) return Scaled::zero();
  double sum = 0.0;
  for (std::size_t k = 0; k < terms.size(); ++k) {
    if (terms[k].is_zero()) continue;
    sum += coeffs[k] * terms[k].mantissa * std::exp(terms[k].log_scale - top);
  }
  if (sum == 0.0) return Scaled::zero();
  return {sum, top};
}

namespace {

// ∫_0^1 u^p (1-u)^q e^{-tu} du for t >= 0, {p,q} ∈ {(0,2),(1,1),(2,0)}.
std::array<double, 3> gram_decaying(double t) {
  if (t < 4.0) {
    std::array<double, 3> out{};
    const int pq[3][2] = {{0, 2}, {1, 1}, {2, 0}};
    for (int r = 0; r < 3; ++r) {
      const int p = pq[r][0], q = pq[r][1];
      // p! q! / (p+q+1)! = 1/3 or 1/6
      double c = (p == 1) ? 1.0 / 6.0 : 1.0 / 3.0;
      double sum = c;
      for (int k = 0; k < 80; ++k) {
        c *= -t / (k + 1) * (p + k + 1) / (p + k + q + 2);
        sum += c;
        if (std::abs(c) < 1e-18 * std::abs(sum)) break;
      }
      out[r] = sum;
    }
    return out;
  }
  const double e = std::exp(-t);
  const double j0 = (1.0 - e) / t;
  const double j1 = (1.0 - e * (1.0 + t)) / (t * t);
  const double j2 = 2.0 * (1.0 - e * (1.0 + t + 0.5 * t * t)) / (t * t * t);
  return {j0 - 2.0 * j1 + j2, j1 - j2, j2};
}

}  // namespace

std::array<double, 3> log_linear_gram(double delta) {
  if (delta <= 0.0) {
    const auto k = gram_decaying(-delta);
    return {std::log(k[0]), std::log(k[1]), std::log(k[2])};
  }
  // mirror u -> 1-u
  const auto k = gram_decaying(delta);
  return {delta + std::log(k[2]), delta + std::log(k[1]), delta + std::log(k[0])};
}

namespace {

double at(std::span<const double> v, std::size_t i) { return v.empty() ? 0.0 : v[i]; }

struct TermSum {
  std::vector<double> m, e;
  void add(double mantissa, double exponent) {
    if (mantissa == 0.0) return;
    m.push_back(mantissa);
    e.push_back(exponent);
  }
  Scaled total() const {
    double top = -std::numeric_limits<double>::infinity();
    for (double x : e) top = std::max(top, x);
    if (!std::isfinite(top)) return Scaled::zero();
    double sum = 0.0;
    for (std::size_t k = 0; k < m.size(); ++k) sum += m[k] * std::exp(e[k] - top);
    if (sum == 0.0) return Scaled::zero();
    return {sum, top};
  }
};

// log K(δ)[a][b] from the packed symmetric triple
double gram_entry(const std::array<double, 3>& k, int a, int b) { return a + b == 0 ? k[0] : a + b == 1 ? k[1] : k[2]; }

void check_inner_sizes(std::size_t n, std::span<const double> L, std::span<const double> g, std::span<const double> h,
                       std::span<const double> gl, std::span<const double> hl, const char* what) {
  if (L.size() != n || g.size() != n || h.size() != n || (!gl.empty() && gl.size() != n) ||
      (!hl.empty() && hl.size() != n))
    throw std::invalid_argument(std::string(what) + ": size mismatch");
}

}  // namespace

Scaled fitted_inner(const Grid& grid, std::span<const double> L, std::span<const double> g,
                    std::span<const double> h, std::span<const double> g_log, std::span<const double> h_log) {
  check_inner_sizes(static_cast<std::size_t>(grid.node_count()), L, g, h, g_log, h_log, "fitted_inner");
  const int n = grid.cells();
  const int d = grid.dimension();
  const double log_cell = d * std::log(grid.spacing());
  TermSum terms;
  const int ny = d == 2 ? n : 1;
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < n; ++i) {
      // corners (a, b) with a along x, b along y
      int node[2][2];
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) node[a][b] = grid.index(i + a, d == 2 ? j + b : 0);
      const int nb = d == 2 ? 2 : 1;
      double dx, dy = 0.0, mean;
      if (d == 1) {
        dx = L[node[1][0]] - L[node[0][0]];
        mean = 0.5 * (L[node[0][0]] + L[node[1][0]]);
      } else {
        dx = 0.5 * ((L[node[1][0]] - L[node[0][0]]) + (L[node[1][1]] - L[node[0][1]]));
        dy = 0.5 * ((L[node[0][1]] - L[node[0][0]]) + (L[node[1][1]] - L[node[1][0]]));
        mean = 0.25 * (L[node[0][0]] + L[node[1][0]] + L[node[0][1]] + L[node[1][1]]);
      }
      const double ref = mean - 0.5 * (dx + dy) + log_cell;
      const auto kx = log_linear_gram(dx);
      const auto ky = log_linear_gram(dy);
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < nb; ++b) {
          const int p = node[a][b];
          if (g[p] == 0.0) continue;
          for (int a2 = 0; a2 < 2; ++a2)
            for (int b2 = 0; b2 < nb; ++b2) {
              const int r = node[a2][b2];
              if (h[r] == 0.0) continue;
              double e = ref + gram_entry(kx, a, a2) + at(g_log, p) + at(h_log, r);
              if (d == 2) e += gram_entry(ky, b, b2);
              terms.add(g[p] * h[r], e);
            }
        }
    }
  }
  return terms.total();
}

Scaled fitted_inner_line(std::span<const double> L, std::span<const double> g, std::span<const double> h,
                         double spacing) {
  check_inner_sizes(L.size(), L, g, h, {}, {}, "fitted_inner_line");
  TermSum terms;
  if (L.size() == 1) {
    terms.add(g[0] * h[0], L[0]);
    return terms.total();
  }
  const double log_h = std::log(spacing);
  for (std::size_t i = 0; i + 1 < L.size(); ++i) {
    const auto k = log_linear_gram(L[i + 1] - L[i]);
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b) terms.add(g[i + a] * h[i + b], L[i] + log_h + gram_entry(k, a, b));
  }
  return terms.total();
}

}  // namespace carleman
