#include "carleman/grid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "carleman/errors.hpp"

namespace carleman {

Face parse_face(const std::string& name) {
  if (name == "west" || name == "left") return Face::west;
  if (name == "east" || name == "right") return Face::east;
  if (name == "south" || name == "bottom") return Face::south;
  if (name == "north" || name == "top") return Face::north;
  throw ConfigError("unknown face '" + name + "' (expected west/east/south/north)");
}

std::string face_name(Face face) {
  switch (face) {
    case Face::west: return "west";
    case Face::east: return "east";
    case Face::south: return "south";
    case Face::north: return "north";
  }
  return "?";
}

int face_axis(Face face) { return (face == Face::west || face == Face::east) ? 0 : 1; }
int face_sign(Face face) { return (face == Face::west || face == Face::south) ? -1 : 1; }

void Stencil::add(int node, double coeff) {
  for (std::size_t k = 0; k < size_; ++k) {
    if (entries_[k].node == node) {
      entries_[k].coeff += coeff;
      return;
    }
  }
  if (size_ == entries_.size()) throw std::logic_error("stencil capacity exceeded");
  entries_[size_++] = {node, coeff};
}

double Stencil::apply(std::span<const double> f) const {
  double sum = 0.0;
  for (std::size_t k = 0; k < size_; ++k) sum += entries_[k].coeff * f[entries_[k].node];
  return sum;
}

Grid Grid::build(int dimension, int n, Face gamma0_face) {
  if (dimension != 1 && dimension != 2)
    throw ConfigError("Grid: dimension must be 1 or 2, got " + std::to_string(dimension));
  if (n < 4) throw ConfigError("Grid: cells_per_axis must be >= 4, got " + std::to_string(n));
  if (dimension == 1 && face_axis(gamma0_face) != 0)
    throw ConfigError("Grid: in 1D the observation boundary must be west or east");

  Grid g;
  g.dimension_ = dimension;
  g.n_ = n;
  g.h_ = 1.0 / n;
  g.gamma0_face_ = gamma0_face;
  g.node_count_ = dimension == 1 ? n + 1 : (n + 1) * (n + 1);
  g.boundary_.assign(g.node_count_, 0);
  g.gamma0_.assign(g.node_count_, 0);
  g.quad_weights_.assign(g.node_count_, 0.0);

  const auto axis_weight = [&](int k) { return (k == 0 || k == n) ? 0.5 * g.h_ : g.h_; };
  for (int node = 0; node < g.node_count_; ++node) {
    bool boundary = false;
    double w = 1.0;
    for (int a = 0; a < dimension; ++a) {
      const int k = g.axis_index(node, a);
      boundary = boundary || k == 0 || k == n;
      w *= axis_weight(k);
    }
    g.boundary_[node] = boundary ? 1 : 0;
    g.quad_weights_[node] = w;
    if (boundary) {
      g.boundary_nodes_.push_back(node);
    } else {
      g.interior_nodes_.push_back(node);
    }
    if (on_face(g, node, gamma0_face)) {
      g.gamma0_[node] = 1;
      g.gamma0_nodes_.push_back(node);
      if (dimension == 1) {
        g.gamma0_weights_.push_back(1.0);
      } else {
        g.gamma0_weights_.push_back(axis_weight(g.axis_index(node, 1 - face_axis(gamma0_face))));
      }
    }
  }
  if (g.gamma0_nodes_.empty() || g.gamma0_nodes_.size() >= g.boundary_nodes_.size())
    throw ConfigError("Grid: observation boundary must be a nonempty strict subset of the boundary");
  return g;
}

bool on_face(const Grid& grid, int node, Face face) {
  const int axis = face_axis(face);
  if (axis >= grid.dimension()) return false;
  const int k = grid.axis_index(node, axis);
  return face_sign(face) < 0 ? k == 0 : k == grid.cells();
}

int Grid::boundary_distance(int node) const {
  int d = n_;
  for (int a = 0; a < dimension_; ++a) {
    const int k = axis_index(node, a);
    d = std::min({d, k, n_ - k});
  }
  return d;
}

std::vector<Face> Grid::faces_of(int node) const {
  std::vector<Face> faces;
  for (Face f : {Face::west, Face::east, Face::south, Face::north}) {
    if (on_face(*this, node, f)) faces.push_back(f);
  }
  return faces;
}

std::array<double, 2> Grid::normal(int node) const {
  if (!is_boundary(node)) throw std::invalid_argument("Grid::normal: node is not on the boundary");
  Face face = gamma0_face_;
  if (!in_gamma0(node)) face = faces_of(node).front();
  std::array<double, 2> nu{0.0, 0.0};
  nu[face_axis(face)] = face_sign(face);
  return nu;
}

VectorField Grid::make_vector_field() const {
  VectorField v;
  v.components.assign(dimension_, make_field());
  return v;
}

void Grid::check_field(std::span<const double> f, const char* what) const {
  if (static_cast<int>(f.size()) != node_count_)
    throw std::invalid_argument(std::string(what) + ": field length " + std::to_string(f.size()) +
                                " does not match node count " + std::to_string(node_count_));
}

Stencil derivative_stencil(const Grid& grid, int node, int axis) {
  const int n = grid.cells();
  const int k = grid.axis_index(node, axis);
  const int st = grid.stride(axis);
  const double half_inv_h = 0.5 * n;
  Stencil s;
  if (k == 0) {
    s.add(node, -3.0 * half_inv_h);
    s.add(node + st, 4.0 * half_inv_h);
    s.add(node + 2 * st, -1.0 * half_inv_h);
  } else if (k == n) {
    s.add(node, 3.0 * half_inv_h);
    s.add(node - st, -4.0 * half_inv_h);
    s.add(node - 2 * st, 1.0 * half_inv_h);
  } else {
    s.add(node - st, -half_inv_h);
    s.add(node + st, half_inv_h);
  }
  return s;
}

namespace {

void add_second_derivative(Stencil& s, const Grid& grid, int node, int axis, double scale) {
  const int n = grid.cells();
  const int k = grid.axis_index(node, axis);
  const int st = grid.stride(axis);
  const double inv_h2 = static_cast<double>(n) * n;
  if (k == 0 || k == n) {
    const int dir = k == 0 ? st : -st;
    s.add(node, scale * (2.0 * inv_h2));
    s.add(node + dir, scale * (-5.0 * inv_h2));
    s.add(node + 2 * dir, scale * (4.0 * inv_h2));
    s.add(node + 3 * dir, scale * (-1.0 * inv_h2));
  } else {
    s.add(node, scale * (-2.0 * inv_h2));
    s.add(node - st, scale * inv_h2);
    s.add(node + st, scale * inv_h2);
  }
}

}  // namespace

Stencil second_derivative_stencil(const Grid& grid, int node, int axis) {
  Stencil s;
  add_second_derivative(s, grid, node, axis, 1.0);
  return s;
}

Stencil laplacian_stencil(const Grid& grid, int node) {
  Stencil s;
  for (int a = 0; a < grid.dimension(); ++a) add_second_derivative(s, grid, node, a, 1.0);
  return s;
}

Stencil flux_stencil(const Grid& grid, std::span<const double> c, int node) {
  const int n = grid.cells();
  const double inv_h2 = static_cast<double>(n) * n;
  Stencil s;
  for (int a = 0; a < grid.dimension(); ++a) {
    const int k = grid.axis_index(node, a);
    const int st = grid.stride(a);
    if (k == 0 || k == n) {
      add_second_derivative(s, grid, node, a, c[node]);
      const double dc = derivative_stencil(grid, node, a).apply(c);
      for (const auto& e : derivative_stencil(grid, node, a).entries()) s.add(e.node, dc * e.coeff);
    } else {
      const double cm = 0.5 * (c[node] + c[node - st]);
      const double cp = 0.5 * (c[node] + c[node + st]);
      s.add(node, -(cm + cp) * inv_h2);
      s.add(node - st, cm * inv_h2);
      s.add(node + st, cp * inv_h2);
    }
  }
  return s;
}

Stencil normal_derivative_stencil(const Grid& grid, int node) {
  const auto nu = grid.normal(node);
  const int axis = nu[0] != 0.0 ? 0 : 1;
  Stencil d = derivative_stencil(grid, node, axis);
  Stencil s;
  for (const auto& e : d.entries()) s.add(e.node, nu[axis] * e.coeff);
  return s;
}

VectorField discrete_gradient(std::span<const double> f, const Grid& grid) {
  grid.check_field(f, "discrete_gradient");
  VectorField g = grid.make_vector_field();
  for (int a = 0; a < grid.dimension(); ++a) {
    for (int node = 0; node < grid.node_count(); ++node)
      g.components[a][node] = derivative_stencil(grid, node, a).apply(f);
  }
  return g;
}

Field discrete_laplacian(std::span<const double> f, const Grid& grid) {
  grid.check_field(f, "discrete_laplacian");
  Field out = grid.make_field();
  for (int node = 0; node < grid.node_count(); ++node) out[node] = laplacian_stencil(grid, node).apply(f);
  return out;
}

namespace {

void check_positive(std::span<const double> c) {
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (!(c[i] > 0.0))
      throw std::invalid_argument("divergence_flux: coefficient must be positive (node " +
                                  std::to_string(i) + ", value " + std::to_string(c[i]) + ")");
  }
}

}  // namespace

Field divergence_flux(std::span<const double> c, std::span<const double> f, const Grid& grid) {
  grid.check_field(f, "divergence_flux");
  grid.check_field(c, "divergence_flux");
  check_positive(c);
  Field out = grid.make_field();
  for (int node = 0; node < grid.node_count(); ++node) out[node] = flux_stencil(grid, c, node).apply(f);
  return out;
}

Field divergence_flux_interior(std::span<const double> c, std::span<const double> f, const Grid& grid) {
  grid.check_field(f, "divergence_flux_interior");
  grid.check_field(c, "divergence_flux_interior");
  Field out = grid.make_field();
  for (int node : grid.interior_nodes()) out[node] = flux_stencil(grid, c, node).apply(f);
  return out;
}

VectorField gradient_of_laplacian(std::span<const double> f, const Grid& grid) {
  return discrete_gradient(discrete_laplacian(f, grid), grid);
}

double normal_derivative(std::span<const double> f, const Grid& grid, int node) {
  return normal_derivative_stencil(grid, node).apply(f);
}

Field squared_magnitude(const VectorField& v) {
  Field out(v.size(), 0.0);
  for (const auto& comp : v.components) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += comp[i] * comp[i];
  }
  return out;
}

Field dot(const VectorField& a, const VectorField& b) {
  if (a.dimension() != b.dimension() || a.size() != b.size())
    throw std::invalid_argument("dot: vector fields differ in shape");
  Field out(a.size(), 0.0);
  for (int k = 0; k < a.dimension(); ++k) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += a.components[k][i] * b.components[k][i];
  }
  return out;
}

double quadrature_space(std::span<const double> f, const Grid& grid) {
  grid.check_field(f, "quadrature_space");
  const auto& w = grid.quadrature_weights();
  double sum = 0.0;
  for (int i = 0; i < grid.node_count(); ++i) {
    if (!std::isfinite(f[i]))
      throw NumericalError("quadrature_space: non-finite value at node " + std::to_string(i));
    sum += w[i] * f[i];
  }
  return sum;
}

std::vector<double> trapezoid_weights(std::span<const double> times) {
  std::vector<double> w(times.size(), 0.0);
  for (std::size_t i = 0; i + 1 < times.size(); ++i) {
    const double dt = times[i + 1] - times[i];
    if (!(dt > 0.0)) throw std::invalid_argument("trapezoid_weights: times must be strictly increasing");
    w[i] += 0.5 * dt;
    w[i + 1] += 0.5 * dt;
  }
  return w;
}

double log_fitted_end_weight(double delta) {
  if (std::abs(delta) < 0.05) {
    // Σ δ^k/(k+2)!
    double term = 0.5, sum = 0.5;
    for (int k = 1; k <= 8; ++k) {
      term *= delta / (k + 2);
      sum += term;
    }
    return std::log(sum);
  }
  if (delta < 600.0) return std::log((std::expm1(delta) - delta) / (delta * delta));
  return delta + std::log1p(-(1.0 + delta) * std::exp(-delta)) - 2.0 * std::log(delta);
}

namespace {

/// log Σ_k e^{a_k}
double log_sum(double a, double b) {
  const double top = std::max(a, b);
  if (top == -std::numeric_limits<double>::infinity()) return top;
  return top + std::log(std::exp(a - top) + std::exp(b - top));
}

}  // namespace

std::vector<double> fitted_log_weights_line(std::span<const double> L, double h) {
  const std::size_t n = L.size();
  std::vector<double> out(n);
  if (n == 1) {
    out[0] = L[0];
    return out;
  }
  const double log_h = std::log(h);
  for (std::size_t j = 0; j < n; ++j) {
    double lw = -std::numeric_limits<double>::infinity();
    if (j > 0) lw = log_sum(lw, log_fitted_end_weight(L[j - 1] - L[j]));
    if (j + 1 < n) lw = log_sum(lw, log_fitted_end_weight(L[j + 1] - L[j]));
    out[j] = log_h + lw + L[j];
  }
  return out;
}

Field fitted_log_weights(const Grid& grid, std::span<const double> L) {
  grid.check_field(L, "fitted_log_weights");
  const int n = grid.cells();
  const double log_h = std::log(grid.spacing());
  Field out = grid.make_field();
  for (int node = 0; node < grid.node_count(); ++node) {
    double total = L[node];
    for (int a = 0; a < grid.dimension(); ++a) {
      const int i = grid.axis_index(node, a);
      const int st = grid.stride(a);
      double lw = -std::numeric_limits<double>::infinity();
      if (i > 0) lw = log_sum(lw, log_fitted_end_weight(L[node - st] - L[node]));
      if (i < n) lw = log_sum(lw, log_fitted_end_weight(L[node + st] - L[node]));
      total += log_h + lw;
    }
    out[node] = total;
  }
  return out;
}

double quadrature_spacetime(const std::vector<Field>& slices, std::span<const double> times, const Grid& grid) {
  if (slices.size() != times.size())
    throw std::invalid_argument("quadrature_spacetime: slice count does not match time axis");
  const auto wt = trapezoid_weights(times);
  double sum = 0.0;
  for (std::size_t k = 0; k < slices.size(); ++k) sum += wt[k] * quadrature_space(slices[k], grid);
  return sum;
}

}  // namespace carleman
