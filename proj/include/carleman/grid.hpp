#ifndef CARLEMAN_GRID_HPP
#define CARLEMAN_GRID_HPP

#include <array>
#include <span>
#include <string>
#include <vector>

namespace carleman {

/// Nodal values on a Grid.
using Field = std::vector<double>;

/// One Field per spatial axis.
struct VectorField {
  std::vector<Field> components;

  [[nodiscard]] int dimension() const { return static_cast<int>(components.size()); }
  [[nodiscard]] std::size_t size() const { return components.empty() ? 0 : components[0].size(); }
};

/// Faces of the unit interval / square. In 1D only west (x=0) and east (x=1) exist.
enum class Face { west, east, south, north };

Face parse_face(const std::string& name);
std::string face_name(Face face);

/// A coefficient attached to a node index; the building block of every linear operator here.
struct StencilEntry {
  int node;
  double coeff;
};

/// Small fixed-capacity stencil. Center entry (if any) is stored first.
class Stencil {
 public:
  void add(int node, double coeff);
  [[nodiscard]] std::span<const StencilEntry> entries() const { return {entries_.data(), size_}; }
  [[nodiscard]] double apply(std::span<const double> f) const;

 private:
  std::array<StencilEntry, 12> entries_{};
  std::size_t size_ = 0;
};

/// Uniform node grid on (0,1)^d, d in {1,2}, with one face designated as the
/// observation boundary. Immutable after construction.
class Grid {
 public:
  static Grid build(int dimension, int n, Face gamma0_face);

  [[nodiscard]] int dimension() const { return dimension_; }
  [[nodiscard]] int cells() const { return n_; }
  [[nodiscard]] double spacing() const { return h_; }
  [[nodiscard]] int node_count() const { return node_count_; }
  [[nodiscard]] Face gamma0_face() const { return gamma0_face_; }

  /// Node index from per-axis indices (j ignored in 1D).
  [[nodiscard]] int index(int i, int j = 0) const { return i + j * (n_ + 1); }
  /// Per-axis index of a node.
  [[nodiscard]] int axis_index(int node, int axis) const {
    return axis == 0 ? node % (n_ + 1) : node / (n_ + 1);
  }
  [[nodiscard]] int stride(int axis) const { return axis == 0 ? 1 : n_ + 1; }
  [[nodiscard]] double coord(int node, int axis) const { return axis_index(node, axis) * h_; }

  [[nodiscard]] bool is_boundary(int node) const { return boundary_[node] != 0; }
  [[nodiscard]] bool in_gamma0(int node) const { return gamma0_[node] != 0; }
  /// Distance (in nodes) to the nearest boundary node along any axis.
  [[nodiscard]] int boundary_distance(int node) const;

  [[nodiscard]] const std::vector<int>& boundary_nodes() const { return boundary_nodes_; }
  [[nodiscard]] const std::vector<int>& interior_nodes() const { return interior_nodes_; }
  [[nodiscard]] const std::vector<int>& gamma0_nodes() const { return gamma0_nodes_; }
  /// Trapezoid weights along the Γ₀ face, aligned with gamma0_nodes(); {1} in 1D.
  [[nodiscard]] const std::vector<double>& gamma0_weights() const { return gamma0_weights_; }
  /// Tensor trapezoid quadrature weights, one per node.
  [[nodiscard]] const std::vector<double>& quadrature_weights() const { return quad_weights_; }

  /// Faces a boundary node lies on (corners lie on two).
  [[nodiscard]] std::vector<Face> faces_of(int node) const;
  /// Primary unit outward normal of a boundary node: the Γ₀ face wins, then x-faces, then y-faces.
  [[nodiscard]] std::array<double, 2> normal(int node) const;

  [[nodiscard]] Field make_field(double value = 0.0) const { return Field(node_count_, value); }
  [[nodiscard]] VectorField make_vector_field() const;

  void check_field(std::span<const double> f, const char* what) const;

 private:
  Grid() = default;

  int dimension_ = 1;
  int n_ = 0;
  double h_ = 0.0;
  int node_count_ = 0;
  Face gamma0_face_ = Face::east;
  std::vector<char> boundary_;
  std::vector<char> gamma0_;
  std::vector<int> boundary_nodes_;
  std::vector<int> interior_nodes_;
  std::vector<int> gamma0_nodes_;
  std::vector<double> gamma0_weights_;
  std::vector<double> quad_weights_;
};


/// Outward normal sign (+1/-1) and axis of a face.
int face_axis(Face face);
int face_sign(Face face);
bool on_face(const Grid& grid, int node, Face face);

// Stencils. First and second derivatives are second-order centered in the
// interior and second-order one-sided at the ends of an axis.
Stencil derivative_stencil(const Grid& grid, int node, int axis);
Stencil second_derivative_stencil(const Grid& grid, int node, int axis);
Stencil laplacian_stencil(const Grid& grid, int node);
/// Stencil of ∇·(c∇·) at a node. Conservative arithmetic-mean face form along
/// axes where the node is interior, product rule c f'' + c' f' along axes where
/// it sits on the boundary.
Stencil flux_stencil(const Grid& grid, std::span<const double> c, int node);
/// Outward normal derivative at a boundary node (one-sided, second order).
Stencil normal_derivative_stencil(const Grid& grid, int node);

VectorField discrete_gradient(std::span<const double> f, const Grid& grid);
Field discrete_laplacian(std::span<const double> f, const Grid& grid);
Field divergence_flux(std::span<const double> c, std::span<const double> f, const Grid& grid);
/// Divergence-flux restricted to interior nodes (boundary rows left 0). Bilinear in (c, f).
Field divergence_flux_interior(std::span<const double> c, std::span<const double> f, const Grid& grid);
/// Composition gradient ∘ laplacian; O(h) near the boundary.
VectorField gradient_of_laplacian(std::span<const double> f, const Grid& grid);
double normal_derivative(std::span<const double> f, const Grid& grid, int node);

/// Pointwise |v|² of a vector field.
Field squared_magnitude(const VectorField& v);
/// Pointwise dot product of two vector fields.
Field dot(const VectorField& a, const VectorField& b);

double quadrature_space(std::span<const double> f, const Grid& grid);
/// Trapezoid weights for an arbitrary increasing time axis.
std::vector<double> trapezoid_weights(std::span<const double> times);
/// log of ∫_0^1 e^{δu}(1-u) du = (e^δ - 1 - δ)/δ²; 1/2 at δ = 0. Safe for any finite δ.
double log_fitted_end_weight(double delta);
/// Exponentially fitted rule for ∫ e^{L} f: L interpolated linearly and f
/// linearly on each cell, per axis (exact when L is additive across axes).
/// Returns log(weight_i) + L_i, so ∫ e^{L} f ≈ Σ f_i e^{result_i}. Weights are
/// positive and the rule is the trapezoid rule when L is constant.
Field fitted_log_weights(const Grid& grid, std::span<const double> L);
/// Same along a line of equally spaced points (a single point gets weight 1).
std::vector<double> fitted_log_weights_line(std::span<const double> L, double h);
double quadrature_spacetime(const std::vector<Field>& slices, std::span<const double> times, const Grid& grid);

}  // namespace carleman

#endif
