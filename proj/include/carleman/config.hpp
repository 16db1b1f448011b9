#ifndef CARLEMAN_CONFIG_HPP
#define CARLEMAN_CONFIG_HPP

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "carleman/grid.hpp"
#include "carleman/stability.hpp"
#include "carleman/weights.hpp"

namespace carleman {

/// Coefficient expression over x, y. JSON nodes:
///   {"op":"const","value":v}  {"op":"pi"}  {"op":"x"}  {"op":"y"}
///   {"op":"sin","arg":e}  {"op":"poly","coeffs":[a0,a1,...],"arg":e}
///   {"op":"add","args":[...]}  {"op":"mul","args":[...]}
/// or {"csv":"path"} for nodal values (`node,value`, one row per grid node).
struct Expression {
  enum class Kind { constant, x, y, sin, poly, add, mul, nodal };
  Kind kind = Kind::constant;
  double value = 0.0;
  std::vector<double> coeffs;
  std::vector<Expression> args;
  std::string path;

  [[nodiscard]] double eval(double x, double y) const;
  /// Nodal field on the grid; reads the CSV for nodal expressions.
  [[nodiscard]] Field sample(const Grid& grid) const;
};

struct ExperimentConfig {
  int dimension = 1;
  int n = 32;
  double t0 = 0.5;
  double T = 2.0;
  int m = 128;
  Face observed = Face::east;

  std::vector<double> lambdas{1.0, 2.0};
  std::vector<double> s_list{1.0, 2.0, 4.0, 8.0};
  double m_weight = 2.0;
  std::array<double, 2> x0{-1.0, -1.0};
  BetaShape shape = BetaShape::planar;

  double r = 1.0;
  double amplitude = 0.3;
  double frequency = 3.0;

  Expression c_tilde;
  /// Perturbation γ; projected onto the admissible set before use.
  Expression gamma;

  int test_functions = 20;
  std::vector<double> amplitudes{1e-3, 1e-2, 1e-1};

  double alpha = 1e-8;
  int max_iterations = 1000;
  double armijo = 1e-4;
  double shrink = 0.5;
  double gradient_tolerance = 1e-8;
  bool snapshot_misfit = true;
  bool noisy_snapshots = false;
  double c_min = 0.1;
  std::vector<double> noise_levels{1e-4, 1e-3, 1e-2};
  /// Observation file for reconstruct; empty: synthesize from c̃ + γ.
  std::string observations;

  double noise = 0.0;
  std::uint64_t seed = 42;
  std::string output_dir = "out";

  [[nodiscard]] Grid grid() const;
  [[nodiscard]] TimeGrid window() const;
  [[nodiscard]] WeightParams weight_params(double lambda, double s) const;
  [[nodiscard]] InverseConfig inverse() const;
};

/// Parses a JSON document over the defaults. Unknown keys, wrong types and
/// out-of-range values throw ConfigError; paths in the document are taken
/// relative to base_dir.
ExperimentConfig parse_config(const std::string& text, const std::string& base_dir = ".");
ExperimentConfig load_config(const std::string& path);

}  // namespace carleman

#endif
