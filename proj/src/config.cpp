#include "carleman/config.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include "carleman/csv.hpp"
#include "carleman/errors.hpp"
#include "json.hpp"

namespace carleman {

using nlohmann::json;

double Expression::eval(double x, double y) const {
  switch (kind) {
    case Kind::constant: return value;
    case Kind::x: return x;
    case Kind::y: return y;
    case Kind::sin: return std::sin(args[0].eval(x, y));
    case Kind::poly: {
      const double v = args[0].eval(x, y);
      double acc = 0.0;
      for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) acc = acc * v + *it;
      return acc;
    }
    case Kind::add: {
      double acc = 0.0;
      for (const auto& a : args) acc += a.eval(x, y);
      return acc;
    }
    case Kind::mul: {
      double acc = 1.0;
      for (const auto& a : args) acc *= a.eval(x, y);
      return acc;
    }
    case Kind::nodal: break;
  }
  throw ConfigError("coefficient read from '" + path + "' has no pointwise form");
}

namespace {

double parse_number(const std::string& cell, const std::string& where) {
  double v = 0.0;
  const char* end = cell.data() + cell.size();
  auto [p, ec] = std::from_chars(cell.data(), end, v);
  if (ec != std::errc() || p != end) throw ConfigError(where + ": '" + cell + "' is not a number");
  return v;
}

}  // namespace

Field Expression::sample(const Grid& grid) const {
  Field f = grid.make_field();
  if (kind != Kind::nodal) {
    for (int node = 0; node < grid.node_count(); ++node)
      f[node] = eval(grid.coord(node, 0), grid.dimension() > 1 ? grid.coord(node, 1) : 0.0);
    return f;
  }
  const CsvTable t = read_csv_file(path);
  if (t.header != std::vector<std::string>{"node", "value"})
    throw ConfigError(path + ": expected header 'node,value'");
  if (static_cast<int>(t.rows.size()) != grid.node_count())
    throw ConfigError(path + ": " + std::to_string(t.rows.size()) + " rows for " + std::to_string(grid.node_count()) +
                      " grid nodes");
  std::vector<bool> seen(grid.node_count(), false);
  for (const auto& row : t.rows) {
    if (row.size() != 2) throw ConfigError(path + ": malformed row");
    const double idx = parse_number(row[0], path);
    const int node = static_cast<int>(idx);
    if (node != idx || node < 0 || node >= grid.node_count() || seen[node])
      throw ConfigError(path + ": bad or repeated node index " + row[0]);
    seen[node] = true;
    f[node] = parse_number(row[1], path);
  }
  return f;
}

namespace {

// Tracks which keys of one object were read; anything left over is an error.
class Obj {
 public:
  Obj(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + ": expected an object");
  }

  const json* get(const std::string& key) {
    used_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void number(const std::string& key, double& out) {
    if (const json* v = get(key)) {
      if (!v->is_number()) throw ConfigError(path(key) + ": expected a number");
      out = v->get<double>();
    }
  }

  void integer(const std::string& key, int& out) {
    if (const json* v = get(key)) {
      if (!v->is_number_integer()) throw ConfigError(path(key) + ": expected an integer");
      out = v->get<int>();
    }
  }

  void boolean(const std::string& key, bool& out) {
    if (const json* v = get(key)) {
      if (!v->is_boolean()) throw ConfigError(path(key) + ": expected true or false");
      out = v->get<bool>();
    }
  }

  void string(const std::string& key, std::string& out) {
    if (const json* v = get(key)) {
      if (!v->is_string()) throw ConfigError(path(key) + ": expected a string");
      out = v->get<std::string>();
    }
  }

  void numbers(const std::string& key, std::vector<double>& out) {
    if (const json* v = get(key)) {
      if (!v->is_array()) throw ConfigError(path(key) + ": expected an array of numbers");
      out.clear();
      for (const auto& e : *v) {
        if (!e.is_number()) throw ConfigError(path(key) + ": expected an array of numbers");
        out.push_back(e.get<double>());
      }
    }
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!used_.count(it.key())) throw ConfigError(path(it.key()) + ": unknown key");
  }

  [[nodiscard]] std::string path(const std::string& key) const { return where_ + "." + key; }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> used_;
};

Expression parse_expression(const json& j, const std::string& where, const std::string& base_dir) {
  Obj o(j, where);
  Expression e;
  std::string csv;
  o.string("csv", csv);
  if (!csv.empty()) {
    o.finish();
    e.kind = Expression::Kind::nodal;
    e.path = std::filesystem::path(csv).is_absolute() ? csv : (std::filesystem::path(base_dir) / csv).string();
    return e;
  }
  std::string op;
  o.string("op", op);
  auto child = [&](const json& c, const std::string& sub) { return parse_expression(c, o.path(sub), base_dir); };
  auto arg = [&] {
    const json* a = o.get("arg");
    if (!a) throw ConfigError(o.path("arg") + ": missing");
    e.args.push_back(child(*a, "arg"));
  };
  if (op == "const") {
    e.kind = Expression::Kind::constant;
    const json* v = o.get("value");
    if (!v || !v->is_number()) throw ConfigError(o.path("value") + ": expected a number");
    e.value = v->get<double>();
  } else if (op == "pi") {
    e.kind = Expression::Kind::constant;
    e.value = std::numbers::pi;
  } else if (op == "x") {
    e.kind = Expression::Kind::x;
  } else if (op == "y") {
    e.kind = Expression::Kind::y;
  } else if (op == "sin") {
    e.kind = Expression::Kind::sin;
    arg();
  } else if (op == "poly") {
    e.kind = Expression::Kind::poly;
    o.numbers("coeffs", e.coeffs);
    if (e.coeffs.empty()) throw ConfigError(o.path("coeffs") + ": need at least one coefficient");
    arg();
  } else if (op == "add" || op == "mul") {
    e.kind = op == "add" ? Expression::Kind::add : Expression::Kind::mul;
    const json* a = o.get("args");
    if (!a || !a->is_array() || a->empty()) throw ConfigError(o.path("args") + ": expected a nonempty array");
    for (std::size_t i = 0; i < a->size(); ++i) e.args.push_back(child((*a)[i], "args[" + std::to_string(i) + "]"));
  } else {
    throw ConfigError(where + ": unknown op '" + op + "' (const, pi, x, y, sin, poly, add, mul, or a csv path)");
  }
  o.finish();
  return e;
}

Expression constant(double v) {
  Expression e;
  e.value = v;
  return e;
}

// 0.05 x²(1-x)²
Expression default_gamma() {
  Expression x;
  x.kind = Expression::Kind::x;
  Expression p;
  p.kind = Expression::Kind::poly;
  p.coeffs = {0.0, 0.0, 0.05, -0.1, 0.05};
  p.args = {x};
  return p;
}

void require(bool ok, const std::string& msg) {
  if (!ok) throw ConfigError(msg);
}

}  // namespace

Grid ExperimentConfig::grid() const { return Grid::build(dimension, n, observed); }

TimeGrid ExperimentConfig::window() const { return TimeGrid::build(t0, T, m); }

WeightParams ExperimentConfig::weight_params(double lambda, double s) const {
  WeightParams p;
  p.lambda = lambda;
  p.s = s;
  p.m = m_weight;
  p.x0 = x0;
  p.shape = shape;
  return p;
}

InverseConfig ExperimentConfig::inverse() const {
  InverseConfig ic;
  ic.alpha = alpha;
  ic.prior = c_tilde.sample(grid());
  ic.max_iterations = max_iterations;
  ic.armijo = armijo;
  ic.shrink = shrink;
  ic.gradient_tolerance = gradient_tolerance;
  ic.snapshot_misfit = snapshot_misfit;
  ic.noise = noise;
  ic.noisy_snapshots = noisy_snapshots;
  ic.seed = seed;
  ic.c_min = c_min;
  return ic;
}

ExperimentConfig parse_config(const std::string& text, const std::string& base_dir) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  ExperimentConfig c;
  c.c_tilde = constant(1.0);
  c.gamma = default_gamma();

  Obj top(doc, "config");
  top.integer("dimension", c.dimension);
  top.integer("n", c.n);
  top.number("t0", c.t0);
  top.number("T", c.T);
  top.integer("m", c.m);
  std::string face;
  top.string("observed_face", face);
  if (!face.empty()) c.observed = parse_face(face);

  if (const json* w = top.get("weights")) {
    Obj o(*w, "config.weights");
    o.numbers("lambda", c.lambdas);
    o.numbers("s", c.s_list);
    o.number("m_weight", c.m_weight);
    std::vector<double> x0;
    o.numbers("x0", x0);
    if (!x0.empty()) {
      require(x0.size() == 2, "config.weights.x0: expected two numbers");
      c.x0 = {x0[0], x0[1]};
    }
    std::string shape;
    o.string("shape", shape);
    if (shape == "radial") {
      c.shape = BetaShape::radial;
    } else if (shape == "planar" || shape.empty()) {
      c.shape = BetaShape::planar;
    } else {
      throw ConfigError("config.weights.shape: expected 'planar' or 'radial', got '" + shape + "'");
    }
    o.finish();
  }
  if (const json* d = top.get("data")) {
    Obj o(*d, "config.data");
    o.number("r", c.r);
    o.number("amplitude", c.amplitude);
    o.number("frequency", c.frequency);
    o.finish();
  }
  if (const json* k = top.get("coefficients")) {
    Obj o(*k, "config.coefficients");
    if (const json* e = o.get("c_tilde")) c.c_tilde = parse_expression(*e, o.path("c_tilde"), base_dir);
    if (const json* e = o.get("gamma")) c.gamma = parse_expression(*e, o.path("gamma"), base_dir);
    o.finish();
  }
  if (const json* k = top.get("carleman")) {
    Obj o(*k, "config.carleman");
    o.integer("test_functions", c.test_functions);
    o.finish();
  }
  if (const json* k = top.get("stability")) {
    Obj o(*k, "config.stability");
    o.numbers("amplitudes", c.amplitudes);
    o.finish();
  }
  if (const json* k = top.get("inverse")) {
    Obj o(*k, "config.inverse");
    o.number("alpha", c.alpha);
    o.integer("max_iterations", c.max_iterations);
    o.number("armijo", c.armijo);
    o.number("shrink", c.shrink);
    o.number("gradient_tolerance", c.gradient_tolerance);
    o.boolean("snapshot_misfit", c.snapshot_misfit);
    o.boolean("noisy_snapshots", c.noisy_snapshots);
    o.number("c_min", c.c_min);
    o.numbers("noise_levels", c.noise_levels);
    o.string("observations", c.observations);
    if (!c.observations.empty() && !std::filesystem::path(c.observations).is_absolute())
      c.observations = (std::filesystem::path(base_dir) / c.observations).string();
    o.finish();
  }
  top.number("noise", c.noise);
  if (const json* s = top.get("seed")) {
    require(s->is_number_unsigned() || (s->is_number_integer() && s->get<long long>() >= 0),
            "config.seed: expected a non-negative integer");
    c.seed = s->get<std::uint64_t>();
  }
  top.string("output_dir", c.output_dir);
  top.finish();

  // Module preconditions that would otherwise surface only mid-run.
  (void)c.grid();
  (void)c.window();
  require(!c.lambdas.empty() && !c.s_list.empty(), "config.weights: lambda and s lists must be nonempty");
  for (double l : c.lambdas) require(l >= 1.0, "config.weights.lambda: values must be >= 1");
  for (double s : c.s_list) require(s >= 1.0, "config.weights.s: values must be >= 1");
  require(c.m_weight > 1.0, "config.weights.m_weight: must be > 1");
  require(c.r > 0.0, "config.data.r: must be > 0");
  require(c.test_functions >= 1, "config.carleman.test_functions: must be >= 1");
  require(!c.amplitudes.empty(), "config.stability.amplitudes: must be nonempty");
  for (double a : c.amplitudes) require(a >= 0.0, "config.stability.amplitudes: values must be >= 0");
  require(c.alpha >= 0.0, "config.inverse.alpha: must be >= 0");
  require(c.max_iterations >= 1, "config.inverse.max_iterations: must be >= 1");
  require(c.armijo > 0.0 && c.armijo < 1.0, "config.inverse.armijo: must lie in (0,1)");
  require(c.shrink > 0.0 && c.shrink < 1.0, "config.inverse.shrink: must lie in (0,1)");
  require(c.gradient_tolerance > 0.0, "config.inverse.gradient_tolerance: must be > 0");
  require(c.c_min > 0.0, "config.inverse.c_min: must be > 0");
  for (double s : c.noise_levels) require(s >= 0.0, "config.inverse.noise_levels: values must be >= 0");
  require(c.noise >= 0.0, "config.noise: must be >= 0");
  require(!c.output_dir.empty(), "config.output_dir: must be nonempty");
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), std::filesystem::path(path).parent_path().string().empty()
                                    ? "."
                                    : std::filesystem::path(path).parent_path().string());
}

}  // namespace carleman
