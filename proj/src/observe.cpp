#include "carleman/observe.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <ostream>
#include <stdexcept>
#include <string>

#include "carleman/csv.hpp"
#include "carleman/errors.hpp"

namespace carleman {

BoundaryTrace normal_trace(const SpaceTimeField& f, const Grid& grid, const TimeAxis& axis) {
  if (f.time_count() != axis.size()) throw std::invalid_argument("normal_trace: field does not span the time axis");
  BoundaryTrace tr;
  tr.gamma0_nodes = grid.gamma0_nodes();
  for (int i = 1; i < axis.window.steps(); ++i) {
    const Field& slice = f.values[axis.full_index(i)];
    std::vector<double> row;
    row.reserve(tr.gamma0_nodes.size());
    for (int node : tr.gamma0_nodes) row.push_back(normal_derivative(slice, grid, node));
    tr.slices.push_back(i);
    tr.times.push_back(axis.window.time(i));
    tr.values.push_back(std::move(row));
  }
  return tr;
}

BoundaryTrace normal_trace(const std::vector<Field>& slices, const Grid& grid, const TimeGrid& window) {
  if (static_cast<int>(slices.size()) != window.steps() + 1)
    throw std::invalid_argument("normal_trace: expected one slice per window node");
  BoundaryTrace tr;
  tr.gamma0_nodes = grid.gamma0_nodes();
  for (int i = 1; i < window.steps(); ++i) {
    std::vector<double> row;
    row.reserve(tr.gamma0_nodes.size());
    for (int node : tr.gamma0_nodes) row.push_back(normal_derivative(slices[i], grid, node));
    tr.slices.push_back(i);
    tr.times.push_back(window.time(i));
    tr.values.push_back(std::move(row));
  }
  return tr;
}

ObservationSet extract_observations(const SpaceTimeField& q, const Grid& grid, const TimeAxis& axis, const Field& c) {
  ObservationSet obs;
  obs.flux = normal_trace(time_derivative(q), grid, axis);
  Snapshot snap = snapshot_package(q, grid, axis, c);
  obs.q = std::move(snap.q);
  obs.grad_q = std::move(snap.grad_q);
  obs.lap_q = std::move(snap.lap_q);
  obs.grad_lap_q = std::move(snap.grad_lap_q);
  return obs;
}

BoundaryTrace trace_difference(const BoundaryTrace& a, const BoundaryTrace& b) {
  if (a.slices != b.slices || a.gamma0_nodes != b.gamma0_nodes)
    throw std::invalid_argument("trace_difference: traces have different layouts");
  BoundaryTrace d = a;
  for (std::size_t k = 0; k < d.values.size(); ++k) {
    for (std::size_t j = 0; j < d.values[k].size(); ++j) d.values[k][j] -= b.values[k][j];
  }
  return d;
}

namespace {

const std::vector<double>& face_weights(const Grid& grid, const BoundaryTrace& tr) {
  if (tr.gamma0_nodes != grid.gamma0_nodes()) throw std::invalid_argument("trace does not match the grid's Γ₀");
  return grid.gamma0_weights();
}

std::vector<double> window_time_weights(const TimeGrid& window) {
  const auto t = window.times();
  return trapezoid_weights(t);
}

double plain_norm(std::span<const double> f, const Grid& grid) {
  const auto& w = grid.quadrature_weights();
  double sum = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) sum += w[i] * f[i] * f[i];
  return sum;
}

double plain_norm(const VectorField& v, const Grid& grid) {
  double sum = 0.0;
  for (const auto& comp : v.components) sum += plain_norm(comp, grid);
  return sum;
}

VectorField difference(const VectorField& a, const VectorField& b) {
  VectorField d = a;
  for (std::size_t k = 0; k < d.components.size(); ++k) {
    for (std::size_t i = 0; i < d.components[k].size(); ++i) d.components[k][i] -= b.components[k][i];
  }
  return d;
}

Field difference(const Field& a, const Field& b) {
  Field d = a;
  for (std::size_t i = 0; i < d.size(); ++i) d[i] -= b[i];
  return d;
}

[[noreturn]] void non_finite(const char* what, int slice, int node) {
  throw NumericalError(std::string(what) + ": non-finite integrand at slice " + std::to_string(slice) + ", node " +
                       std::to_string(node));
}

}  // namespace

double boundary_norm(const BoundaryTrace& trace, const Grid& grid, const TimeGrid& window) {
  const auto& fw = face_weights(grid, trace);
  const auto tw = window_time_weights(window);
  double sum = 0.0;
  for (std::size_t k = 0; k < trace.values.size(); ++k) {
    double row = 0.0;
    for (std::size_t j = 0; j < fw.size(); ++j) row += fw[j] * trace.values[k][j] * trace.values[k][j];
    sum += tw[trace.slices[k]] * row;
  }
  return sum;
}

ObservationDistance observation_distance(const ObservationSet& a, const ObservationSet& b, const Grid& grid,
                                         const TimeGrid& window) {
  ObservationDistance d;
  d.flux = boundary_norm(trace_difference(a.flux, b.flux), grid, window);
  d.grad_lap = plain_norm(difference(a.grad_lap_q, b.grad_lap_q), grid);
  d.lap = plain_norm(difference(a.lap_q, b.lap_q), grid);
  d.grad = plain_norm(difference(a.grad_q, b.grad_q), grid);
  return d;
}

namespace {

// Each routine below takes the log weight per node explicitly: L(x, t_i) for a
// single slice, or the time-integrated log_time_weight inside window integrals.

Scaled integral_with(std::span<const double> density, const Grid& grid, std::span<const double> L, int slice) {
  const Field lw = fitted_log_weights(grid, L);
  const double top = *std::max_element(lw.begin(), lw.end());
  double sum = 0.0;
  for (int node = 0; node < grid.node_count(); ++node) {
    const double d = density[node];
    if (!std::isfinite(d)) non_finite("weighted_integral", slice, node);
    if (d == 0.0) continue;
    sum += d * std::exp(lw[node] - top);
  }
  if (!std::isfinite(sum)) throw NumericalError("weighted_integral: sum overflowed");
  if (sum == 0.0) return Scaled::zero();
  return {sum, top};
}

Scaled norm_with(std::span<const double> f, const Grid& grid, std::span<const double> L, int slice) {
  for (int node = 0; node < grid.node_count(); ++node) {
    if (!std::isfinite(f[node])) non_finite("weighted_norm", slice, node);
  }
  return fitted_inner(grid, L, f, f);
}

Scaled norm_with(const VectorField& f, const Grid& grid, std::span<const double> L, int slice) {
  Scaled total;
  for (const auto& comp : f.components) {
    grid.check_field(comp, "weighted_norm");
    total += norm_with(comp, grid, L, slice);
  }
  return total;
}

// f = m e^{log_scale} = (m e^{log_scale - L_i/2}) e^{L_i/2}, with L_i = -2s(η-η*) at the slice itself
Scaled scaled_norm_with(const ScaledField& f, const WeightSet& w, std::span<const double> L, int slice) {
  const Grid& grid = w.grid();
  Field r = grid.make_field();
  for (int node = 0; node < grid.node_count(); ++node) {
    if (!std::isfinite(f.mantissa[node])) non_finite("weighted_norm", slice, node);
    r[node] = f.log_scale[node] + w.s() * w.eta_excess(slice, node);
  }
  return fitted_inner(grid, L, f.mantissa, f.mantissa, r, r);
}

Field slice_log_weight(const WeightSet& w, double k, int slice) {
  Field L = w.grid().make_field();
  for (int node = 0; node < w.grid().node_count(); ++node) L[node] = w.log_weight(slice, node, k);
  return L;
}

void check_window(std::size_t n, const WeightSet& w, const char* what) {
  if (static_cast<int>(n) != w.time().steps() + 1)
    throw std::invalid_argument(std::string(what) + ": expected one entry per window slice");
}

}  // namespace

Scaled weighted_integral_space(std::span<const double> density, const WeightSet& w, double k, int slice) {
  w.grid().check_field(density, "weighted_integral_space");
  if (!w.has_slice(slice)) return Scaled::zero();
  return integral_with(density, w.grid(), slice_log_weight(w, k, slice), slice);
}

Scaled weighted_norm_space(const ScaledField& f, const WeightSet& w, int slice) {
  w.grid().check_field(f.mantissa, "weighted_norm_space");
  if (!w.has_slice(slice)) return Scaled::zero();
  return scaled_norm_with(f, w, slice_log_weight(w, 0.0, slice), slice);
}

Scaled weighted_norm_space(std::span<const double> f, const WeightSet& w, double k, int slice) {
  w.grid().check_field(f, "weighted_norm_space");
  if (!w.has_slice(slice)) return Scaled::zero();
  return norm_with(f, w.grid(), slice_log_weight(w, k, slice), slice);
}

Scaled weighted_norm_space(const VectorField& f, const WeightSet& w, double k, int slice) {
  if (!w.has_slice(slice)) return Scaled::zero();
  return norm_with(f, w.grid(), slice_log_weight(w, k, slice), slice);
}

Scaled weighted_norm_spacetime(const std::vector<ScaledField>& f, const WeightSet& w) {
  check_window(f.size(), w, "weighted_norm_spacetime");
  Scaled total;
  for (int i = 1; i < w.time().steps(); ++i) {
    w.grid().check_field(f[i].mantissa, "weighted_norm_spacetime");
    total += scaled_norm_with(f[i], w, w.log_time_weight(i, 0.0), i);
  }
  return total;
}

Scaled weighted_integral_spacetime(const std::vector<Field>& densities, const WeightSet& w, double k) {
  check_window(densities.size(), w, "weighted_integral_spacetime");
  Scaled total;
  for (int i = 1; i < w.time().steps(); ++i) {
    w.grid().check_field(densities[i], "weighted_integral_spacetime");
    total += integral_with(densities[i], w.grid(), w.log_time_weight(i, k), i);
  }
  return total;
}

Scaled weighted_integral_spacetime(std::span<const double> density, const WeightSet& w, double k) {
  w.grid().check_field(density, "weighted_integral_spacetime");
  Scaled total;
  for (int i = 1; i < w.time().steps(); ++i) total += integral_with(density, w.grid(), w.log_time_weight(i, k), i);
  return total;
}

Scaled weighted_norm_spacetime(const std::vector<Field>& f, const WeightSet& w, double k) {
  check_window(f.size(), w, "weighted_norm_spacetime");
  Scaled total;
  for (int i = 1; i < w.time().steps(); ++i) {
    w.grid().check_field(f[i], "weighted_norm_spacetime");
    total += norm_with(f[i], w.grid(), w.log_time_weight(i, k), i);
  }
  return total;
}

Scaled weighted_norm_spacetime(const std::vector<VectorField>& f, const WeightSet& w, double k) {
  check_window(f.size(), w, "weighted_norm_spacetime");
  Scaled total;
  for (int i = 1; i < w.time().steps(); ++i) total += norm_with(f[i], w.grid(), w.log_time_weight(i, k), i);
  return total;
}

Scaled weighted_boundary_norm(const BoundaryTrace& trace, const WeightSet& w, bool with_dnu_beta) {
  const Grid& grid = w.grid();
  const auto& fw = face_weights(grid, trace);
  Scaled total;
  for (std::size_t k = 0; k < trace.values.size(); ++k) {
    const int slice = trace.slices[k];
    if (!w.has_slice(slice)) continue;
    const Field& Lt = w.log_time_weight(slice, 1.0);
    std::vector<double> L;
    for (int node : trace.gamma0_nodes) L.push_back(Lt[node]);
    std::vector<double> g(fw.size()), hv(fw.size());
    for (std::size_t j = 0; j < fw.size(); ++j) {
      const int node = trace.gamma0_nodes[j];
      g[j] = hv[j] = trace.values[k][j];
      if (!std::isfinite(g[j])) non_finite("weighted_boundary_norm", slice, node);
      if (with_dnu_beta) hv[j] *= w.normal_derivative_beta(node);
    }
    total += fitted_inner_line(L, g, hv, grid.spacing());
  }
  return total;
}

Scaled scaled_norm_space(const ScaledField& f, const Grid& grid) {
  grid.check_field(f.mantissa, "scaled_norm_space");
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (f.mantissa[i] != 0.0) top = std::max(top, 2.0 * f.log_scale[i]);
  }
  if (!std::isfinite(top)) return Scaled::zero();
  const auto& qw = grid.quadrature_weights();
  double sum = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    const double m = f.mantissa[i];
    if (!std::isfinite(m)) non_finite("scaled_norm_space", -1, static_cast<int>(i));
    if (m == 0.0) continue;
    sum += qw[i] * m * m * std::exp(2.0 * f.log_scale[i] - top);
  }
  if (sum == 0.0) return Scaled::zero();
  return {sum, top};
}

Scaled scaled_norm_spacetime(const std::vector<ScaledField>& f, const TimeGrid& window, const Grid& grid) {
  if (static_cast<int>(f.size()) != window.steps() + 1)
    throw std::invalid_argument("scaled_norm_spacetime: expected one field per window slice");
  const auto tw = window_time_weights(window);
  Scaled total;
  for (std::size_t i = 0; i < f.size(); ++i) total += scaled_norm_space(f[i], grid) * tw[i];
  return total;
}

void write_observations(std::ostream& out, const ObservationSet& obs) {
  CsvTable t;
  t.header = {"kind", "index1", "index2", "value"};
  auto row = [&](const char* kind, int a, int b, double v) {
    t.add_row({kind, std::to_string(a), std::to_string(b), format_double(v)});
  };
  for (std::size_t k = 0; k < obs.flux.slices.size(); ++k) row("time", obs.flux.slices[k], 0, obs.flux.times[k]);
  for (std::size_t k = 0; k < obs.flux.slices.size(); ++k) {
    for (std::size_t j = 0; j < obs.flux.gamma0_nodes.size(); ++j)
      row("flux", obs.flux.slices[k], obs.flux.gamma0_nodes[j], obs.flux.values[k][j]);
  }
  for (std::size_t i = 0; i < obs.q.size(); ++i) row("q", static_cast<int>(i), 0, obs.q[i]);
  for (std::size_t i = 0; i < obs.lap_q.size(); ++i) row("lap_q", static_cast<int>(i), 0, obs.lap_q[i]);
  for (std::size_t a = 0; a < obs.grad_q.components.size(); ++a) {
    for (std::size_t i = 0; i < obs.grad_q.components[a].size(); ++i)
      row("grad_q", static_cast<int>(i), static_cast<int>(a), obs.grad_q.components[a][i]);
  }
  for (std::size_t a = 0; a < obs.grad_lap_q.components.size(); ++a) {
    for (std::size_t i = 0; i < obs.grad_lap_q.components[a].size(); ++i)
      row("grad_lap_q", static_cast<int>(i), static_cast<int>(a), obs.grad_lap_q.components[a][i]);
  }
  t.write(out);
}

namespace {

int parse_int(const std::string& s) {
  std::size_t pos = 0;
  const int v = std::stoi(s, &pos);
  if (pos != s.size()) throw std::invalid_argument(s);
  return v;
}

double parse_double(const std::string& s) {
  std::size_t pos = 0;
  const double v = std::stod(s, &pos);
  if (pos != s.size()) throw std::invalid_argument(s);
  return v;
}

}  // namespace

ObservationSet read_observations(std::istream& in, const Grid& grid) {
  const CsvTable t = read_csv(in);
  if (t.header != std::vector<std::string>{"kind", "index1", "index2", "value"})
    throw ConfigError("observation CSV: unexpected header");
  ObservationSet obs;
  obs.q = grid.make_field();
  obs.lap_q = grid.make_field();
  obs.grad_q = grid.make_vector_field();
  obs.grad_lap_q = grid.make_vector_field();
  obs.flux.gamma0_nodes = grid.gamma0_nodes();
  std::map<int, int> gamma_pos;
  for (std::size_t j = 0; j < obs.flux.gamma0_nodes.size(); ++j) gamma_pos[obs.flux.gamma0_nodes[j]] = static_cast<int>(j);
  std::map<int, double> times;
  std::map<int, std::vector<double>> flux;
  std::vector<char> seen_q(grid.node_count(), 0);

  const int dim = grid.dimension();
  auto node_ok = [&](int node) { return node >= 0 && node < grid.node_count(); };
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    int a = 0, b = 0;
    double v = 0.0;
    try {
      a = parse_int(row[1]);
      b = parse_int(row[2]);
      v = parse_double(row[3]);
    } catch (const std::exception&) {
      throw ConfigError("observation CSV: malformed row " + std::to_string(r + 2));
    }
    const std::string& kind = row[0];
    bool ok = true;
    if (kind == "time") {
      times[a] = v;
    } else if (kind == "flux") {
      auto it = gamma_pos.find(b);
      ok = it != gamma_pos.end();
      if (ok) {
        auto& slot = flux[a];
        slot.resize(gamma_pos.size(), std::numeric_limits<double>::quiet_NaN());
        slot[it->second] = v;
      }
    } else if (kind == "q" || kind == "lap_q") {
      ok = node_ok(a) && b == 0;
      if (ok) (kind == "q" ? obs.q : obs.lap_q)[a] = v;
      if (ok && kind == "q") seen_q[a] = 1;
    } else if (kind == "grad_q" || kind == "grad_lap_q") {
      ok = node_ok(a) && b >= 0 && b < dim;
      if (ok) (kind == "grad_q" ? obs.grad_q : obs.grad_lap_q).components[b][a] = v;
    } else {
      ok = false;
    }
    if (!ok) throw ConfigError("observation CSV: invalid row " + std::to_string(r + 2) + " (" + kind + ")");
  }
  for (auto& [slice, values] : flux) {
    auto it = times.find(slice);
    if (it == times.end()) throw ConfigError("observation CSV: flux slice " + std::to_string(slice) + " has no time");
    for (double v : values) {
      if (std::isnan(v)) throw ConfigError("observation CSV: incomplete flux slice " + std::to_string(slice));
    }
    obs.flux.slices.push_back(slice);
    obs.flux.times.push_back(it->second);
    obs.flux.values.push_back(std::move(values));
  }
  if (obs.flux.slices.empty()) throw ConfigError("observation CSV: no flux rows");
  if (std::count(seen_q.begin(), seen_q.end(), 1) != grid.node_count())
    throw ConfigError("observation CSV: q snapshot does not cover the grid");
  return obs;
}

}  // namespace carleman
