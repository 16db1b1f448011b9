#include "carleman/weights.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <stdexcept>

#include "carleman/errors.hpp"

namespace carleman {

struct WeightSet::TimeWeightCache {
  std::mutex mutex;
  std::map<double, std::vector<Field>> tables;
};

namespace {

bool inside_closed_box(const Grid& grid, const WeightParams& p) {
  if (grid.dimension() == 1 || p.shape == BetaShape::planar) {
    const int a = face_axis(grid.gamma0_face());
    return p.x0[a] >= 0.0 && p.x0[a] <= 1.0;
  }
  return p.x0[0] >= 0.0 && p.x0[0] <= 1.0 && p.x0[1] >= 0.0 && p.x0[1] <= 1.0;
}

// Axes contributing to β̃.
std::vector<int> beta_axes(const Grid& grid, const WeightParams& p) {
  if (grid.dimension() == 1) return {0};
  if (p.shape == BetaShape::planar) return {face_axis(grid.gamma0_face())};
  return {0, 1};
}

}  // namespace

WeightSet WeightSet::build(const Grid& grid, const TimeGrid& time, const WeightParams& params) {
  if (!(params.lambda >= 1.0)) throw ConfigError("weights: lambda must be >= 1");
  if (!(params.s >= 1.0)) throw ConfigError("weights: s must be >= 1");
  if (!(params.m > 1.0)) throw ConfigError("weights: m must be > 1");
  if (inside_closed_box(grid, params)) throw ConfigError("weights: anchor point x0 lies inside the closed domain");

  WeightSet w(grid, time);
  w.params_ = params;
  w.cache_ = std::make_shared<TimeWeightCache>();
  const int nn = grid.node_count();
  const auto axes = beta_axes(grid, params);

  w.beta_tilde_ = grid.make_field();
  w.grad_beta_ = grid.make_vector_field();
  for (int node = 0; node < nn; ++node) {
    double b = 0.0;
    for (int a : axes) {
      const double d = grid.coord(node, a) - params.x0[a];
      b += d * d;
      w.grad_beta_.components[a][node] = 2.0 * d;
    }
    w.beta_tilde_[node] = b;
  }

  const double sup = *std::max_element(w.beta_tilde_.begin(), w.beta_tilde_.end());
  const double inf = *std::min_element(w.beta_tilde_.begin(), w.beta_tilde_.end());
  if (!(inf > 0.0)) throw ConfigError("weights: beta_tilde must be positive on the closed domain");
  w.K_ = params.m * sup;
  w.beta_ = w.beta_tilde_;
  for (double& b : w.beta_) b += w.K_;

  const Field grad_sq = squared_magnitude(w.grad_beta_);
  w.C0_ = std::sqrt(*std::min_element(grad_sq.begin(), grad_sq.end()));
  if (!(w.C0_ > 0.0)) throw ConfigError("weights: |grad beta_tilde| vanishes at a node (Assumption on beta violated)");

  for (int node : grid.boundary_nodes()) {
    if (grid.in_gamma0(node)) continue;
    for (Face f : grid.faces_of(node)) {
      const double dnu = face_sign(f) * w.grad_beta_.components[face_axis(f)][node];
      if (dnu > 1e-12 * std::max(1.0, std::sqrt(sup)))
        throw ConfigError("weights: normal derivative of beta_tilde is positive at boundary node " +
                          std::to_string(node) + " outside the observation boundary (" + face_name(f) +
                          " face, value " + std::to_string(dnu) + ")");
    }
  }

  const int m = time.steps();
  const double lam = params.lambda;
  w.log_phi_.assign(m + 1, Field());
  w.eta_.assign(m + 1, Field());
  w.eta_excess_.assign(m + 1, Field());
  w.dt_phi_.assign(m + 1, Field());
  w.dt_eta_.assign(m + 1, Field());
  const double beta_max = sup + w.K_;
  const double profile_mid = 1.0 / time.bump(time.mid_index());
  const double gap_min = std::exp(lam * beta_max) * std::expm1(lam * (2.0 * w.K_ - beta_max));
  w.eta_floor_ = gap_min * profile_mid;
  w.gap_.resize(nn);
  w.rise_.resize(nn);
  for (int node = 0; node < nn; ++node) {
    const double eb = std::exp(lam * w.beta_[node]);
    w.gap_[node] = eb * std::expm1(lam * (2.0 * w.K_ - w.beta_[node]));
    w.rise_[node] = eb * std::expm1(lam * (beta_max - w.beta_[node]));
  }
  for (int i = 1; i < m; ++i) {
    const double bump = time.bump(i);
    const double profile = 1.0 / bump;
    const double dprofile = profile * profile * time.skew(i);  // dΦ/dt = Φ²(2t - t0 - T)
    // Φ - Φ(T′) = (T′-t)² / (bump · bump(T′)) since bump = (t-t0)(T-t)
    const double dt_mid = time.dt() * (i - time.mid_index());
    const double profile_rise = dt_mid * dt_mid * profile * profile_mid;
    Field lp(nn), et(nn), ex(nn), dp(nn), de(nn);
    for (int node = 0; node < nn; ++node) {
      const double eb = std::exp(lam * w.beta_[node]);
      const double gap = eb * std::expm1(lam * (2.0 * w.K_ - w.beta_[node]));  // e^{2λK} - e^{λβ}
      lp[node] = lam * w.beta_[node] - std::log(bump);
      et[node] = gap * profile;
      // η - η* = (Φ - Φ(T′))·gap + Φ(T′)·(e^{λ max β} - e^{λβ})
      ex[node] = profile_rise * gap + profile_mid * eb * std::expm1(lam * (beta_max - w.beta_[node]));
      dp[node] = eb * dprofile;
      de[node] = gap * dprofile;
      if (!(et[node] >= 0.0) || !std::isfinite(et[node]) || !std::isfinite(lp[node]))
        throw NumericalError("weights: eta/phi not finite and nonnegative at node " + std::to_string(node));
    }
    w.log_phi_[i] = std::move(lp);
    w.eta_[i] = std::move(et);
    w.eta_excess_[i] = std::move(ex);
    w.dt_phi_[i] = std::move(dp);
    w.dt_eta_[i] = std::move(de);
  }
  return w;
}

double WeightSet::normal_derivative_beta(int node) const {
  const auto nu = grid_.normal(node);
  double d = 0.0;
  for (int a = 0; a < grid_.dimension(); ++a) d += nu[a] * grad_beta_.components[a][node];
  return d;
}

WeightSet WeightSet::with_s(double s) const {
  if (!(s >= 1.0)) throw ConfigError("weights: s must be >= 1");
  WeightSet w = *this;
  w.params_.s = s;
  w.cache_ = std::make_shared<TimeWeightCache>();
  return w;
}

WeightSet WeightSet::with_eta_disabled() const {
  WeightSet w = *this;
  w.eta_floor_ = 0.0;
  w.eta_disabled_ = true;
  w.cache_ = std::make_shared<TimeWeightCache>();
  for (int i = 1; i < time_.steps(); ++i) {
    std::fill(w.eta_[i].begin(), w.eta_[i].end(), 0.0);
    std::fill(w.eta_excess_[i].begin(), w.eta_excess_[i].end(), 0.0);
    std::fill(w.dt_eta_[i].begin(), w.dt_eta_[i].end(), 0.0);
  }
  return w;
}

double WeightSet::log_weight_at(double t, int node, double k) const {
  const double t0 = time_.t0(), T = time_.T();
  const double bump = (t - t0) * (T - t);
  if (!(bump > 0.0)) return -std::numeric_limits<double>::infinity();
  const double log_phi = params_.lambda * beta_[node] - std::log(bump);
  if (eta_disabled_) return k * log_phi;
  const double half = 0.5 * (T - t0);
  const double d = t - (t0 + half);
  // Φ(t) - Φ(T′) = (t-T′)² / (bump · bump(T′))
  const double excess = d * d / (bump * half * half) * gap_[node] + rise_[node] / (half * half);
  return k * log_phi - 2.0 * params_.s * excess;
}

namespace {

// ∫ over [lo, hi] of f, with any sharp layer sitting at the end `peak`. Dyadic
// pieces shrinking toward that end, 8-point Gauss-Legendre on each: layers down
// to 2^-60 of the interval are resolved without adaptivity.
template <class F>
double graded_integral(const F& f, double lo, double hi, bool peak_at_hi) {
  static constexpr std::array<double, 4> x{0.1834346424956498, 0.5255324099163290, 0.7966664774136267, 0.9602898564975363};
  static constexpr std::array<double, 4> w{0.3626837833783620, 0.3137066458778873, 0.2223810344533745, 0.1012285362903763};
  const double h = hi - lo;
  auto at = [&](double u) { return peak_at_hi ? hi - u * h : lo + u * h; };
  double total = 0.0;
  double outer = 1.0;
  for (int level = 0; level <= 60; ++level) {
    const double inner = level == 60 ? 0.0 : 0.5 * outer;
    const double c = 0.5 * (outer + inner), r = 0.5 * (outer - inner);
    double piece = 0.0;
    for (int q = 0; q < 4; ++q) piece += w[q] * (f(at(c - r * x[q])) + f(at(c + r * x[q])));
    total += piece * r * h;
    outer = inner;
  }
  return total;
}

}  // namespace

const Field& WeightSet::log_time_weight(int i, double k) const {
  if (!has_slice(i)) throw std::out_of_range("log_time_weight: slice has no weight");
  std::lock_guard lock(cache_->mutex);
  auto it = cache_->tables.find(k);
  if (it == cache_->tables.end()) {
    const int m = time_.steps();
    const int nn = grid_.node_count();
    std::vector<Field> table(m + 1, Field(nn, -std::numeric_limits<double>::infinity()));
    // L depends on x only through β
    std::map<double, std::vector<int>> classes;
    for (int node = 0; node < nn; ++node) classes[beta_[node]].push_back(node);
    // T′ is a window node, so on each half of a hat the η part of L is monotone
    for (const auto& [b, nodes] : classes) {
      const int rep = nodes.front();
      auto L = [&](double t) { return log_weight_at(t, rep, k); };
      for (int j = 1; j < m; ++j) {
        // the two halves of the hat, each with the exponent referenced to its largest sampled value
        double total = 0.0, ref_total = -std::numeric_limits<double>::infinity();
        std::vector<std::pair<double, double>> parts;
        for (int side : {-1, 1}) {
          const double a = time_.time(j), c = time_.time(j + side);
          const double lo = std::min(a, c), hi = std::max(a, c);
          double ref = -std::numeric_limits<double>::infinity();
          for (int q = 0; q <= 16; ++q) ref = std::max(ref, L(lo + (hi - lo) * q / 16.0));
          if (!std::isfinite(ref)) continue;
          auto f = [&](double t) {
            const double hat = std::abs(t - c) / (hi - lo);
            const double e = L(t) - ref;
            return e == -std::numeric_limits<double>::infinity() ? 0.0 : hat * std::exp(e);
          };
          const double v = graded_integral(f, lo, hi, L(hi) >= L(lo));
          if (v > 0.0) parts.emplace_back(v, ref);
        }
        for (const auto& [v, ref] : parts) ref_total = std::max(ref_total, ref);
        for (const auto& [v, ref] : parts) total += v * std::exp(ref - ref_total);
        const double lw = total > 0.0 ? std::log(total) + ref_total : -std::numeric_limits<double>::infinity();
        for (int node : nodes) table[j][node] = lw;
      }
    }
    it = cache_->tables.emplace(k, std::move(table)).first;
  }
  return it->second[i];
}

TimeProfile weight_time_profile(const TimeGrid& time) {
  TimeProfile p;
  const int m = time.steps();
  p.values.assign(m + 1, std::numeric_limits<double>::infinity());
  p.min_value = std::numeric_limits<double>::infinity();
  for (int i = 1; i < m; ++i) {
    p.values[i] = 1.0 / time.bump(i);
    if (p.values[i] < p.min_value) {
      p.min_value = p.values[i];
      p.argmin = i;
    }
  }
  if (p.argmin != time.mid_index()) throw std::logic_error("weight_time_profile: minimizer is not the midpoint");
  return p;
}

WeightBounds weight_bounds_check(const WeightSet& weights) {
  WeightBounds b;
  const double ninf = -std::numeric_limits<double>::infinity();
  double l1 = ninf, l2 = ninf, l3 = ninf, l4 = ninf;
  const auto safe_log = [](double v) { return v == 0.0 ? -std::numeric_limits<double>::infinity() : std::log(std::abs(v)); };
  for (int i = 1; i < weights.time().steps(); ++i) {
    for (int node = 0; node < weights.grid().node_count(); ++node) {
      const double lp = weights.log_phi(i, node);
      l1 = std::max(l1, safe_log(weights.dt_eta(i, node)) - 2.0 * lp);
      l2 = std::max(l2, safe_log(weights.dt_phi(i, node)) - 3.0 * lp);
      l3 = std::max(l3, -2.0 * lp);
      l4 = std::max(l4, -lp);
    }
  }
  b.sup_dt_eta_over_phi2 = std::exp(l1);
  b.sup_dt_phi_over_phi3 = std::exp(l2);
  b.sup_phi_inv_over_phi = std::exp(l3);
  b.sup_phi_inv2_over_phi_inv = std::exp(l4);
  b.finite = std::isfinite(b.sup_dt_eta_over_phi2) && std::isfinite(b.sup_dt_phi_over_phi3) &&
             std::isfinite(b.sup_phi_inv_over_phi) && std::isfinite(b.sup_phi_inv2_over_phi_inv);
  return b;
}

}  // namespace carleman
