// One line per acceptance criterion; exit status 1 if any fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "carleman/carleman_check.hpp"
#include "carleman/config.hpp"
#include "carleman/energy_check.hpp"
#include "carleman/errors.hpp"
#include "carleman/parallel.hpp"
#include "carleman/poincare_check.hpp"
#include "carleman/stability.hpp"

using namespace carleman;
namespace fs = std::filesystem;
using std::numbers::pi;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

class Detail {
 public:
  // records one sub-check and keeps the verdict
  void check(bool ok, const std::string& what) {
    pass_ = pass_ && ok;
    if (!text_.empty()) text_ += "; ";
    text_ += what + (ok ? "" : " [FAIL]");
  }
  Outcome done() const { return {pass_, text_}; }

 private:
  bool pass_ = true;
  std::string text_;
};

std::string num(double v, int digits = 3) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct Env {
  ExperimentConfig cfg;
  int jobs = 1;
  std::string cli;
};

StabilitySetup setup_of(const ExperimentConfig& cfg) {
  const Grid g = cfg.grid();
  return {g, make_time_axis(cfg.window()), default_heat_data(g, cfg.r, cfg.amplitude, cfg.frequency)};
}

Field plus(const Field& a, const Field& b) {
  Field r = a;
  for (std::size_t k = 0; k < r.size(); ++k) r[k] += b[k];
  return r;
}

// 1. manufactured solution q = e^{-t} sin(πx), c = 1/π²
Outcome forward_solver(const Env&) {
  const auto t0 = std::chrono::steady_clock::now();
  auto max_error = [](int n) {
    const Grid g = Grid::build(1, n, Face::east);
    const TimeAxis axis = make_time_axis(TimeGrid::build(0.0, 2.0, 4 * n));
    const SpaceTimeField q = solve_heat({g.make_field(1.0 / (pi * pi)), manufactured_heat_data(g)}, g, axis);
    double e = 0.0;
    for (int k = 0; k < q.time_count(); ++k)
      for (int node = 0; node < g.node_count(); ++node)
        e = std::max(e, std::abs(q.values[k][node] - std::exp(-q.times[k]) * std::sin(pi * g.coord(node, 0))));
    return e;
  };
  const double e32 = max_error(32), e64 = max_error(64);
  const double order = std::log2(e32 / e64);
  const double t = seconds_since(t0);
  Detail d;
  d.check(e32 <= 1e-3, "max error " + num(e32) + " <= 1e-3 at n=32, dt=1/64");
  d.check(order >= 1.8, "order " + num(order) + " >= 1.8");
  d.check(t < 5.0, "runtime " + num(t, 2) + " s < 5 s");
  return d.done();
}

// 2. pointwise weight invariants, 1D default and 2D n=16
Outcome weight_invariants(const Env& env) {
  Detail d;
  const double slack = 1e-12;
  for (int dim : {1, 2}) {
    ExperimentConfig cfg = env.cfg;
    cfg.dimension = dim;
    if (dim == 2) cfg.n = 16;
    const Grid g = cfg.grid();
    const TimeGrid tg = cfg.window();
    double worst_grad = 1e300, worst_normal = -1e300, worst_eta = 1e300, worst_dt = 0.0;
    bool argmin_ok = true, built = true;
    for (double lambda : cfg.lambdas) {
      for (double s : cfg.s_list) {
        std::optional<WeightSet> built_w;
        try {
          built_w = WeightSet::build(g, tg, cfg.weight_params(lambda, s));
        } catch (const ConfigError&) {
          built = false;
          continue;
        }
        const WeightSet& w = *built_w;
        for (int node = 0; node < g.node_count(); ++node) {
          double norm2 = 0.0;
          for (const Field& comp : w.grad_beta().components) norm2 += comp[node] * comp[node];
          worst_grad = std::min(worst_grad, std::sqrt(norm2) - w.C0());
        }
        for (int node : g.boundary_nodes()) {
          if (g.in_gamma0(node)) continue;
          for (Face f : g.faces_of(node))
            worst_normal = std::max(worst_normal, face_sign(f) * w.grad_beta().components[face_axis(f)][node]);
        }
        for (int i = 1; i < tg.steps(); ++i)
          for (int node = 0; node < g.node_count(); ++node) worst_eta = std::min(worst_eta, w.eta(i, node));
        for (int node = 0; node < g.node_count(); ++node)
          worst_dt = std::max(worst_dt, std::abs(w.dt_eta(tg.mid_index(), node)));
        if (!(w.C0() > 0.0)) worst_grad = -1.0;
      }
    }
    const TimeProfile prof = weight_time_profile(tg);
    argmin_ok = prof.argmin == tg.mid_index();
    const std::string tag = dim == 1 ? "1D" : "2D";
    d.check(built, tag + " build checks pass");
    d.check(worst_grad >= -slack, tag + " min(|grad beta| - C0) = " + num(worst_grad));
    d.check(worst_normal <= slack, tag + " max d_nu beta off Gamma0 = " + num(worst_normal));
    d.check(worst_eta >= 0.0, tag + " min eta = " + num(worst_eta));
    d.check(worst_dt <= slack, tag + " max |d_t eta(T')| = " + num(worst_dt));
    d.check(argmin_ok, tag + " argmin Phi at T'");
  }
  return d.done();
}

// 3. Carleman estimate over the seeded suite
Outcome carleman_estimate(const Env& env) {
  const auto t0 = std::chrono::steady_clock::now();
  const ExperimentConfig& cfg = env.cfg;
  const Grid g = cfg.grid();
  const TimeGrid tg = cfg.window();
  const Field c = cfg.c_tilde.sample(g);
  const auto suite = carleman_test_suite(g, tg, 20, cfg.seed);
  const WeightParams base = cfg.weight_params(cfg.lambdas.front(), cfg.s_list.front());
  const CarlemanSweep sw = carleman_sweep(suite, c, g, tg, base, cfg.s_list, cfg.lambdas, {}, env.jobs);

  auto doubled = suite;
  for (auto& q : doubled)
    for (auto& slice : q)
      for (double& v : slice) v *= 2.0;
  const CarlemanSweep sw2 = carleman_sweep(doubled, c, g, tg, base, cfg.s_list, cfg.lambdas, {}, env.jobs);

  bool finite = true;
  double worst_scale = 0.0;
  for (std::size_t k = 0; k < sw.reports.size(); ++k) {
    finite = finite && std::isfinite(sw.reports[k].ratio) && sw.reports[k].ratio > 0.0;
    worst_scale = std::max(worst_scale, std::abs(sw2.reports[k].ratio / sw.reports[k].ratio - 1.0));
  }
  double worst_growth = 0.0;
  for (std::size_t p = 0; p < sw.summary.size(); ++p) {
    for (std::size_t q = 0; q < sw.summary.size(); ++q) {
      if (sw.summary[q].lambda == sw.summary[p].lambda && sw.summary[q].s == 2.0 * sw.summary[p].s)
        worst_growth = std::max(worst_growth, sw.summary[q].max_ratio / sw.summary[p].max_ratio);
    }
  }
  const double t = seconds_since(t0);
  Detail d;
  d.check(finite, std::to_string(sw.reports.size()) + " ratios finite and positive");
  d.check(worst_growth <= 1.1, "max ratio growth under s -> 2s " + num(worst_growth, 5) + " <= 1.1");
  d.check(worst_scale <= 1e-12, "q -> 2q ratio change " + num(worst_scale) + " <= 1e-12");
  d.check(t < 120.0, "runtime " + num(t, 2) + " s < 120 s");
  return d.done();
}

// 4. Poincaré-type lemma and proposition
Outcome poincare(const Env& env) {
  const ExperimentConfig& cfg = env.cfg;
  const StabilitySetup st = setup_of(cfg);
  const Field ct = cfg.c_tilde.sample(st.grid);
  const SpaceTimeField q_tilde = solve_heat({ct, st.data}, st.grid, st.axis);
  const Field q_mid = q_tilde.values[st.axis.mid_full_index()];
  const auto family = perturbation_family(st.grid, cfg.amplitudes);

  bool finite = true;
  int count = 0;
  Scaled smallest_side;
  bool have_smallest = false;
  auto track = [&](const EstimateReport& r) {
    finite = finite && std::isfinite(r.log_ratio) && std::isfinite(r.ratio);
    ++count;
    for (const Scaled* v : {&r.lhs_total, &r.rhs_total})
      if (!v->is_zero() && (!have_smallest || v->log_abs() < smallest_side.log_abs())) {
        smallest_side = *v;
        have_smallest = true;
      }
  };
  std::vector<TwinSolution> twins(family.size());
  parallel_for(static_cast<int>(family.size()), env.jobs, [&](int i) {
    twins[i] = solve_twin(plus(ct, family[i].gamma), q_tilde, st.data, st.grid, st.axis);
  });
  for (double lambda : cfg.lambdas) {
    for (double s : cfg.s_list) {
      const WeightSet w = WeightSet::build(st.grid, st.axis.window, cfg.weight_params(lambda, s));
      const TransportBase base = make_transport_base(q_mid, w);
      for (std::size_t i = 0; i < family.size(); ++i) {
        track(lemma_sides(family[i].gamma, base, w));
        const PropositionReport p = proposition_sides(family[i].gamma, twins[i], st.axis, w);
        track(p.scalar);
        track(p.gradient);
        track(p.combined);
      }
    }
  }

  // identity residual under joint refinement of the configured (n, m)
  std::vector<double> res;
  for (int k : {1, 2, 4}) {
    ExperimentConfig r = cfg;
    r.n = cfg.n * k / 2;
    r.m = cfg.m * k / 2;
    const StabilitySetup rs = setup_of(r);
    const Field rct = r.c_tilde.sample(rs.grid);
    const Field gam = project_admissible(r.gamma.sample(rs.grid), rs.grid);
    const Field c = plus(rct, gam);
    const TwinSolution twin = solve_twin(c, rct, rs.data, rs.grid, rs.axis);
    double m = 0.0;
    for (double v : cit_residual(gam, c, twin, rs.axis, rs.grid)) m = std::max(m, std::abs(v));
    res.push_back(m);
  }
  const double order = std::min(std::log2(res[0] / res[1]), std::log2(res[1] / res[2]));

  // γ ≡ 0
  const WeightSet w = WeightSet::build(st.grid, st.axis.window, cfg.weight_params(cfg.lambdas.front(), cfg.s_list.front()));
  const TwinSolution same = solve_twin(ct, q_tilde, st.data, st.grid, st.axis);
  const PropositionReport z = proposition_sides(st.grid.make_field(), same, st.axis, w);
  const EstimateReport zl = lemma_sides(st.grid.make_field(), make_transport_base(q_mid, w), w);
  double zero_log = -std::numeric_limits<double>::infinity();
  for (const EstimateReport* r : {&z.combined, &zl})
    for (const Scaled* v : {&r->lhs_total, &r->rhs_total}) zero_log = std::max(zero_log, v->log_abs());
  const bool zero_ok = zero_log <= std::log(1e-12) + smallest_side.log_abs();

  Detail d;
  d.check(finite, std::to_string(count) + " ratios finite over the family");
  d.check(order >= 1.0, "identity residual " + num(res[0]) + ", " + num(res[1]) + ", " + num(res[2]) +
                            " (order " + num(order) + " >= 1)");
  d.check(zero_ok, "gamma = 0 sides <= 1e-12 x smallest family side (log10 " + num(zero_log / std::log(10.0)) + ")");
  return d.done();
}

// 5. snapshot and energy bounds
Outcome snapshot_energy(const Env& env) {
  const ExperimentConfig& cfg = env.cfg;
  const StabilitySetup st = setup_of(cfg);
  const Field ct = cfg.c_tilde.sample(st.grid);
  const Field gam = project_admissible(cfg.gamma.sample(st.grid), st.grid);
  const Field c = plus(ct, gam);
  const TwinSolution twin = solve_twin(c, ct, st.data, st.grid, st.axis);
  bool finite = true, nonneg = true;
  double worst_early = -1e300, worst_paths = 0.0;
  for (double lambda : cfg.lambdas) {
    for (double s : cfg.s_list) {
      const WeightSet w = WeightSet::build(st.grid, st.axis.window, cfg.weight_params(lambda, s));
      const EstimateReport sn = snapshot_bound_sides(twin.y, gam, st.axis, w);
      const EstimateReport en = energy_bound_sides(twin.y, gam, c, st.axis, w);
      finite = finite && std::isfinite(sn.log_ratio) && std::isfinite(en.log_ratio) && std::isfinite(sn.ratio) &&
               std::isfinite(en.ratio);
      const EnergyCurve e = energy(twin.y, st.axis, c, w);
      for (const Scaled& v : e.E) nonneg = nonneg && v.mantissa >= 0.0;
      if (s >= 4.0) worst_early = std::max(worst_early, (e.E[1].log_abs() - e.E_mid.log_abs()) / std::log(10.0));
      const Scaled other = energy_at_mid(twin.y, st.axis, c, w);
      worst_paths = std::max(worst_paths, std::abs(std::expm1(other.log_abs() - e.E_mid.log_abs())));
    }
  }
  Detail d;
  d.check(finite, "snapshot and energy ratios finite");
  d.check(nonneg, "E(t) >= 0 on every slice");
  d.check(worst_early <= -6.0, "log10 E(t0+dt)/E(T') at s >= 4: " + num(worst_early, 4) + " <= -6");
  d.check(worst_paths <= 1e-12, "two E(T') paths differ by " + num(worst_paths) + " <= 1e-12 relative");
  return d.done();
}

// 6. stability over the 12-member family
Outcome stability(const Env& env) {
  const auto t0 = std::chrono::steady_clock::now();
  const ExperimentConfig& cfg = env.cfg;
  const StabilitySetup st = setup_of(cfg);
  const auto family = perturbation_family(st.grid, cfg.amplitudes);
  const Field ct = cfg.c_tilde.sample(st.grid);
  bool finite = true;
  double lo = 1e300, hi = -1e300, max_ratio = 0.0;
  for (double lambda : cfg.lambdas) {
    for (double s : cfg.s_list) {
      const WeightSet w = WeightSet::build(st.grid, st.axis.window, cfg.weight_params(lambda, s));
      const StabilitySweep sw = stability_sweep(family, ct, st, w, env.jobs);
      finite = finite && sw.argmax >= 0 && std::isfinite(sw.max_ratio);
      max_ratio = std::max(max_ratio, sw.max_ratio);
      for (const ShapeSlope& sl : sw.slopes) {
        lo = std::min(lo, sl.slope);
        hi = std::max(hi, sl.slope);
      }
    }
  }
  const double t = seconds_since(t0);
  Detail d;
  d.check(family.size() == 12, std::to_string(family.size()) + " members");
  d.check(finite, "max ratio finite (largest " + num(max_ratio) + ")");
  d.check(lo >= 0.8 && hi <= 1.2, "slopes in [" + num(lo, 4) + ", " + num(hi, 4) + "] within 1 +- 0.2");
  d.check(t < 300.0, "runtime " + num(t, 2) + " s < 300 s");
  return d.done();
}

// 7. inverse solver
Outcome inverse(const Env& env) {
  const ExperimentConfig& cfg = env.cfg;
  const StabilitySetup st = setup_of(cfg);
  const Grid& g = st.grid;
  const Field ct = cfg.c_tilde.sample(g);
  const Field gam = project_admissible(cfg.gamma.sample(g), g);
  const Field truth = plus(ct, gam);
  Detail d;

  {
    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> nd;
    const CrankNicolson cn(g, truth);
    std::vector<double> x(cn.op().rows()), y(cn.op().rows());
    for (auto& v : x) v = nd(rng);
    for (auto& v : y) v = nd(rng);
    const double dt = st.axis.window.dt();
    const auto ax = cn.step_interior(x, dt);
    const auto aty = cn.step_interior_transpose(y, dt);
    double lhs = 0.0, rhs = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      lhs += ax[i] * y[i];
      rhs += x[i] * aty[i];
      scale += std::abs(ax[i] * y[i]);
    }
    const double rel = std::abs(lhs - rhs) / scale;
    d.check(rel <= 1e-12, "CN step adjoint " + num(rel) + " <= 1e-12");
  }

  const ObservationSet data = extract_observations(solve_heat({truth, st.data}, g, st.axis), g, st.axis, truth);
  InverseConfig ic = cfg.inverse();
  {
    Field c = ct;
    for (std::size_t k = 0; k < c.size(); ++k) c[k] += 0.5 * gam[k];
    const MisfitGradient mg = misfit_and_gradient(c, data, st, ic);
    std::mt19937_64 rng(cfg.seed + 1);
    std::normal_distribution<double> nd;
    const double tau = 1e-5;
    double worst = 0.0;
    for (int trial = 0; trial < 5; ++trial) {
      Field dir = g.make_field();
      double norm = 0.0;
      for (int k = 0; k < g.node_count(); ++k)
        if (!in_boundary_layer(g, k)) {
          dir[k] = nd(rng);
          norm += dir[k] * dir[k];
        }
      // unit directions: the O(τ²) remainder grows with |δ|²
      for (double& v : dir) v /= std::sqrt(norm);
      Field cp = c, cm = c;
      double adj = 0.0;
      for (int k = 0; k < g.node_count(); ++k) {
        cp[k] += tau * dir[k];
        cm[k] -= tau * dir[k];
        adj += mg.gradient[k] * dir[k];
      }
      const double fd = (misfit_value(cp, data, st, ic) - misfit_value(cm, data, st, ic)) / (2.0 * tau);
      worst = std::max(worst, std::abs(fd - adj) / std::abs(fd));
    }
    d.check(worst <= 1e-5, "gradient vs central differences on 5 unit directions " + num(worst) + " <= 1e-5");
  }
  {
    InverseConfig capped = ic;
    capped.noise = 0.0;
    capped.max_iterations = 200;
    const Reconstruction rec = reconstruct(data, st, capped, &truth);
    const double err = rec.log.back().h1_error;
    d.check(err <= 0.05, "noiseless H1 error " + num(err) + " <= 0.05 after " +
                             std::to_string(rec.log.back().iteration) + " iterations");
  }
  {
    const std::vector<double> sigmas{1e-4, 1e-3, 1e-2};
    const auto pts = noise_sweep(data, st, ic, truth, sigmas, env.jobs);
    bool mono = true;
    std::string list;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (i) mono = mono && pts[i].h1_error >= 0.8 * pts[i - 1].h1_error;
      list += (i ? ", " : "") + num(pts[i].h1_error);
    }
    d.check(mono, "noise errors " + list + " grow (20% slack)");
  }
  return d.done();
}

// 8. two runs of `all`, byte-identical CSVs
Outcome determinism(const Env& env, const std::string& config_path) {
  const fs::path root = fs::temp_directory_path() / "carleman_lab_acceptance";
  fs::remove_all(root);
  fs::create_directories(root);
  std::vector<fs::path> dirs{root / "run1", root / "run2"};
  Detail d;
  for (std::size_t r = 0; r < dirs.size(); ++r) {
    const std::string cmd = "\"" + env.cli + "\" all --config \"" + config_path + "\" --out \"" + dirs[r].string() +
                            "\" --jobs " + std::to_string(env.jobs) + " > \"" + (root / "log.txt").string() + "\" 2>&1";
    const int status = std::system(cmd.c_str());
    if (status != 0) {
      d.check(false, "run " + std::to_string(r + 1) + " exited with status " + std::to_string(status));
      return d.done();
    }
  }
  auto csvs = [](const fs::path& dir) {
    std::vector<std::string> names;
    for (const auto& e : fs::directory_iterator(dir))
      if (e.path().extension() == ".csv") names.push_back(e.path().filename().string());
    std::sort(names.begin(), names.end());
    return names;
  };
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  const auto a = csvs(dirs[0]), b = csvs(dirs[1]);
  d.check(a == b && !a.empty(), std::to_string(a.size()) + " CSVs in each run");
  int differing = 0;
  for (const auto& name : a)
    if (slurp(dirs[0] / name) != slurp(dirs[1] / name)) ++differing;
  d.check(differing == 0, std::to_string(differing) + " files differ");
  return d.done();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::string config_path = CARLEMAN_DEFAULT_CONFIG;
  Env env;
  env.jobs = std::max(1u, std::thread::hardware_concurrency());
  env.cli = CARLEMAN_CLI_PATH;
  std::vector<int> only;
  app.add_option("--config", config_path, "base configuration (1D default)");
  app.add_option("--jobs", env.jobs, "worker threads")->check(CLI::PositiveNumber);
  app.add_option("--cli", env.cli, "path to the carleman-lab binary");
  app.add_option("--only", only, "criteria to run (default all)");
  CLI11_PARSE(app, argc, argv);

  try {
    env.cfg = load_config(config_path);
  } catch (const std::exception& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  }

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"forward solver", [&] { return forward_solver(env); }},
      {"weight invariants", [&] { return weight_invariants(env); }},
      {"Carleman estimate", [&] { return carleman_estimate(env); }},
      {"Poincare-type lemma and proposition", [&] { return poincare(env); }},
      {"snapshot and energy bounds", [&] { return snapshot_energy(env); }},
      {"stability", [&] { return stability(env); }},
      {"inverse solver", [&] { return inverse(env); }},
      {"CLI determinism", [&] { return determinism(env, config_path); }},
  };
  int failed = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const int id = static_cast<int>(k) + 1;
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " " << id << " " << criteria[k].first << ": " << o.detail << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
