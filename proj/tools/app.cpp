#include "app.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "carleman/carleman_check.hpp"
#include "carleman/energy_check.hpp"
#include "carleman/errors.hpp"
#include "carleman/poincare_check.hpp"
#include "carleman/report.hpp"
#include "carleman/stability.hpp"

namespace carleman::app {

namespace fs = std::filesystem;

const std::vector<std::string>& commands() {
  static const std::vector<std::string> names{"forward",          "verify-carleman", "verify-poincare",
                                              "verify-snapshot",  "verify-energy",   "verify-stability",
                                              "sweep-stability",  "reconstruct",     "all"};
  return names;
}

namespace {

std::string fmt(double v) { return format_double(v); }

// Everything the commands share; the twin solve is done at most once.
class Context {
 public:
  Context(const ExperimentConfig& cfg, const RunOptions& opt, std::ostream& log)
      : cfg_(cfg),
        opt_(opt),
        log_(log),
        grid_(cfg.grid()),
        axis_(make_time_axis(cfg.window())),
        data_(default_heat_data(grid_, cfg.r, cfg.amplitude, cfg.frequency)) {
    out_ = opt.out_dir.empty() ? cfg.output_dir : opt.out_dir;
    std::error_code ec;
    fs::create_directories(out_, ec);
    if (ec || !fs::is_directory(out_)) throw ConfigError("cannot create output directory '" + out_ + "'");
    c_tilde_ = cfg.c_tilde.sample(grid_);
    gamma_ = project_admissible(cfg.gamma.sample(grid_), grid_);
    c_ = c_tilde_;
    for (std::size_t k = 0; k < c_.size(); ++k) c_[k] += gamma_[k];
    // positivity and admissibility, once, with the config's names
    (void)make_coefficient_pair(c_, c_tilde_, grid_);
  }

  const ExperimentConfig& cfg() const { return cfg_; }
  const Grid& grid() const { return grid_; }
  const TimeAxis& axis() const { return axis_; }
  int jobs() const { return opt_.jobs; }
  bool plot() const { return opt_.plot; }
  std::ostream& log() { return log_; }
  StabilitySetup setup() const { return {grid_, axis_, data_}; }

  const TwinSolution& twin() {
    if (!twin_) twin_ = solve_twin(c_, c_tilde_, data_, grid_, axis_);
    return *twin_;
  }

  WeightSet weights(double lambda, double s) const {
    return WeightSet::build(grid_, axis_.window, cfg_.weight_params(lambda, s));
  }

  // (λ, s) pairs, λ outer
  std::vector<std::pair<double, double>> pairs() const {
    std::vector<std::pair<double, double>> p;
    for (double l : cfg_.lambdas)
      for (double s : cfg_.s_list) p.emplace_back(l, s);
    return p;
  }

  std::string write(const std::string& name, const CsvTable& t) {
    const std::string path = (fs::path(out_) / name).string();
    t.write_file(path);
    files_.push_back(path);
    return path;
  }

  void write_svg(const std::string& name, const PlotSpec& spec, const std::vector<Series>& series) {
    if (!opt_.plot) return;
    const std::string path = (fs::path(out_) / name).string();
    write_text_file(path, svg_plot(spec, series));
    files_.push_back(path);
  }

  std::string path_of(const std::string& name) const { return (fs::path(out_) / name).string(); }
  void add_file(const std::string& path) { files_.push_back(path); }
  const std::vector<std::string>& files() const { return files_; }

  const Field& c() const { return c_; }
  const Field& c_tilde() const { return c_tilde_; }
  const Field& gamma() const { return gamma_; }
  const HeatData& data() const { return data_; }

 private:
  const ExperimentConfig& cfg_;
  const RunOptions& opt_;
  std::ostream& log_;
  Grid grid_;
  TimeAxis axis_;
  HeatData data_;
  std::string out_;
  Field c_tilde_, gamma_, c_;
  std::optional<TwinSolution> twin_;
  std::vector<std::string> files_;
};

// parts_table with λ and s in front
CsvTable long_table(const std::vector<std::pair<std::pair<double, double>, EstimateReport>>& reports) {
  CsvTable t;
  t.header = {"lambda", "s", "part", "term", "value", "log10_value"};
  for (const auto& [ls, rep] : reports) {
    const CsvTable one = parts_table({rep});
    for (const auto& row : one.rows) {
      std::vector<std::string> r{fmt(ls.first), fmt(ls.second)};
      r.insert(r.end(), row.begin(), row.end());
      t.add_row(std::move(r));
    }
  }
  return t;
}

std::string pair_label(double lambda, double s) { return "lambda=" + fmt(lambda) + " s=" + fmt(s); }

void forward(Context& ctx) {
  const SpaceTimeField q = solve_heat({ctx.c(), ctx.data()}, ctx.grid(), ctx.axis());
  {
    const std::string path = ctx.path_of("forward.csv");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write '" + path + "'");
    write_spacetime_csv(out, q);
    ctx.add_file(path);
  }
  {
    const std::string path = ctx.path_of("observations.csv");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write '" + path + "'");
    write_observations(out, extract_observations(q, ctx.grid(), ctx.axis(), ctx.c()));
    ctx.add_file(path);
  }
  double qmin = q.values.front().front();
  for (const Field& f : q.values)
    for (double v : f) qmin = std::min(qmin, v);
  ctx.log() << "forward: " << q.time_count() << " slices, " << ctx.grid().node_count() << " nodes, min q "
            << fmt(qmin) << "\n";
}

void verify_carleman(Context& ctx) {
  const ExperimentConfig& cfg = ctx.cfg();
  const auto suite = carleman_test_suite(ctx.grid(), ctx.axis().window, cfg.test_functions, cfg.seed);
  const CarlemanSweep sw = carleman_sweep(suite, ctx.c_tilde(), ctx.grid(), ctx.axis().window,
                                          cfg.weight_params(cfg.lambdas.front(), cfg.s_list.front()), cfg.s_list,
                                          cfg.lambdas, {}, ctx.jobs());
  std::vector<std::vector<std::string>> ids;
  for (int id : sw.test_ids) ids.push_back({std::to_string(id)});
  ctx.write("carleman_sweep.csv", report_table(sw.reports, {"test_id"}, ids));

  CsvTable summary;
  summary.header = {"lambda", "s", "max_ratio", "log10_max_ratio", "argmax_test"};
  std::vector<Series> series;
  for (const SweepPoint& p : sw.summary) {
    summary.add_row({fmt(p.lambda), fmt(p.s), fmt(p.max_ratio), fmt(p.max_log_ratio / std::log(10.0)),
                     std::to_string(p.argmax)});
    if (series.empty() || series.back().label != "lambda=" + fmt(p.lambda))
      series.push_back({"lambda=" + fmt(p.lambda), {}, {}});
    series.back().x.push_back(p.s);
    series.back().y.push_back(p.max_ratio);
    ctx.log() << "verify-carleman: " << pair_label(p.lambda, p.s) << " max ratio " << fmt(p.max_ratio) << "\n";
  }
  ctx.write("carleman_summary.csv", summary);
  ctx.write_svg("carleman.svg", {"Carleman estimate: max LHS/RHS over the test suite", "s", "max ratio", true, true},
                series);
}

void verify_poincare(Context& ctx) {
  const TwinSolution& twin = ctx.twin();
  const Field q_mid = twin.q_tilde.values[ctx.axis().mid_full_index()];
  std::vector<std::pair<std::pair<double, double>, EstimateReport>> reports;
  for (const auto& [lambda, s] : ctx.pairs()) {
    const WeightSet w = ctx.weights(lambda, s);
    reports.push_back({{lambda, s}, lemma_sides(ctx.gamma(), make_transport_base(q_mid, w), w)});
    const PropositionReport p = proposition_sides(ctx.gamma(), twin, ctx.axis(), w);
    reports.push_back({{lambda, s}, p.scalar});
    reports.push_back({{lambda, s}, p.gradient});
    reports.push_back({{lambda, s}, p.combined});
    ctx.log() << "verify-poincare: " << pair_label(lambda, s) << " lemma ratio " << fmt(reports[reports.size() - 4].second.ratio)
              << ", proposition ratio " << fmt(p.combined.ratio) << "\n";
  }
  CsvTable t = long_table(reports);
  double res = 0.0;
  for (double v : cit_residual(ctx.gamma(), ctx.c(), twin, ctx.axis(), ctx.grid())) res = std::max(res, std::abs(v));
  t.add_row({"", "", "identity", "residual_max", fmt(res), fmt(std::log10(res))});
  ctx.write("poincare.csv", t);
}

void verify_snapshot(Context& ctx) {
  std::vector<EstimateReport> reports;
  for (const auto& [lambda, s] : ctx.pairs()) {
    reports.push_back(snapshot_bound_sides(ctx.twin().y, ctx.gamma(), ctx.axis(), ctx.weights(lambda, s)));
    ctx.log() << "verify-snapshot: " << pair_label(lambda, s) << " ratio " << fmt(reports.back().ratio) << "\n";
  }
  ctx.write("snapshot.csv", report_table(reports));
}

void verify_energy(Context& ctx) {
  CsvTable curve;
  curve.header = {"lambda", "s", "t", "E", "log10_E"};
  std::vector<EstimateReport> bounds;
  std::vector<Series> series;
  for (const auto& [lambda, s] : ctx.pairs()) {
    const WeightSet w = ctx.weights(lambda, s);
    const EnergyCurve e = energy(ctx.twin().y, ctx.axis(), ctx.c(), w);
    Series sr{pair_label(lambda, s), {}, {}};
    for (std::size_t i = 0; i < e.E.size(); ++i) {
      curve.add_row({fmt(lambda), fmt(s), fmt(e.times[i]), fmt(e.E[i].value()), fmt(e.E[i].log10_abs())});
      sr.x.push_back(e.times[i]);
      sr.y.push_back(e.E[i].log10_abs());
    }
    series.push_back(std::move(sr));
    bounds.push_back(energy_bound_sides(ctx.twin().y, ctx.gamma(), ctx.c(), ctx.axis(), w));
    ctx.log() << "verify-energy: " << pair_label(lambda, s) << " log10 E(T') " << fmt(e.E_mid.log10_abs())
              << ", bound ratio " << fmt(bounds.back().ratio) << "\n";
  }
  ctx.write("energy.csv", curve);
  ctx.write("energy_bound.csv", report_table(bounds));
  ctx.write_svg("energy.svg", {"Weighted energy E(t), relative to the common factor", "t", "log10 E", false, false},
                series);
}

void verify_stability(Context& ctx) {
  const StabilitySetup setup = ctx.setup();
  const CoefficientPair pair = make_coefficient_pair(ctx.c(), ctx.c_tilde(), ctx.grid());
  std::vector<std::pair<std::pair<double, double>, EstimateReport>> reports;
  for (const auto& [lambda, s] : ctx.pairs()) {
    const StabilityReport r = stability_sides(pair, ctx.twin().q_tilde, setup, ctx.weights(lambda, s));
    reports.push_back({{lambda, s}, r.weighted});
    reports.push_back({{lambda, s}, r.plain});
    ctx.log() << "verify-stability: " << pair_label(lambda, s) << " ratio " << fmt(r.weighted.ratio) << ", plain "
              << fmt(r.plain.ratio) << "\n";
  }
  ctx.write("stability.csv", long_table(reports));
}

void sweep_stability(Context& ctx) {
  const auto family = perturbation_family(ctx.grid(), ctx.cfg().amplitudes);
  const StabilitySetup setup = ctx.setup();
  CsvTable table, slopes;
  slopes.header = {"lambda", "s", "shape", "slope", "points"};
  std::vector<Series> series;
  for (const auto& [lambda, s] : ctx.pairs()) {
    const StabilitySweep sw = stability_sweep(family, ctx.c_tilde(), setup, ctx.weights(lambda, s), ctx.jobs());
    const CsvTable one = sweep_table(sw);
    if (table.header.empty()) {
      table.header = {"lambda", "s"};
      table.header.insert(table.header.end(), one.header.begin(), one.header.end());
    }
    Series sr{pair_label(lambda, s), {}, {}};
    for (const auto& row : one.rows) {
      std::vector<std::string> r{fmt(lambda), fmt(s)};
      r.insert(r.end(), row.begin(), row.end());
      table.add_row(std::move(r));
    }
    for (std::size_t i = 0; i < sw.members.size(); ++i) {
      if (!sw.included[i]) continue;
      sr.x.push_back(static_cast<double>(i));
      sr.y.push_back(sw.reports[i].weighted.ratio);
    }
    series.push_back(std::move(sr));
    for (const ShapeSlope& sl : sw.slopes)
      slopes.add_row({fmt(lambda), fmt(s), sl.shape, fmt(sl.slope), std::to_string(sl.points)});
    for (const std::string& note : sw.notes) ctx.log() << "sweep-stability: " << note << "\n";
    ctx.log() << "sweep-stability: " << pair_label(lambda, s) << " max ratio " << fmt(sw.max_ratio) << " (member "
              << sw.argmax << ")\n";
  }
  ctx.write("sweep.csv", table);
  ctx.write("sweep_slopes.csv", slopes);
  ctx.write_svg("sweep.svg", {"Stability ratio over the perturbation family", "member", "ratio", false, true}, series);
}

void reconstruct_cmd(Context& ctx) {
  const ExperimentConfig& cfg = ctx.cfg();
  const StabilitySetup setup = ctx.setup();
  const InverseConfig ic = cfg.inverse();
  const bool from_file = !cfg.observations.empty();
  ObservationSet data;
  if (from_file) {
    std::ifstream in(cfg.observations, std::ios::binary);
    if (!in) throw ConfigError("cannot open observations '" + cfg.observations + "'");
    data = read_observations(in, ctx.grid());
  } else {
    data = extract_observations(solve_heat({ctx.c(), ctx.data()}, ctx.grid(), ctx.axis()), ctx.grid(), ctx.axis(),
                                ctx.c());
  }
  const Field* truth = from_file ? nullptr : &ctx.c();
  const Reconstruction rec = reconstruct(data, setup, ic, truth);
  ctx.write("recon_log.csv", reconstruction_table(rec));

  CsvTable coeff;
  coeff.header = {"node", "c_hat", "c_true"};
  for (int k = 0; k < ctx.grid().node_count(); ++k)
    coeff.add_row({std::to_string(k), fmt(rec.c[k]), from_file ? "nan" : fmt(ctx.c()[k])});
  ctx.write("reconstruction.csv", coeff);
  ctx.log() << "reconstruct: " << rec.log.back().iteration << " iterations, " << rec.stop_reason << ", H1 error "
            << fmt(rec.log.back().h1_error) << "\n";

  std::vector<Series> series{{"relative H1 error", {}, {}}, {"J / J0", {}, {}}};
  for (const IterationRecord& r : rec.log) {
    series[0].x.push_back(r.iteration);
    series[0].y.push_back(r.h1_error);
    series[1].x.push_back(r.iteration);
    series[1].y.push_back(r.J / rec.log.front().J);
  }
  ctx.write_svg("recon.svg", {"Reconstruction convergence", "iteration", "value", false, true}, series);

  if (from_file || cfg.noise_levels.empty()) return;
  const auto pts = noise_sweep(data, setup, ic, ctx.c(), cfg.noise_levels, ctx.jobs());
  CsvTable noise;
  noise.header = {"sigma", "h1_error", "iterations", "stop_reason"};
  for (const NoisePoint& p : pts) {
    noise.add_row({fmt(p.sigma), fmt(p.h1_error), std::to_string(p.iterations), p.stop_reason});
    ctx.log() << "reconstruct: sigma " << fmt(p.sigma) << " H1 error " << fmt(p.h1_error) << "\n";
  }
  ctx.write("noise.csv", noise);
}

}  // namespace

std::vector<std::string> run(const std::string& command, const ExperimentConfig& config, const RunOptions& options,
                             std::ostream& log) {
  const auto& names = commands();
  if (std::find(names.begin(), names.end(), command) == names.end())
    throw ConfigError("unknown command '" + command + "'");
  Context ctx(config, options, log);
  const bool all = command == "all";
  if (all || command == "forward") forward(ctx);
  if (all || command == "verify-carleman") verify_carleman(ctx);
  if (all || command == "verify-poincare") verify_poincare(ctx);
  if (all || command == "verify-snapshot") verify_snapshot(ctx);
  if (all || command == "verify-energy") verify_energy(ctx);
  if (all || command == "verify-stability") verify_stability(ctx);
  if (all || command == "sweep-stability") sweep_stability(ctx);
  if (all || command == "reconstruct") reconstruct_cmd(ctx);
  return ctx.files();
}

int main(int argc, char** argv) {
  CLI::App cli{"Carleman-weight laboratory for the heat equation with variable conductivity"};
  std::string command, config_path;
  RunOptions opt;
  cli.add_option("command", command, "forward | verify-carleman | verify-poincare | verify-snapshot | verify-energy | "
                                      "verify-stability | sweep-stability | reconstruct | all")
      ->required()
      ->check(CLI::IsMember(commands()));
  cli.add_option("--config", config_path, "JSON configuration")->required();
  cli.add_flag("--plot", opt.plot, "also write SVG plots");
  cli.add_option("--jobs", opt.jobs, "worker threads")->check(CLI::PositiveNumber);
  cli.add_option("--out", opt.out_dir, "output directory (overrides output_dir)");
  try {
    cli.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = cli.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    ExperimentConfig cfg = load_config(config_path);
    if (const char* env = std::getenv("CARLEMAN_LAB_SEED"); env && *env) {
      std::uint64_t seed = 0;
      const std::string s(env);
      auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), seed);
      if (ec != std::errc() || p != s.data() + s.size())
        throw ConfigError("CARLEMAN_LAB_SEED: '" + s + "' is not a non-negative integer");
      cfg.seed = seed;
    }
    const auto files = run(command, cfg, opt, std::cout);
    for (const auto& f : files) std::cout << "wrote " << f << "\n";
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace carleman::app
