#ifndef CARLEMAN_REPORT_HPP
#define CARLEMAN_REPORT_HPP

#include <string>
#include <utility>
#include <vector>

#include "carleman/csv.hpp"
#include "carleman/scaled.hpp"

namespace carleman {

struct Term {
  std::string name;
  Scaled value;
};

/// Both sides of one inequality, term by term.
struct EstimateReport {
  std::string name;
  std::vector<Term> lhs;
  std::vector<Term> rhs;
  std::vector<std::pair<std::string, double>> params;

  Scaled lhs_total;
  Scaled rhs_total;
  /// lhs/rhs as a double (0 when lhs is 0, may underflow), and its natural log.
  double ratio = 0.0;
  double log_ratio = 0.0;

  void add_lhs(std::string term, Scaled v) { lhs.push_back({std::move(term), v}); }
  void add_rhs(std::string term, Scaled v) { rhs.push_back({std::move(term), v}); }
  void set(std::string key, double v) { params.emplace_back(std::move(key), v); }
  [[nodiscard]] double param(const std::string& key) const;
  [[nodiscard]] const Scaled& term(const std::string& side, const std::string& name) const;

  /// Sums the sides and forms the ratio. Throws if a square-norm term is negative.
  void finalize();
};

/// Wide table, one row per report. Columns: the params of the first report,
/// then log10 of each term as `lhs.<name>` / `rhs.<name>`, then the totals, ratio and log10 ratio.
/// All reports must share the same layout.
CsvTable report_table(const std::vector<EstimateReport>& reports, const std::vector<std::string>& leading = {},
                      const std::vector<std::vector<std::string>>& leading_values = {});

/// `part,term,value` rows (value printed plainly, log10 alongside in a fourth column).
CsvTable parts_table(const std::vector<EstimateReport>& reports);

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

struct PlotSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_x = false;
  bool log_y = false;
};

/// Standalone SVG with one polyline per series; non-finite points are dropped.
std::string svg_plot(const PlotSpec& spec, const std::vector<Series>& series);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace carleman

#endif
