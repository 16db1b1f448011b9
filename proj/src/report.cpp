#include "carleman/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "carleman/errors.hpp"

namespace carleman {

double EstimateReport::param(const std::string& key) const {
  for (const auto& [k, v] : params) {
    if (k == key) return v;
  }
  throw std::out_of_range("report has no parameter '" + key + "'");
}

const Scaled& EstimateReport::term(const std::string& side, const std::string& term_name) const {
  const auto& terms = side == "lhs" ? lhs : rhs;
  for (const auto& t : terms) {
    if (t.name == term_name) return t.value;
  }
  throw std::out_of_range("report has no term " + side + "." + term_name);
}

void EstimateReport::finalize() {
  lhs_total = Scaled::zero();
  rhs_total = Scaled::zero();
  for (const auto& t : lhs) {
    if (t.value.mantissa < 0.0) throw NumericalError(name + ": negative term lhs." + t.name);
    lhs_total += t.value;
  }
  for (const auto& t : rhs) {
    if (t.value.mantissa < 0.0) throw NumericalError(name + ": negative term rhs." + t.name);
    rhs_total += t.value;
  }
  ratio = carleman::ratio(lhs_total, rhs_total);
  log_ratio = carleman::log_ratio(lhs_total, rhs_total);
}

CsvTable report_table(const std::vector<EstimateReport>& reports, const std::vector<std::string>& leading,
                      const std::vector<std::vector<std::string>>& leading_values) {
  if (reports.empty()) throw std::invalid_argument("report_table: no reports");
  if (!leading.empty() && leading_values.size() != reports.size())
    throw std::invalid_argument("report_table: leading values do not match the report count");
  const EstimateReport& first = reports.front();
  CsvTable t;
  t.header = leading;
  for (const auto& [k, v] : first.params) t.header.push_back(k);
  for (const auto& term : first.lhs) t.header.push_back("lhs." + term.name);
  for (const auto& term : first.rhs) t.header.push_back("rhs." + term.name);
  for (const char* c : {"log10_lhs_total", "log10_rhs_total", "ratio", "log10_ratio"}) t.header.emplace_back(c);

  const double ln10 = std::log(10.0);
  for (std::size_t r = 0; r < reports.size(); ++r) {
    const auto& rep = reports[r];
    if (rep.params.size() != first.params.size() || rep.lhs.size() != first.lhs.size() ||
        rep.rhs.size() != first.rhs.size())
      throw std::invalid_argument("report_table: reports have different layouts");
    std::vector<std::string> row = leading.empty() ? std::vector<std::string>{} : leading_values[r];
    for (const auto& [k, v] : rep.params) row.push_back(format_double(v));
    for (const auto& term : rep.lhs) row.push_back(format_double(term.value.log10_abs()));
    for (const auto& term : rep.rhs) row.push_back(format_double(term.value.log10_abs()));
    row.push_back(format_double(rep.lhs_total.log10_abs()));
    row.push_back(format_double(rep.rhs_total.log10_abs()));
    row.push_back(format_double(rep.ratio));
    row.push_back(format_double(rep.log_ratio / ln10));
    t.add_row(std::move(row));
  }
  return t;
}

CsvTable parts_table(const std::vector<EstimateReport>& reports) {
  if (reports.empty()) throw std::invalid_argument("parts_table: no reports");
  CsvTable t;
  t.header = {"part", "term", "value", "log10_value"};
  const double ln10 = std::log(10.0);
  for (const auto& rep : reports) {
    auto row = [&](const std::string& term, double v, double lg) {
      t.add_row({rep.name, term, format_double(v), format_double(lg)});
    };
    for (const auto& term : rep.lhs) row("lhs." + term.name, term.value.value(), term.value.log10_abs());
    for (const auto& term : rep.rhs) row("rhs." + term.name, term.value.value(), term.value.log10_abs());
    row("lhs_total", rep.lhs_total.value(), rep.lhs_total.log10_abs());
    row("rhs_total", rep.rhs_total.value(), rep.rhs_total.log10_abs());
    row("ratio", rep.ratio, rep.log_ratio / ln10);
  }
  return t;
}

namespace {

std::string escape(const std::string& s) {
  std::string out;
  for (char ch : s) {
    switch (ch) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += ch;
    }
  }
  return out;
}

constexpr const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"};

}  // namespace

std::string svg_plot(const PlotSpec& spec, const std::vector<Series>& series) {
  const double width = 640, height = 420, left = 70, right = 20, top = 40, bottom = 55;
  auto tx = [&](double v) { return spec.log_x ? std::log10(v) : v; };
  auto ty = [&](double v) { return spec.log_y ? std::log10(v) : v; };

  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  std::vector<std::vector<std::pair<double, double>>> pts(series.size());
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    if (s.x.size() != s.y.size()) throw std::invalid_argument("svg_plot: series '" + s.label + "' has ragged data");
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      const double a = tx(s.x[i]), b = ty(s.y[i]);
      if (!std::isfinite(a) || !std::isfinite(b)) continue;
      pts[k].emplace_back(a, b);
      x0 = std::min(x0, a);
      x1 = std::max(x1, a);
      y0 = std::min(y0, b);
      y1 = std::max(y1, b);
    }
  }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 == x0) x0 -= 0.5, x1 += 0.5;
  if (y1 == y0) y0 -= 0.5, y1 += 0.5;
  const double pw = width - left - right, ph = height - top - bottom;
  auto px = [&](double a) { return left + (a - x0) / (x1 - x0) * pw; };
  auto py = [&](double b) { return top + (1.0 - (b - y0) / (y1 - y0)) * ph; };

  std::ostringstream out;
  out.precision(6);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << width / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << escape(spec.title)
      << "</text>\n";
  out << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
      << "\" fill=\"none\" stroke=\"black\"/>\n";
  auto tick = [&](double v, bool log_axis) {
    std::ostringstream t;
    t.precision(3);
    if (log_axis) t << "1e" << v;
    else t << v;
    return t.str();
  };
  out << "<text x=\"" << left << "\" y=\"" << height - bottom + 16 << "\" text-anchor=\"middle\">"
      << tick(x0, spec.log_x) << "</text>\n";
  out << "<text x=\"" << left + pw << "\" y=\"" << height - bottom + 16 << "\" text-anchor=\"middle\">"
      << tick(x1, spec.log_x) << "</text>\n";
  out << "<text x=\"" << left - 6 << "\" y=\"" << top + ph << "\" text-anchor=\"end\">" << tick(y0, spec.log_y)
      << "</text>\n";
  out << "<text x=\"" << left - 6 << "\" y=\"" << top + 10 << "\" text-anchor=\"end\">" << tick(y1, spec.log_y)
      << "</text>\n";
  out << "<text x=\"" << left + pw / 2 << "\" y=\"" << height - 12 << "\" text-anchor=\"middle\">"
      << escape(spec.x_label) << (spec.log_x ? " (log)" : "") << "</text>\n";
  out << "<text x=\"16\" y=\"" << top + ph / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
      << top + ph / 2 << ")\">" << escape(spec.y_label) << (spec.log_y ? " (log)" : "") << "</text>\n";

  for (std::size_t k = 0; k < series.size(); ++k) {
    const char* color = kColors[k % std::size(kColors)];
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < pts[k].size(); ++i) {
      if (i) out << ' ';
      out << px(pts[k][i].first) << ',' << py(pts[k][i].second);
    }
    out << "\"/>\n";
    out << "<text x=\"" << left + 8 << "\" y=\"" << top + 16 + 15 * k << "\" fill=\"" << color << "\">"
        << escape(series[k].label) << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open '" + path + "' for writing");
  out << text;
  if (!out) throw ConfigError("failed writing '" + path + "'");
}

}  // namespace carleman
