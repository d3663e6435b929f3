#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <fmt/format.h>

#include "robreg/errors.hpp"
#include "robreg/harness.hpp"

namespace robreg {
namespace {

bool same(double a, double b) { return a == b || (std::isnan(a) && std::isnan(b)); }

std::string num(double v) { return fmt::format("{:.10g}", v); }

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_num(const std::string& s) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw IoError("csv: bad number '" + s + "'");
  }
  if (used != s.size()) throw IoError("csv: bad number '" + s + "'");
  return v;
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open '" + path + "' for writing");
  os << text;
  os.flush();
  if (!os) throw IoError("write to '" + path + "' failed");
}

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                    "#9467bd", "#8c564b", "#e377c2", "#17becf"};

}  // namespace

bool ResultRow::operator==(const ResultRow& o) const {
  return kind == o.kind && n == o.n && p == o.p && same(eps, o.eps) &&
         estimator == o.estimator && same(t_used, o.t_used) && rep_count == o.rep_count &&
         same(mean_err, o.mean_err) && same(median_err, o.median_err) && same(se, o.se) &&
         same(wall_ms, o.wall_ms);
}

std::string format_csv(const std::vector<ResultRow>& rows, bool include_timing) {
  std::string out = kCsvHeader;
  out += '\n';
  for (const auto& r : rows) {
    out += fmt::format("{},{},{},{},{},{},{},{},{},{},{}\n", r.kind, r.n, r.p, num(r.eps),
                       r.estimator, num(r.t_used), r.rep_count, num(r.mean_err),
                       num(r.median_err), num(r.se), num(include_timing ? r.wall_ms : 0.0));
  }
  return out;
}

void emit_csv(const std::vector<ResultRow>& rows, const std::string& path, bool include_timing) {
  if (rows.empty()) throw PreconditionError("emit_csv: no rows");
  write_file(path, format_csv(rows, include_timing));
}

std::vector<ResultRow> parse_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader) throw IoError("csv: missing header");
  std::vector<ResultRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const std::vector<std::string> f = split_csv_line(line);
    if (f.size() != 11) throw IoError("csv: expected 11 fields");
    ResultRow r;
    r.kind = f[0];
    r.n = static_cast<long long>(parse_num(f[1]));
    r.p = static_cast<int>(parse_num(f[2]));
    r.eps = parse_num(f[3]);
    r.estimator = f[4];
    r.t_used = parse_num(f[5]);
    r.rep_count = static_cast<int>(parse_num(f[6]));
    r.mean_err = parse_num(f[7]);
    r.median_err = parse_num(f[8]);
    r.se = parse_num(f[9]);
    r.wall_ms = parse_num(f[10]);
    rows.push_back(std::move(r));
  }
  return rows;
}

std::string format_svg_loglog(const std::vector<ResultRow>& rows) {
  constexpr double kWidth = 640.0;
  constexpr double kHeight = 420.0;
  constexpr double kLeft = 70.0;
  constexpr double kRight = 170.0;
  constexpr double kTop = 20.0;
  constexpr double kBottom = 50.0;

  bool multi_eps = false;
  for (const auto& r : rows) multi_eps = multi_eps || r.eps != rows.front().eps;

  std::vector<std::string> order;
  std::map<std::string, std::vector<std::pair<double, double>>> series;
  for (const auto& r : rows) {
    if (!(r.n > 0) || !(r.median_err > 0.0) || !std::isfinite(r.median_err)) continue;
    const std::string key =
        multi_eps ? fmt::format("{} (eps={})", r.estimator, num(r.eps)) : r.estimator;
    if (!series.count(key)) order.push_back(key);
    series[key].emplace_back(std::log10(static_cast<double>(r.n)), std::log10(r.median_err));
  }

  double x_lo = 0.0, x_hi = 1.0, y_lo = -1.0, y_hi = 0.0;
  if (!order.empty()) {
    x_lo = y_lo = std::numeric_limits<double>::infinity();
    x_hi = y_hi = -std::numeric_limits<double>::infinity();
    for (const auto& [key, pts] : series) {
      for (const auto& [x, y] : pts) {
        x_lo = std::min(x_lo, x);
        x_hi = std::max(x_hi, x);
        y_lo = std::min(y_lo, y);
        y_hi = std::max(y_hi, y);
      }
    }
    x_lo = std::floor(x_lo);
    x_hi = std::ceil(x_hi);
    y_lo = std::floor(y_lo);
    y_hi = std::ceil(y_hi);
    if (x_hi <= x_lo) x_hi = x_lo + 1.0;
    if (y_hi <= y_lo) y_hi = y_lo + 1.0;
  }
  const double pw = kWidth - kLeft - kRight;
  const double ph = kHeight - kTop - kBottom;
  auto sx = [&](double x) { return kLeft + (x - x_lo) / (x_hi - x_lo) * pw; };
  auto sy = [&](double y) { return kTop + (y_hi - y) / (y_hi - y_lo) * ph; };

  std::string out;
  out += fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{:.0f}\" height=\"{:.0f}\" "
      "viewBox=\"0 0 {:.0f} {:.0f}\" font-family=\"sans-serif\" font-size=\"12\">\n",
      kWidth, kHeight, kWidth, kHeight);
  out += fmt::format("<rect width=\"{:.0f}\" height=\"{:.0f}\" fill=\"white\"/>\n", kWidth,
                     kHeight);
  out += fmt::format(
      "<rect x=\"{:.2f}\" y=\"{:.2f}\" width=\"{:.2f}\" height=\"{:.2f}\" fill=\"none\" "
      "stroke=\"black\"/>\n",
      kLeft, kTop, pw, ph);
  for (double k = x_lo; k <= x_hi + 0.5; k += 1.0) {
    out += fmt::format(
        "<line x1=\"{0:.2f}\" y1=\"{1:.2f}\" x2=\"{0:.2f}\" y2=\"{2:.2f}\" stroke=\"#dddddd\"/>\n"
        "<text x=\"{0:.2f}\" y=\"{3:.2f}\" text-anchor=\"middle\">1e{4:.0f}</text>\n",
        sx(k), kTop, kTop + ph, kTop + ph + 18.0, k);
  }
  for (double k = y_lo; k <= y_hi + 0.5; k += 1.0) {
    out += fmt::format(
        "<line x1=\"{0:.2f}\" y1=\"{1:.2f}\" x2=\"{2:.2f}\" y2=\"{1:.2f}\" stroke=\"#dddddd\"/>\n"
        "<text x=\"{3:.2f}\" y=\"{4:.2f}\" text-anchor=\"end\">1e{5:.0f}</text>\n",
        kLeft, sy(k), kLeft + pw, kLeft - 6.0, sy(k) + 4.0, k);
  }
  out += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" text-anchor=\"middle\">n</text>\n",
                     kLeft + pw / 2.0, kHeight - 12.0);
  out += fmt::format(
      "<text x=\"16\" y=\"{0:.2f}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {0:.2f})\">"
      "median error</text>\n",
      kTop + ph / 2.0);

  for (std::size_t s = 0; s < order.size(); ++s) {
    const char* color = kPalette[s % std::size(kPalette)];
    auto pts = series[order[s]];
    std::stable_sort(pts.begin(), pts.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    std::string poly;
    for (const auto& [x, y] : pts) {
      if (!poly.empty()) poly += ' ';
      poly += fmt::format("{:.2f},{:.2f}", sx(x), sy(y));
    }
    out += fmt::format(
        "<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\"/>\n", poly,
        color);
    for (const auto& [x, y] : pts) {
      out += fmt::format("<circle cx=\"{:.2f}\" cy=\"{:.2f}\" r=\"3\" fill=\"{}\"/>\n", sx(x),
                         sy(y), color);
    }
    const double ly = kTop + 10.0 + 18.0 * static_cast<double>(s);
    const double lx = kLeft + pw + 14.0;
    out += fmt::format(
        "<line x1=\"{:.2f}\" y1=\"{:.2f}\" x2=\"{:.2f}\" y2=\"{:.2f}\" stroke=\"{}\" "
        "stroke-width=\"2\"/>\n"
        "<text x=\"{:.2f}\" y=\"{:.2f}\">{}</text>\n",
        lx, ly, lx + 18.0, ly, color, lx + 24.0, ly + 4.0, order[s]);
  }
  out += "</svg>\n";
  return out;
}

void emit_svg_loglog(const std::vector<ResultRow>& rows, const std::string& path) {
  if (rows.empty()) throw PreconditionError("emit_svg_loglog: no rows");
  write_file(path, format_svg_loglog(rows));
}

}  // namespace robreg
