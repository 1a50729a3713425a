#pragma once

// Run artifacts: named CSV tables, standalone SVG line plots and the
// provenance hash. All numeric text goes through %.17g so identical
// values give identical bytes.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace twoscale {

inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// 64-bit FNV-1a of the bytes, as 16 lowercase hex digits.
inline std::string fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

struct Table {
  using Cell = std::variant<double, long long, std::string>;

  std::string name;  // file stem
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  void add(std::initializer_list<Cell> cells) { add(std::vector<Cell>(cells)); }
  void add(const std::vector<Cell>& cells) {
    std::vector<std::string> row;
    for (const Cell& c : cells) {
      if (const double* d = std::get_if<double>(&c))
        row.push_back(fmt17(*d));
      else if (const long long* i = std::get_if<long long>(&c))
        row.push_back(std::to_string(*i));
      else
        row.push_back(std::get<std::string>(c));
    }
    rows.push_back(std::move(row));
  }

  /// Numeric value of column `col` in `row`; NaN when the cell is not a number.
  double number(std::size_t row, std::size_t col) const {
    const std::string& s = rows[row][col];
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    return (end == s.c_str() || *end != '\0') ? NAN : v;
  }
  std::size_t column(std::string_view c) const {
    for (std::size_t i = 0; i < columns.size(); ++i)
      if (columns[i] == c) return i;
    return columns.size();
  }
};

inline void write_csv(std::ostream& os, const Table& t) {
  for (std::size_t i = 0; i < t.columns.size(); ++i) os << (i ? "," : "") << t.columns[i];
  os << '\n';
  for (const auto& r : t.rows) {
    for (std::size_t i = 0; i < r.size(); ++i) os << (i ? "," : "") << r[i];
    os << '\n';
  }
}

struct Series {
  std::string name;
  std::vector<std::pair<double, double>> points;
};

struct PlotSpec {
  std::string title, xlabel, ylabel;
  bool log_x = true, log_y = true;
};

namespace detail {

inline std::string svg_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

inline std::string fixed3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

inline std::string tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

}  // namespace detail

/// Standalone SVG line plot, one polyline with circle markers per series
/// and a legend when there are two or more series. Points that cannot be
/// placed on a log axis are dropped.
inline std::string svg_plot(const PlotSpec& spec, const std::vector<Series>& series) {
  constexpr double W = 640, H = 480, L = 80, R = 20, T = 50, B = 60;
  const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};
  auto tx = [&](double v) { return spec.log_x ? std::log10(v) : v; };
  auto ty = [&](double v) { return spec.log_y ? std::log10(v) : v; };
  auto usable = [&](const std::pair<double, double>& p) {
    return std::isfinite(p.first) && std::isfinite(p.second) && (!spec.log_x || p.first > 0.0) &&
           (!spec.log_y || p.second > 0.0);
  };
  double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
  for (const Series& s : series)
    for (const auto& p : s.points)
      if (usable(p)) {
        x0 = std::min(x0, tx(p.first));
        x1 = std::max(x1, tx(p.first));
        y0 = std::min(y0, ty(p.second));
        y1 = std::max(y1, ty(p.second));
      }
  const bool empty = !(x0 <= x1);
  if (empty) {
    x0 = 0.0, x1 = 1.0, y0 = 0.0, y1 = 1.0;
  }
  if (x1 - x0 < 1e-12) x0 -= 0.5, x1 += 0.5;
  if (y1 - y0 < 1e-12) y0 -= 0.5, y1 += 0.5;
  const double padx = 0.05 * (x1 - x0), pady = 0.05 * (y1 - y0);
  x0 -= padx, x1 += padx, y0 -= pady, y1 += pady;
  auto px = [&](double v) { return L + (W - L - R) * (v - x0) / (x1 - x0); };
  auto py = [&](double v) { return H - B - (H - T - B) * (v - y0) / (y1 - y0); };
  using detail::fixed3;

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
    << ' ' << H << "\">\n";
  o << "<rect x=\"0\" y=\"0\" width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
  o << "<text x=\"" << W / 2 << "\" y=\"28\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\">"
    << detail::svg_escape(spec.title) << "</text>\n";
  o << "<g stroke=\"black\" stroke-width=\"1\" fill=\"none\">\n"
    << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B << "\"/>\n"
    << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << L << "\" y2=\"" << T << "\"/>\n"
    << "</g>\n";
  o << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 15
    << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">" << detail::svg_escape(spec.xlabel)
    << (spec.log_x ? " (log)" : "") << "</text>\n";
  o << "<text x=\"18\" y=\"" << (T + H - B) / 2 << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" "
    << "transform=\"rotate(-90 18 " << (T + H - B) / 2 << ")\">" << detail::svg_escape(spec.ylabel)
    << (spec.log_y ? " (log)" : "") << "</text>\n";
  if (!empty) {
    // Ticks at the ends of the data range.
    for (double v : {x0 + padx, x1 - padx})
      o << "<text x=\"" << fixed3(px(v)) << "\" y=\"" << H - B + 18
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">"
        << detail::tick(spec.log_x ? std::pow(10.0, v) : v) << "</text>\n";
    for (double v : {y0 + pady, y1 - pady})
      o << "<text x=\"" << L - 6 << "\" y=\"" << fixed3(py(v) + 4)
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">"
        << detail::tick(spec.log_y ? std::pow(10.0, v) : v) << "</text>\n";
  }
  for (std::size_t i = 0; i < series.size(); ++i) {
    const char* color = palette[i % 6];
    std::vector<std::pair<double, double>> pts;
    for (const auto& p : series[i].points)
      if (usable(p)) pts.emplace_back(px(tx(p.first)), py(ty(p.second)));
    o << "<polyline class=\"series\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (std::size_t k = 0; k < pts.size(); ++k) o << (k ? " " : "") << fixed3(pts[k].first) << ',' << fixed3(pts[k].second);
    o << "\"/>\n";
    for (const auto& p : pts)
      o << "<circle class=\"marker\" cx=\"" << fixed3(p.first) << "\" cy=\"" << fixed3(p.second) << "\" r=\"3.5\" fill=\""
        << color << "\"/>\n";
  }
  if (series.size() >= 2) {
    o << "<g class=\"legend\" font-family=\"sans-serif\" font-size=\"12\">\n";
    for (std::size_t i = 0; i < series.size(); ++i) {
      const double y = T + 10 + 18.0 * static_cast<double>(i);
      o << "<line x1=\"" << W - R - 170 << "\" y1=\"" << y << "\" x2=\"" << W - R - 150 << "\" y2=\"" << y
        << "\" stroke=\"" << palette[i % 6] << "\" stroke-width=\"2\"/>\n"
        << "<text x=\"" << W - R - 144 << "\" y=\"" << y + 4 << "\">" << detail::svg_escape(series[i].name) << "</text>\n";
    }
    o << "</g>\n";
  }
  o << "</svg>\n";
  return o.str();
}

}  // namespace twoscale
