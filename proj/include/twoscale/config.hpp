#pragma once

// Experiment configuration: a sectioned key = value text format.
//
//   # comment
//   [section]
//   key = token token ...
//
// Tokens are bare words (numbers, booleans, names) or double-quoted strings
// without embedded quotes. Expressions must be quoted. Every key is optional;
// missing keys keep their defaults. Unknown sections or keys are errors.

#include <array>
#include <cerrno>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "twoscale/expression.hpp"
#include "twoscale/extension.hpp"
#include "twoscale/geometry.hpp"

namespace twoscale {

class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& msg, int line, int column)
      : std::runtime_error("config:" + std::to_string(line) + ":" + std::to_string(column) + ": " + msg),
        line_(line),
        column_(column) {}
  int line() const { return line_; }
  int column() const { return column_; }

 private:
  int line_, column_;
};

enum class DataMode { l2, l1 };

struct GeometryConfig {
  Vec2 periods{1.0, 1.0};
  bool inclusion = true;
  Vec2 inclusion_low{0.25, 0.25};
  Vec2 inclusion_high{0.75, 0.75};
  std::array<double, 4> domain{0.0, 0.0, 1.0, 1.0};  // x_lo y_lo x_hi y_hi
  std::vector<double> eps{0.25, 0.125, 0.0625, 0.03125};
  int m = 8;
  bool boundary_inclusions = true;

  bool operator==(const GeometryConfig&) const = default;
  ReferenceCell cell() const {
    return inclusion ? ReferenceCell(periods, inclusion_low, inclusion_high) : ReferenceCell::without_inclusion(periods);
  }
  Box box() const { return Box{{domain[0], domain[1]}, {domain[2], domain[3]}}; }
};

struct ModelConfig {
  std::string a11 = "1", a12 = "0", a21 = "0", a22 = "1", h = "1";
  double alpha = 0.0;
  DataMode data = DataMode::l2;
  std::string f = "1";
  Vec2 spike{0.5, 0.5};
  double spike_mass = 1.0;
  double gamma = 1.0;

  bool operator==(const ModelConfig&) const = default;
};

struct SolverConfig {
  double picard_tol = 1e-8;
  int max_iterations = 50;
  bool damping = true;
  double cg_tol = 1e-12;
  int homog_grid = 256;
  int table_samples = 17;

  bool operator==(const SolverConfig&) const = default;
};

struct OutputConfig {
  std::string directory = "out";
  bool csv = true, json = true, svg = true;

  bool operator==(const OutputConfig&) const = default;
};

struct ExtbenchConfig {
  std::vector<ExtensionVariant> variants{ExtensionVariant::p1, ExtensionVariant::p2, ExtensionVariant::p2_legacy};
  std::vector<InputFamily> families{InputFamily::zero_mean_random, InputFamily::constant_per_cell};
  int samples = 20;
  double eta = 0.125;
  int m = 8;

  bool operator==(const ExtbenchConfig&) const = default;
};

struct CellConfig {
  double t_min = -1.0, t_max = 1.0;
  int samples = 9;
  std::vector<int> richardson_m{16, 32, 64};

  bool operator==(const CellConfig&) const = default;
};

struct RunConfig {
  std::uint64_t seed = 2024;
  int workers = 1;
  std::vector<double> truncation_levels{1.0, 2.0, 4.0, 8.0};

  bool operator==(const RunConfig&) const = default;
};

struct ExperimentConfig {
  GeometryConfig geometry;
  ModelConfig model;
  SolverConfig solver;
  OutputConfig outputs;
  ExtbenchConfig extbench;
  CellConfig cell;
  RunConfig run;

  bool operator==(const ExperimentConfig&) const = default;

  CoefficientModel coefficient_model() const {
    CoefficientModel cm = CoefficientModel::from_text(model.a11, model.a12, model.a21, model.a22, model.h,
                                                      model.alpha, geometry.periods);
    return cm;
  }
};

namespace detail {

struct Token {
  std::string text;
  bool quoted = false;
  int column = 0;
};

struct Entry {
  std::vector<Token> tokens;
  int line = 0, column = 0;
  bool used = false;
};

using Section = std::map<std::string, Entry>;

inline std::map<std::string, Section> lex_config(std::string_view text, std::map<std::string, int>& section_line) {
  std::map<std::string, Section> out;
  std::string current;
  int line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    ++line_no;
    start = end + 1;

    // Tokenize, stopping at a comment outside quotes.
    std::vector<Token> toks;
    std::size_t i = 0;
    while (i < line.size()) {
      const char ch = line[i];
      if (ch == ' ' || ch == '\t') {
        ++i;
        continue;
      }
      if (ch == '#') break;
      Token t;
      t.column = static_cast<int>(i) + 1;
      if (ch == '"') {
        const std::size_t close = line.find('"', i + 1);
        if (close == std::string_view::npos) throw ConfigError("unterminated string", line_no, t.column);
        t.text = std::string(line.substr(i + 1, close - i - 1));
        t.quoted = true;
        i = close + 1;
      } else if (ch == '=' || ch == '[' || ch == ']') {
        t.text = std::string(1, ch);
        ++i;
      } else {
        const std::size_t s = i;
        while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '#' && line[i] != '=' &&
               line[i] != '"' && line[i] != '[' && line[i] != ']')
          ++i;
        t.text = std::string(line.substr(s, i - s));
      }
      toks.push_back(std::move(t));
    }
    if (toks.empty()) continue;

    auto bare = [](const Token& t, std::string_view s) { return !t.quoted && t.text == s; };
    if (bare(toks[0], "[")) {
      if (toks.size() != 3 || toks[1].quoted || !bare(toks[2], "]"))
        throw ConfigError("malformed section header", line_no, toks[0].column);
      current = toks[1].text;
      if (section_line.count(current))
        throw ConfigError("duplicate section [" + current + "]", line_no, toks[1].column);
      section_line[current] = line_no;
      out[current];
      continue;
    }
    if (toks.size() < 2 || !bare(toks[1], "=") || toks[0].quoted)
      throw ConfigError("expected 'key = value'", line_no, toks[0].column);
    if (current.empty()) throw ConfigError("key outside of a section", line_no, toks[0].column);
    if (toks.size() == 2) throw ConfigError("missing value", line_no, toks[1].column + 1);
    for (std::size_t k = 2; k < toks.size(); ++k)
      if (!toks[k].quoted && (toks[k].text == "=" || toks[k].text == "[" || toks[k].text == "]"))
        throw ConfigError("unexpected '" + toks[k].text + "'", line_no, toks[k].column);
    Section& sec = out[current];
    if (sec.count(toks[0].text)) throw ConfigError("duplicate key '" + toks[0].text + "'", line_no, toks[0].column);
    Entry e;
    e.line = line_no;
    e.column = toks[0].column;
    e.tokens.assign(toks.begin() + 2, toks.end());
    sec[toks[0].text] = std::move(e);
  }
  return out;
}

class Reader {
 public:
  Reader(Section& s, std::string name) : s_(s), name_(std::move(name)) {}

  const Entry* find(const std::string& key) {
    auto it = s_.find(key);
    if (it == s_.end()) return nullptr;
    it->second.used = true;
    return &it->second;
  }

  static double number(const Entry& e, const Token& t) {
    if (t.quoted) throw ConfigError("expected a number, found a string", e.line, t.column);
    const char* b = t.text.c_str();
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(b, &end);
    if (end == b || *end != '\0' || errno == ERANGE || !std::isfinite(v))
      throw ConfigError("invalid number '" + t.text + "'", e.line, t.column);
    return v;
  }
  static long long integer(const Entry& e, const Token& t) {
    if (t.quoted) throw ConfigError("expected an integer, found a string", e.line, t.column);
    const char* b = t.text.c_str();
    char* end = nullptr;
    errno = 0;
    const long long v = std::strtoll(b, &end, 10);
    if (end == b || *end != '\0' || errno == ERANGE) throw ConfigError("invalid integer '" + t.text + "'", e.line, t.column);
    return v;
  }
  static const Token& single(const Entry& e) {
    if (e.tokens.size() != 1) throw ConfigError("expected a single value", e.line, e.tokens[1].column);
    return e.tokens[0];
  }

  void get(const std::string& key, double& v) {
    if (const Entry* e = find(key)) v = number(*e, single(*e));
  }
  void get(const std::string& key, int& v) {
    if (const Entry* e = find(key)) {
      const long long x = integer(*e, single(*e));
      if (x < -2147483647LL || x > 2147483647LL) throw ConfigError("integer out of range", e->line, e->tokens[0].column);
      v = static_cast<int>(x);
    }
  }
  void get(const std::string& key, std::uint64_t& v) {
    if (const Entry* e = find(key)) {
      const long long x = integer(*e, single(*e));
      if (x < 0) throw ConfigError("expected a non-negative integer", e->line, e->tokens[0].column);
      v = static_cast<std::uint64_t>(x);
    }
  }
  void get(const std::string& key, bool& v) {
    if (const Entry* e = find(key)) {
      const Token& t = single(*e);
      if (!t.quoted && t.text == "true")
        v = true;
      else if (!t.quoted && t.text == "false")
        v = false;
      else
        throw ConfigError("expected true or false", e->line, t.column);
    }
  }
  void get_string(const std::string& key, std::string& v) {
    if (const Entry* e = find(key)) {
      const Token& t = single(*e);
      if (!t.quoted) throw ConfigError("expected a quoted string", e->line, t.column);
      v = t.text;
    }
  }
  /// A quoted expression over `vars`; syntax errors point into the string.
  void get_expression(const std::string& key, std::string& v, std::vector<std::string> vars) {
    if (const Entry* e = find(key)) {
      if (!e->tokens[0].quoted) throw ConfigError("expressions must be quoted", e->line, e->tokens[0].column);
      const Token& t = single(*e);
      try {
        (void)Expression::parse(t.text, std::move(vars));
      } catch (const ExpressionError& ex) {
        const int off = ex.offset() == ExpressionError::npos ? 0 : static_cast<int>(ex.offset());
        throw ConfigError(std::string("bad expression: ") + ex.what(), e->line, t.column + 1 + off);
      }
      v = t.text;
    }
  }
  void get(const std::string& key, Vec2& v) {
    if (const Entry* e = find(key)) {
      if (e->tokens.size() != 2) throw ConfigError("expected two numbers", e->line, e->tokens[0].column);
      v = {number(*e, e->tokens[0]), number(*e, e->tokens[1])};
    }
  }
  void get(const std::string& key, std::array<double, 4>& v) {
    if (const Entry* e = find(key)) {
      if (e->tokens.size() != 4) throw ConfigError("expected four numbers", e->line, e->tokens[0].column);
      for (std::size_t i = 0; i < 4; ++i) v[i] = number(*e, e->tokens[i]);
    }
  }
  void get(const std::string& key, std::vector<double>& v) {
    if (const Entry* e = find(key)) {
      v.clear();
      for (const Token& t : e->tokens) v.push_back(number(*e, t));
    }
  }
  void get(const std::string& key, std::vector<int>& v) {
    if (const Entry* e = find(key)) {
      v.clear();
      for (const Token& t : e->tokens) v.push_back(static_cast<int>(integer(*e, t)));
    }
  }
  template <class Enum>
  void get_enum(const std::string& key, Enum& v, const std::vector<std::pair<std::string, Enum>>& names) {
    if (const Entry* e = find(key)) v = parse_enum(*e, single(*e), names);
  }
  template <class Enum>
  void get_enum_list(const std::string& key, std::vector<Enum>& v, const std::vector<std::pair<std::string, Enum>>& names) {
    if (const Entry* e = find(key)) {
      v.clear();
      for (const Token& t : e->tokens) v.push_back(parse_enum(*e, t, names));
    }
  }

  /// Position of a key for validation messages (line 0 when absent).
  std::pair<int, int> where(const std::string& key) const {
    auto it = s_.find(key);
    return it == s_.end() ? std::pair{0, 0} : std::pair{it->second.line, it->second.column};
  }

  void reject_unused() const {
    for (const auto& [k, e] : s_)
      if (!e.used) throw ConfigError("unknown key '" + k + "' in [" + name_ + "]", e.line, e.column);
  }

 private:
  template <class Enum>
  static Enum parse_enum(const Entry& e, const Token& t, const std::vector<std::pair<std::string, Enum>>& names) {
    for (const auto& [n, val] : names)
      if (!t.quoted && t.text == n) return val;
    std::string list;
    for (const auto& p : names) list += (list.empty() ? "" : ", ") + p.first;
    throw ConfigError("expected one of: " + list, e.line, t.column);
  }

  Section& s_;
  std::string name_;
};

inline const std::vector<std::pair<std::string, ExtensionVariant>>& variant_names() {
  static const std::vector<std::pair<std::string, ExtensionVariant>> v{
      {"p1", ExtensionVariant::p1}, {"p2", ExtensionVariant::p2}, {"p2_legacy", ExtensionVariant::p2_legacy}};
  return v;
}
inline const std::vector<std::pair<std::string, InputFamily>>& family_names() {
  static const std::vector<std::pair<std::string, InputFamily>> v{
      {"zero_mean_random", InputFamily::zero_mean_random},
      {"constant_per_cell", InputFamily::constant_per_cell},
      {"smooth_global", InputFamily::smooth_global}};
  return v;
}

}  // namespace detail

inline ExperimentConfig parse_config(std::string_view text) {
  std::map<std::string, int> section_line;
  auto sections = detail::lex_config(text, section_line);
  ExperimentConfig c;
  static const char* known[] = {"geometry", "model", "solver", "outputs", "extbench", "cell", "run"};
  for (const auto& [name, line] : section_line) {
    bool ok = false;
    for (const char* k : known) ok = ok || name == k;
    if (!ok) throw ConfigError("unknown section [" + name + "]", line, 2);
  }
  auto check = [](bool cond, const std::string& msg, std::pair<int, int> at) {
    if (!cond) throw ConfigError(msg, at.first, at.second);
  };

  {
    detail::Reader r(sections["geometry"], "geometry");
    GeometryConfig& g = c.geometry;
    r.get("periods", g.periods);
    r.get("inclusion", g.inclusion);
    r.get("inclusion_low", g.inclusion_low);
    r.get("inclusion_high", g.inclusion_high);
    r.get("domain", g.domain);
    r.get("eps", g.eps);
    r.get("m", g.m);
    r.get("boundary_inclusions", g.boundary_inclusions);
    r.reject_unused();
    check(g.periods[0] > 0.0 && g.periods[1] > 0.0, "periods must be positive", r.where("periods"));
    for (int a = 0; a < 2; ++a) {
      check(g.inclusion_low[a] > 0.0 && g.inclusion_high[a] < 1.0 && g.inclusion_low[a] < g.inclusion_high[a],
            "inclusion fractions must satisfy 0 < low < high < 1", r.where("inclusion_low"));
    }
    check(g.domain[2] > g.domain[0] && g.domain[3] > g.domain[1], "domain must have positive extent", r.where("domain"));
    check(!g.eps.empty(), "eps list is empty", r.where("eps"));
    for (std::size_t i = 0; i < g.eps.size(); ++i) {
      check(g.eps[i] > 0.0, "eps values must be positive", r.where("eps"));
      if (i > 0) check(g.eps[i] < g.eps[i - 1], "eps list must be strictly decreasing", r.where("eps"));
    }
    check(g.m >= 2, "m must be at least 2", r.where("m"));
  }
  {
    detail::Reader r(sections["model"], "model");
    ModelConfig& m = c.model;
    for (auto [key, field] : {std::pair<const char*, std::string*>{"a11", &m.a11}, {"a12", &m.a12}, {"a21", &m.a21},
                              {"a22", &m.a22}})
      r.get_expression(key, *field, {"y1", "y2", "t"});
    r.get_expression("h", m.h, {"y1", "y2", "t"});
    r.get("alpha", m.alpha);
    r.get_enum<DataMode>("data", m.data, {{"l2", DataMode::l2}, {"l1", DataMode::l1}});
    r.get_expression("f", m.f, {"x1", "x2"});
    r.get("spike", m.spike);
    r.get("spike_mass", m.spike_mass);
    r.get("gamma", m.gamma);
    r.reject_unused();
    try {
      (void)CoefficientModel::from_text(m.a11, m.a12, m.a21, m.a22, m.h);
    } catch (const ExpressionError& ex) {
      check(false, ex.what(), r.where("h"));
    }
    check(m.spike_mass >= 0.0, "spike_mass must be non-negative", r.where("spike_mass"));
  }
  {
    detail::Reader r(sections["solver"], "solver");
    SolverConfig& s = c.solver;
    r.get("picard_tol", s.picard_tol);
    r.get("max_iterations", s.max_iterations);
    r.get("damping", s.damping);
    r.get("cg_tol", s.cg_tol);
    r.get("homog_grid", s.homog_grid);
    r.get("table_samples", s.table_samples);
    r.reject_unused();
    check(s.picard_tol > 0.0, "picard_tol must be positive", r.where("picard_tol"));
    check(s.max_iterations >= 1, "max_iterations must be at least 1", r.where("max_iterations"));
    check(s.cg_tol > 0.0, "cg_tol must be positive", r.where("cg_tol"));
    check(s.homog_grid >= 2, "homog_grid must be at least 2", r.where("homog_grid"));
    check(s.table_samples >= 2, "table_samples must be at least 2", r.where("table_samples"));
  }
  {
    detail::Reader r(sections["outputs"], "outputs");
    OutputConfig& o = c.outputs;
    r.get_string("directory", o.directory);
    if (const detail::Entry* e = r.find("formats")) {
      o.csv = o.json = o.svg = false;
      for (const detail::Token& t : e->tokens) {
        if (t.text == "csv")
          o.csv = true;
        else if (t.text == "json")
          o.json = true;
        else if (t.text == "svg")
          o.svg = true;
        else
          throw ConfigError("expected one of: csv, json, svg", e->line, t.column);
      }
    }
    r.reject_unused();
    check(o.csv || o.json || o.svg, "formats needs at least one of csv, json, svg", r.where("formats"));
  }
  {
    detail::Reader r(sections["extbench"], "extbench");
    ExtbenchConfig& x = c.extbench;
    r.get_enum_list("variants", x.variants, detail::variant_names());
    r.get_enum_list("families", x.families, detail::family_names());
    r.get("samples", x.samples);
    r.get("eta", x.eta);
    r.get("m", x.m);
    r.reject_unused();
    check(!x.variants.empty(), "variants list is empty", r.where("variants"));
    check(!x.families.empty(), "families list is empty", r.where("families"));
    check(x.samples >= 1, "samples must be at least 1", r.where("samples"));
    check(x.eta > 0.0, "eta must be positive", r.where("eta"));
    check(x.m >= 2, "m must be at least 2", r.where("m"));
  }
  {
    detail::Reader r(sections["cell"], "cell");
    CellConfig& x = c.cell;
    r.get("t_min", x.t_min);
    r.get("t_max", x.t_max);
    r.get("samples", x.samples);
    r.get("richardson_m", x.richardson_m);
    r.reject_unused();
    check(x.t_max > x.t_min, "t_max must exceed t_min", r.where("t_max"));
    check(x.samples >= 2, "samples must be at least 2", r.where("samples"));
    check(x.richardson_m.size() == 3, "richardson_m needs three resolutions",
          r.where("richardson_m"));
    for (int m : x.richardson_m) check(m >= 2, "resolutions must be at least 2", r.where("richardson_m"));
  }
  {
    detail::Reader r(sections["run"], "run");
    RunConfig& x = c.run;
    r.get("seed", x.seed);
    r.get("workers", x.workers);
    r.get("truncation_levels", x.truncation_levels);
    r.reject_unused();
    check(x.workers >= 1, "workers must be at least 1", r.where("workers"));
    check(!x.truncation_levels.empty(), "truncation_levels is empty", r.where("truncation_levels"));
    for (double k : x.truncation_levels) check(k > 0.0, "truncation levels must be positive", r.where("truncation_levels"));
  }
  return c;
}

/// Canonical text of a configuration; parse_config reads it back to an
/// equal value. Numbers use %.17g.
inline std::string serialize_config(const ExperimentConfig& c) {
  auto num = [](double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  auto vec = [&](const auto& xs) {
    std::string s;
    for (const auto& x : xs) s += (s.empty() ? "" : " ") + num(static_cast<double>(x));
    return s;
  };
  auto q = [](const std::string& s) { return "\"" + s + "\""; };
  auto b = [](bool v) { return std::string(v ? "true" : "false"); };
  std::ostringstream o;
  const GeometryConfig& g = c.geometry;
  o << "[geometry]\n"
    << "periods = " << vec(g.periods) << "\n"
    << "inclusion = " << b(g.inclusion) << "\n"
    << "inclusion_low = " << vec(g.inclusion_low) << "\n"
    << "inclusion_high = " << vec(g.inclusion_high) << "\n"
    << "domain = " << vec(g.domain) << "\n"
    << "eps = " << vec(g.eps) << "\n"
    << "m = " << g.m << "\n"
    << "boundary_inclusions = " << b(g.boundary_inclusions) << "\n\n";
  const ModelConfig& m = c.model;
  o << "[model]\n"
    << "a11 = " << q(m.a11) << "\na12 = " << q(m.a12) << "\na21 = " << q(m.a21) << "\na22 = " << q(m.a22) << "\n"
    << "h = " << q(m.h) << "\n"
    << "alpha = " << num(m.alpha) << "\n"
    << "data = " << (m.data == DataMode::l2 ? "l2" : "l1") << "\n"
    << "f = " << q(m.f) << "\n"
    << "spike = " << vec(m.spike) << "\n"
    << "spike_mass = " << num(m.spike_mass) << "\n"
    << "gamma = " << num(m.gamma) << "\n\n";
  const SolverConfig& s = c.solver;
  o << "[solver]\n"
    << "picard_tol = " << num(s.picard_tol) << "\n"
    << "max_iterations = " << s.max_iterations << "\n"
    << "damping = " << b(s.damping) << "\n"
    << "cg_tol = " << num(s.cg_tol) << "\n"
    << "homog_grid = " << s.homog_grid << "\n"
    << "table_samples = " << s.table_samples << "\n\n";
  o << "[outputs]\n"
    << "directory = " << q(c.outputs.directory) << "\n";
  std::string formats;
  if (c.outputs.csv) formats += " csv";
  if (c.outputs.json) formats += " json";
  if (c.outputs.svg) formats += " svg";
  o << "formats =" << formats << "\n";
  o << "\n[extbench]\n";
  std::string vs, fs;
  auto name_of = [](const auto& table, auto value) {
    for (const auto& [n, v] : table)
      if (v == value) return n;
    return std::string("?");
  };
  for (auto v : c.extbench.variants) vs += " " + name_of(detail::variant_names(), v);
  for (auto f : c.extbench.families) fs += " " + name_of(detail::family_names(), f);
  o << "variants =" << vs << "\n"
    << "families =" << fs << "\n";
  o << "samples = " << c.extbench.samples << "\n"
    << "eta = " << num(c.extbench.eta) << "\n"
    << "m = " << c.extbench.m << "\n\n";
  o << "[cell]\n"
    << "t_min = " << num(c.cell.t_min) << "\n"
    << "t_max = " << num(c.cell.t_max) << "\n"
    << "samples = " << c.cell.samples << "\n";
  o << "richardson_m = " << vec(c.cell.richardson_m) << "\n";
  o << "\n[run]\n"
    << "seed = " << c.run.seed << "\n"
    << "workers = " << c.run.workers << "\n";
  o << "truncation_levels = " << vec(c.run.truncation_levels) << "\n";
  return o.str();
}

}  // namespace twoscale
