#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "twoscale/config.hpp"
#include "twoscale/random.hpp"

using namespace twoscale;

namespace {

struct Pos {
  int line, column;
};

Pos error_at(const std::string& text) {
  try {
    (void)parse_config(text);
  } catch (const ConfigError& e) {
    return {e.line(), e.column()};
  }
  ADD_FAILURE() << "no error for:\n" << text;
  return {-1, -1};
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

// Random expression over `vars` from a small grammar; depth bounded.
std::string random_expression(std::mt19937_64& rng, const std::vector<std::string>& vars, int depth = 0) {
  const int pick = static_cast<int>(rng() % (depth > 2 ? 2 : 6));
  switch (pick) {
    case 0: return fmt(uniform(rng, 0.1, 3.0));
    case 1: return vars[rng() % vars.size()];
    case 2: return "(" + random_expression(rng, vars, depth + 1) + " + " + random_expression(rng, vars, depth + 1) + ")";
    case 3: return random_expression(rng, vars, depth + 1) + " * " + random_expression(rng, vars, depth + 1);
    case 4: return "sin(2 * pi * " + random_expression(rng, vars, depth + 1) + ")";
    default: return "1 + " + random_expression(rng, vars, depth + 1) + "^2";
  }
}

ExperimentConfig random_config(std::mt19937_64& rng) {
  ExperimentConfig c;
  auto coin = [&] { return (rng() & 1) != 0; };
  GeometryConfig& g = c.geometry;
  g.periods = {uniform(rng, 0.5, 2.0), uniform(rng, 0.5, 2.0)};
  g.inclusion = coin();
  g.inclusion_low = {uniform(rng, 0.05, 0.4), uniform(rng, 0.05, 0.4)};
  g.inclusion_high = {uniform(rng, 0.6, 0.95), uniform(rng, 0.6, 0.95)};
  g.domain = {uniform(rng, -1, 0), uniform(rng, -1, 0), uniform(rng, 1, 2), uniform(rng, 1, 2)};
  g.eps.clear();
  double e = uniform(rng, 0.2, 1.0);
  for (int i = 0, n = 1 + static_cast<int>(rng() % 5); i < n; ++i) g.eps.push_back(e *= uniform(rng, 0.3, 0.9));
  g.m = 2 + static_cast<int>(rng() % 30);
  g.boundary_inclusions = coin();
  ModelConfig& m = c.model;
  const std::vector<std::string> yt{"y1", "y2", "t"}, y{"y1", "y2"}, x{"x1", "x2"};
  m.a11 = random_expression(rng, yt);
  m.a12 = random_expression(rng, yt);
  m.a21 = coin() ? m.a12 : random_expression(rng, yt);
  m.a22 = random_expression(rng, yt);
  m.h = random_expression(rng, y);
  m.alpha = uniform(rng, 0.0, 2.0);
  m.data = coin() ? DataMode::l1 : DataMode::l2;
  m.f = random_expression(rng, x);
  m.spike = {uniform(rng, 0, 1), uniform(rng, 0, 1)};
  m.spike_mass = uniform(rng, 0, 3);
  m.gamma = uniform(rng, -1, 2);
  SolverConfig& s = c.solver;
  s.picard_tol = uniform(rng, 1e-12, 1e-4);
  s.max_iterations = 1 + static_cast<int>(rng() % 100);
  s.damping = coin();
  s.cg_tol = uniform(rng, 1e-14, 1e-6);
  s.homog_grid = 2 + static_cast<int>(rng() % 500);
  s.table_samples = 2 + static_cast<int>(rng() % 40);
  c.outputs.directory = "dir_" + std::to_string(rng() % 1000);
  c.outputs.csv = coin();
  c.outputs.json = coin();
  c.outputs.svg = !c.outputs.csv && !c.outputs.json ? true : coin();
  c.extbench.variants.clear();
  for (int i = 0, n = 1 + static_cast<int>(rng() % 4); i < n; ++i)
    c.extbench.variants.push_back(static_cast<ExtensionVariant>(rng() % 3));
  c.extbench.families.clear();
  for (int i = 0, n = 1 + static_cast<int>(rng() % 4); i < n; ++i)
    c.extbench.families.push_back(static_cast<InputFamily>(rng() % 3));
  c.extbench.samples = 1 + static_cast<int>(rng() % 50);
  c.extbench.eta = uniform(rng, 0.01, 0.3);
  c.extbench.m = 2 + static_cast<int>(rng() % 40);
  c.cell.t_min = uniform(rng, -5, 0);
  c.cell.t_max = uniform(rng, 0.1, 5);
  c.cell.samples = 2 + static_cast<int>(rng() % 20);
  c.cell.richardson_m = {2 + static_cast<int>(rng() % 10), 20, 40};
  c.run.seed = rng() >> 2;
  c.run.workers = 1 + static_cast<int>(rng() % 8);
  c.run.truncation_levels.clear();
  for (int i = 0, n = 1 + static_cast<int>(rng() % 5); i < n; ++i) c.run.truncation_levels.push_back(uniform(rng, 0.1, 10));
  return c;
}

}  // namespace

TEST(Config, EmptyTextGivesDefaults) { EXPECT_EQ(parse_config(""), ExperimentConfig{}); }

TEST(Config, CommentsBlankLinesAndCrlf) {
  const auto c = parse_config("# header\r\n\r\n[geometry]  # trailing\r\nm = 16\r\neps = 0.5 0.25\r\n");
  EXPECT_EQ(c.geometry.m, 16);
  EXPECT_EQ(c.geometry.eps, (std::vector<double>{0.5, 0.25}));
}

TEST(Config, ValuesOfEveryKind) {
  const auto c = parse_config(R"cfg([model]
a11 = "1 + t^2 / (1 + t^2)"
f = "sin(pi * x1)"   # hash inside a comment "quoted"
data = l1
spike = 0.25 0.75
[outputs]
directory = "a # not a comment"
formats = csv svg
[extbench]
variants = p2_legacy p1
families = smooth_global
[run]
seed = 7
)cfg");
  EXPECT_EQ(c.model.a11, "1 + t^2 / (1 + t^2)");
  EXPECT_EQ(c.model.f, "sin(pi * x1)");
  EXPECT_EQ(c.model.data, DataMode::l1);
  EXPECT_EQ(c.model.spike, (Vec2{0.25, 0.75}));
  EXPECT_EQ(c.outputs.directory, "a # not a comment");
  EXPECT_TRUE(c.outputs.csv && c.outputs.svg && !c.outputs.json);
  EXPECT_EQ(c.extbench.variants, (std::vector<ExtensionVariant>{ExtensionVariant::p2_legacy, ExtensionVariant::p1}));
  EXPECT_EQ(c.extbench.families, std::vector<InputFamily>{InputFamily::smooth_global});
  EXPECT_EQ(c.run.seed, 7u);
}

TEST(Config, ErrorsCarryLineAndColumn) {
  struct Case {
    std::string text;
    Pos at;
  };
  const std::vector<Case> cases{
      {"[geometry]\nm = 8\nbogus = 1\n", {3, 1}},
      {"[geometry]\n\n[nope]\n", {3, 2}},
      {"[geometry]\nm = eight\n", {2, 5}},
      {"[geometry]\nm = 8 9\n", {2, 7}},
      {"[geometry]\neps = 0.25 0.5\n", {2, 1}},
      {"[geometry]\neps = 0.25 -0.125\n", {2, 1}},
      {"[model]\na11 = 1 + t\n", {2, 7}},
      {"[model]\na11 = \"1 + * t\"\n", {2, 12}},
      {"[model]\nf = \"y1\"\n", {2, 6}},
      {"[model]\nh = \"t\"\n", {2, 1}},
      {"[model]\nf = \"open\n", {2, 5}},
      {"m = 8\n", {1, 1}},
      {"[geometry]\nm =\n", {2, 4}},
      {"[geometry]\nm = 8\nm = 9\n", {3, 1}},
      {"[geometry]\n[geometry]\n", {2, 2}},
      {"[geometry\n", {1, 1}},
      {"[model]\ndata = l3\n", {2, 8}},
      {"[outputs]\nformats = pdf\n", {2, 11}},
      {"[solver]\ndamping = yes\n", {2, 11}},
      {"[run]\nworkers = 0\n", {2, 1}},
      {"[cell]\nrichardson_m = 16 32\n", {2, 1}},
  };
  for (const Case& c : cases) {
    const Pos p = error_at(c.text);
    EXPECT_EQ(p.line, c.at.line) << c.text;
    EXPECT_EQ(p.column, c.at.column) << c.text;
  }
}

TEST(Config, ErrorMessageNamesThePosition) {
  try {
    (void)parse_config("[geometry]\nm = x\n");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("config:2:5:"), std::string::npos);
  }
}

TEST(Config, RoundTripProperty) {
  for (std::uint64_t i = 0; i < 300; ++i) {
    auto rng = task_rng(99, i);
    const ExperimentConfig c = random_config(rng);
    const std::string text = serialize_config(c);
    ExperimentConfig back;
    ASSERT_NO_THROW(back = parse_config(text)) << text;
    EXPECT_EQ(back, c) << text;
    EXPECT_EQ(serialize_config(back), text);
  }
}

TEST(Config, ShippedConfigsParseAndRoundTrip) {
  int n = 0;
  for (const auto& entry : std::filesystem::directory_iterator(TWOSCALE_SOURCE_DIR "/configs")) {
    if (entry.path().extension() != ".cfg") continue;
    std::ifstream in(entry.path());
    std::stringstream ss;
    ss << in.rdbuf();
    ExperimentConfig c;
    ASSERT_NO_THROW(c = parse_config(ss.str())) << entry.path();
    EXPECT_EQ(parse_config(serialize_config(c)), c) << entry.path();
    EXPECT_NO_THROW((void)c.coefficient_model());
    ++n;
  }
  EXPECT_GE(n, 5);
}
