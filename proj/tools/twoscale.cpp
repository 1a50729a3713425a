// twoscale <subcommand> --config <path> [--out <dir>] [--workers N] [--seed S]
//
// Exit status: 0 all checks pass, 1 a check failed, 2 configuration or
// geometry error, 3 solver failure, 4 I/O error.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "twoscale/twoscale.hpp"

namespace {

enum Exit { kOk = 0, kAssertion = 1, kConfig = 2, kSolver = 3, kIo = 4 };

int run(const std::string& sub, const std::string& config_path, const std::string& out_flag, int workers, long long seed) {
  using namespace twoscale;
  std::string text;
  {
    std::ifstream in(config_path, std::ios::binary);
    if (!in) {
      std::cerr << "error: cannot read config " << config_path << "\n";
      return kIo;
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    text = ss.str();
  }
  ExperimentConfig cfg;
  try {
    cfg = parse_config(text);
  } catch (const ConfigError& e) {
    std::cerr << config_path << ":" << e.line() << ":" << e.column() << ": error: "
              << std::string(e.what()).substr(std::string(e.what()).find(": ") + 2) << "\n";
    return kConfig;
  }
  if (workers > 0) cfg.run.workers = workers;
  if (seed >= 0) cfg.run.seed = static_cast<std::uint64_t>(seed);
  std::string dir = cfg.outputs.directory;
  if (const char* env = std::getenv("TWOSCALE_OUTPUT_DIR"); env && *env) dir = env;
  if (!out_flag.empty()) dir = out_flag;

  RunReport report;
  try {
    report = twoscale::run(sub, cfg, text);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfig;
  } catch (const GeometryError& e) {
    std::cerr << "geometry error: " << e.what() << "\n";
    return kConfig;
  } catch (const ExpressionError& e) {
    std::cerr << "expression error: " << e.what() << "\n";
    return kConfig;
  } catch (const SolverError& e) {
    std::cerr << "solver error: " << e.what() << "\n";
    return kSolver;
  } catch (const CellProblemError& e) {
    std::cerr << "solver error: " << e.what() << "\n";
    return kSolver;
  } catch (const AssemblyError& e) {
    std::cerr << "solver error: " << e.what() << "\n";
    return kSolver;
  }
  try {
    write_report(report, dir, cfg.outputs);
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kIo;
  }
  for (const Check& c : report.checks)
    std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << (c.detail.empty() ? "" : "  (" + c.detail + ")") << "\n";
  std::cout << report.subcommand << ": " << (report.passed() ? "all checks passed" : "checks failed") << ", outputs in "
            << dir << "\n";
  return report.passed() ? kOk : kAssertion;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-scale homogenization experiments"};
  app.require_subcommand(1, 1);
  std::string config, out;
  int workers = 0;
  long long seed = -1;
  for (const std::string& name : twoscale::subcommands()) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", config, "experiment configuration file")->required();
    sub->add_option("--out", out, "output directory (overrides TWOSCALE_OUTPUT_DIR and the config)");
    sub->add_option("--workers", workers, "worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--seed", seed, "seed for random inputs")->check(CLI::NonNegativeNumber);
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfig;
  }
  return run(app.get_subcommands().front()->get_name(), config, out, workers, seed);
}
