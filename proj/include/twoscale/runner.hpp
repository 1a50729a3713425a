#pragma once

// Orchestration of the experiment suites behind the command line tool.
// Every suite returns its CSV tables as text, the plots as series, and a
// list of named checks; nothing here touches the file system except
// write_report.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "twoscale/cell_problem.hpp"
#include "twoscale/config.hpp"
#include "twoscale/extension.hpp"
#include "twoscale/fine_solver.hpp"
#include "twoscale/homogenized.hpp"
#include "twoscale/parallel.hpp"
#include "twoscale/random.hpp"
#include "twoscale/report.hpp"
#include "twoscale/unfolding.hpp"
#include "twoscale/version.hpp"
#include "json.hpp"

namespace twoscale {

class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

struct Check {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct Artifact {
  std::string name;  // file stem
  std::string text;  // CSV bytes
};

struct Plot {
  std::string name;
  PlotSpec spec;
  std::vector<Series> series;
};

struct RunReport {
  std::string subcommand;
  std::vector<Artifact> tables;
  std::vector<Plot> plots;
  std::vector<Check> checks;
  std::vector<std::pair<std::string, double>> timings;  // seconds
  std::vector<std::pair<std::string, long long>> iterations;
  std::string config_hash;
  std::string code_version = kCodeVersion;
  std::uint64_t seed = 0;
  int workers = 1;

  bool passed() const {
    for (const Check& c : checks)
      if (!c.passed) return false;
    return true;
  }
  const Artifact* table(std::string_view name) const {
    for (const Artifact& a : tables)
      if (a.name == name) return &a;
    return nullptr;
  }
  void add(const Table& t) {
    std::ostringstream os;
    write_csv(os, t);
    tables.push_back({t.name, os.str()});
  }
  void check(std::string name, bool ok, std::string detail) { checks.push_back({std::move(name), ok, std::move(detail)}); }
};

inline const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> s{"unfold-check", "extbench", "cell", "fine", "homog", "sweep"};
  return s;
}

namespace detail {

inline std::string describe(double value, const char* op, double bound) {
  return "value " + fmt17(value) + " " + op + " " + fmt17(bound);
}

class Stopwatch {
 public:
  Stopwatch() : t0_(std::chrono::steady_clock::now()) {}
  double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count(); }

 private:
  std::chrono::steady_clock::time_point t0_;
};

inline bool strictly_decreasing(const std::vector<double>& v) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (!(v[i] < v[i - 1])) return false;
  return true;
}

/// Monotone decrease and final/initial <= 0.5 over a ladder.
inline void ladder_checks(RunReport& r, const std::string& what, const std::vector<double>& v) {
  if (v.size() < 2) return;
  r.check(what + " decreasing", strictly_decreasing(v), "over " + std::to_string(v.size()) + " values");
  const double ratio = v.back() / v.front();
  r.check(what + " final/initial <= 0.5", ratio <= 0.5, describe(ratio, "<=", 0.5));
}

inline std::shared_ptr<const EpsMesh> eps_mesh(const ExperimentConfig& c, double eps) {
  return std::make_shared<EpsMesh>(build_tiling(c.geometry.cell(), c.geometry.box(), eps), c.geometry.m,
                                   c.geometry.boundary_inclusions);
}

inline SourceTerm source(const ExperimentConfig& c) {
  if (c.model.data == DataMode::l1) return SourceTerm::spike(c.model.spike, c.model.spike_mass);
  return SourceTerm(Expression::parse(c.model.f, {"x1", "x2"}));
}

inline FineOptions fine_options(const ExperimentConfig& c) {
  FineOptions o;
  o.gamma = c.model.gamma;
  o.picard_tol = c.solver.picard_tol;
  o.max_iterations = c.solver.max_iterations;
  o.damping = c.solver.damping;
  o.cg_tol = c.solver.cg_tol;
  return o;
}

inline GridFunction random_field(const std::shared_ptr<const FeSpace>& s, std::mt19937_64 rng) {
  GridFunction f(s);
  for (auto& v : f.values) v = uniform(rng, -1.0, 1.0);
  return f;
}

inline double sinsin(const Vec2& x) { return std::sin(M_PI * x[0]) * std::sin(M_PI * x[1]); }

/// Declared alpha against samples of A over Y x [t_min, t_max], h > 0 on
/// Gamma, and the certificate of a table built over that range.
inline void coefficient_checks(RunReport& r, const CoefficientModel& model, const ReferenceCell& cell, double t_min,
                               double t_max, double alpha0) {
  const CoercivityReport rep = model.sample(cell, t_min, t_max);
  if (model.alpha() > 0.0) {
    r.check("declared alpha holds on samples", rep.coercive(model.alpha()),
            "sampled min eigenvalue " + fmt17(rep.min_eigenvalue) + ", alpha " + fmt17(model.alpha()));
    r.check("alpha0 >= 0.05 alpha", alpha0 >= 0.05 * model.alpha(), describe(alpha0, ">=", 0.05 * model.alpha()));
  }
  if (cell.has_inclusion()) r.check("h > 0 on Gamma", rep.min_h > 0.0, "sampled min h " + fmt17(rep.min_h));
}

}  // namespace detail

/// Unfolding identities on exact pavings and the unfolding ladder for
/// sin(pi x1) sin(pi x2).
inline void run_unfold_check(const ExperimentConfig& c, RunReport& r) {
  Table ids{"unfold_identities", {"eps", "identity", "domain", "value", "tolerance", "passed"}, {}};
  Table ladder{"unfold_ladder", {"eps", "distance"}, {}};
  std::vector<double> dist;
  Series s{"||T(phi) - phi||", {}};
  for (std::size_t i = 0; i < c.geometry.eps.size(); ++i) {
    const double eps = c.geometry.eps[i];
    const auto mesh = detail::eps_mesh(c, eps);
    const auto phi = interpolate(mesh->space(Component::whole), detail::sinsin);
    const double d = std::sqrt(unfolded_distance_sq(unfold(phi, mesh, MicroDomain::cell), detail::sinsin));
    dist.push_back(d);
    ladder.add({eps, d});
    s.points.emplace_back(eps, d);
    if (!mesh->tiling().exact_paving()) {
      ids.add({eps, std::string("all"), std::string("-"), NAN, 0.0, std::string("skipped: paving is not exact")});
      continue;
    }
    auto record = [&](const char* id, const char* dom, double v, double tol) {
      const bool ok = v <= tol;
      ids.add({eps, std::string(id), std::string(dom), v, tol, std::string(ok ? "true" : "false")});
      r.check(std::string(id) + " " + dom + " eps=" + fmt17(eps), ok, detail::describe(v, "<=", tol));
    };
    const std::uint64_t seed = c.run.seed;
    // Products of random nodal fields.
    for (auto [dom, comp] : {std::pair{MicroDomain::cell, Component::whole}, {MicroDomain::matrix, Component::matrix},
                             {MicroDomain::inclusion, Component::inclusion}}) {
      if (comp != Component::whole && !mesh->tiling().cell().has_inclusion()) continue;
      const auto a = detail::random_field(mesh->space(comp), task_rng(seed, 2 * i));
      const auto b = detail::random_field(mesh->space(comp), task_rng(seed, 2 * i + 1));
      const char* name = dom == MicroDomain::cell ? "Y" : dom == MicroDomain::matrix ? "Y1" : "Y2";
      record("product", name, product_identity_check(a, b, mesh, dom), 1e-13);
      // Integration against direct quadrature over the paved component.
      const auto sfield = interpolate(mesh->space(comp), detail::sinsin);
      const double lhs = integrate_unfolded(unfold(sfield, mesh, dom));
      const double rhs = integrate_paved(sfield, *mesh, comp);
      record("integration", name, std::abs(lhs - rhs) / std::abs(rhs), 1e-12);
      record("gradient", name, unfold_gradient_check(a, mesh), 1e-13);
    }
    if (mesh->tiling().cell().has_inclusion()) {
      const auto f = interpolate(mesh->space(Component::matrix), detail::sinsin);
      const double lhs = boundary_l2_sq(unfold_boundary(f, mesh));
      const double rhs = eps * cell_measures(mesh->tiling().cell()).cell * paved_interface_l2_sq(f, *mesh);
      record("boundary", "Gamma", std::abs(lhs - rhs) / rhs, 1e-12);
    }
  }
  detail::ladder_checks(r, "unfolding distance", dist);
  r.add(ids);
  r.add(ladder);
  r.plots.push_back({"unfold_ladder", {"Unfolding ladder", "eps", "distance", true, true}, {s}});
}

/// Extension ratio tables for every configured variant and input family.
inline void run_extbench(const ExperimentConfig& c, RunReport& r) {
  struct Job {
    ExtensionVariant v;
    InputFamily f;
  };
  std::vector<Job> jobs;
  for (auto v : c.extbench.variants)
    for (auto f : c.extbench.families) jobs.push_back({v, f});
  const auto results = parallel_map(jobs.size(), c.run.workers, [&](std::size_t j) {
    return measure_ratio(jobs[j].v, c.geometry.cell(), c.geometry.box(), c.geometry.eps, c.extbench.m, jobs[j].f,
                         c.extbench.samples, c.run.seed, c.extbench.eta);
  });
  std::vector<RatioRow> all;
  Table fit{"extbench_fit", {"variant", "family", "spread", "slope"}, {}};
  Plot plot{"extbench", {"Extension ratios", "eps", "ratio", true, true}, {}};
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    const auto& rows = results[j];
    all.insert(all.end(), rows.begin(), rows.end());
    const double spread = relative_spread(rows), slope = fitted_slope(rows);
    fit.add({std::string(to_string(jobs[j].v)), std::string(to_string(jobs[j].f)), spread, slope});
    Series s{std::string(to_string(jobs[j].v)) + " " + to_string(jobs[j].f), {}};
    for (const RatioRow& row : rows)
      if (!row.skipped) s.points.emplace_back(row.eps, row.ratio);
    plot.series.push_back(std::move(s));
    if (rows.size() < 2) continue;
    if (jobs[j].v == ExtensionVariant::p2 && jobs[j].f == InputFamily::zero_mean_random)
      r.check("P2 ratio flat within 15%", spread <= 0.15, detail::describe(spread, "<=", 0.15));
    if (jobs[j].v == ExtensionVariant::p2_legacy && jobs[j].f == InputFamily::constant_per_cell)
      r.check("legacy slope in [-1.2, -0.8]", slope >= -1.2 && slope <= -0.8, "slope " + fmt17(slope));
  }
  std::ostringstream os;
  write_csv(os, all);
  r.tables.push_back({"extbench", os.str()});
  r.add(fit);
  r.plots.push_back(std::move(plot));
}

/// A0 over the configured t range, with consistency checks and a
/// Richardson study of the diagonal at the midpoint of the range.
inline void run_cell(const ExperimentConfig& c, RunReport& r) {
  const CoefficientModel model = c.coefficient_model();
  const ReferenceCell cell = c.geometry.cell();
  const int m = c.cell.richardson_m.back();
  const CellMesh cm(cell, m);
  const int n = c.cell.samples;
  auto t_of = [&](int i) { return c.cell.t_min + (c.cell.t_max - c.cell.t_min) * i / (n - 1); };
  const auto tensors = parallel_map(static_cast<std::size_t>(n), c.run.workers,
                                    [&](std::size_t i) { return homogenized_tensor(model, t_of(static_cast<int>(i)), cm); });
  Table tab{"cell_table", {"t", "A11", "A12", "A21", "A22", "min_eigenvalue", "energy_gap", "voigt_gap"}, {}};
  double alpha0 = INFINITY, worst_gap = 0.0, worst_voigt = INFINITY, worst_asym = 0.0;
  for (const HomogenizedTensor& h : tensors) {
    const Mat2& A = h.flux;
    const double gap = (A - h.energy).max_abs() / std::max(A.max_abs(), 1e-300);
    const double voigt = (voigt_bound(model, h.t, cm) - A).min_sym_eigenvalue();
    alpha0 = std::min(alpha0, A.min_sym_eigenvalue());
    worst_gap = std::max(worst_gap, gap);
    worst_voigt = std::min(worst_voigt, voigt);
    worst_asym = std::max(worst_asym, std::abs(A.a12 - A.a21));
    tab.add({h.t, A.a11, A.a12, A.a21, A.a22, A.min_sym_eigenvalue(), gap, voigt});
  }
  r.check("coercivity alpha0 > 0", alpha0 > 0.0, "alpha0 " + fmt17(alpha0));
  detail::coefficient_checks(r, model, cell, c.cell.t_min, c.cell.t_max, alpha0);
  r.check("energy/flux consistency", worst_gap <= 1e-10, detail::describe(worst_gap, "<=", 1e-10));
  r.check("Voigt bound", worst_voigt >= -1e-10, "min eigenvalue of bound minus A0 " + fmt17(worst_voigt));
  if (model.symmetric())
    r.check("symmetric A0", worst_asym <= 1e-10, detail::describe(worst_asym, "<=", 1e-10));
  r.add(tab);

  const double tm = 0.5 * (c.cell.t_min + c.cell.t_max);
  const auto study = parallel_map(c.cell.richardson_m.size(), c.run.workers, [&](std::size_t i) {
    return homogenized_tensor(model, tm, CellMesh(cell, c.cell.richardson_m[i])).flux;
  });
  Table rich{"cell_richardson", {"m", "t", "A11", "A22", "A12"}, {}};
  for (std::size_t i = 0; i < study.size(); ++i)
    rich.add({static_cast<long long>(c.cell.richardson_m[i]), tm, study[i].a11, study[i].a22, study[i].a12});
  const Richardson r11 = richardson(study[0].a11, study[1].a11, study[2].a11);
  const Richardson r22 = richardson(study[0].a22, study[1].a22, study[2].a22);
  rich.add({std::string("extrapolated"), tm, r11.extrapolated, r22.extrapolated, study[2].a12});
  rich.add({std::string("order"), tm, r11.order, r22.order, 0.0});
  r.add(rich);
  for (auto [name, ext, fine] : {std::tuple{"A11", r11.extrapolated, study[2].a11}, {"A22", r22.extrapolated, study[2].a22}}) {
    const double rel = std::abs(ext - fine) / std::abs(ext);
    r.check(std::string("Richardson ") + name + " stable to 1%", rel <= 0.01, detail::describe(rel, "<=", 0.01));
  }
  Plot plot{"cell_table", {"Homogenized tensor", "t", "A0 entry", false, false}, {}};
  Series s11{"A11", {}}, s22{"A22", {}}, s12{"A12", {}};
  for (const HomogenizedTensor& h : tensors) {
    s11.points.emplace_back(h.t, h.flux.a11);
    s22.points.emplace_back(h.t, h.flux.a22);
    s12.points.emplace_back(h.t, h.flux.a12);
  }
  plot.series = {s11, s22, s12};
  r.plots.push_back(std::move(plot));
}

namespace detail {

inline void truncation_rows(const FineSolution& sol, const CoefficientModel& model, const SourceTerm& src,
                            const std::vector<double>& levels, Table& t, RunReport& r) {
  const auto rows = truncation_diagnostics(sol, model, src, levels);
  std::vector<double> tail;
  for (const TruncationRow& row : rows) {
    t.add({sol.eps, row.k, row.energy, row.interface, row.balance, row.tail, row.excess});
    tail.push_back(row.tail);
  }
  if (tail.size() >= 2)
    r.check("truncation tail decreasing in k at eps=" + fmt17(sol.eps), strictly_decreasing(tail),
            "levels " + std::to_string(tail.size()));
}

}  // namespace detail

/// Fine solves over the eps list: summaries, nodal snapshots and the
/// truncation diagnostics.
inline void run_fine(const ExperimentConfig& c, RunReport& r) {
  const CoefficientModel model = c.coefficient_model();
  const SourceTerm src = detail::source(c);
  const auto opt = detail::fine_options(c);
  const auto sols = parallel_map(c.geometry.eps.size(), c.run.workers, [&](std::size_t i) {
    return solve_fine(detail::eps_mesh(c, c.geometry.eps[i]), model, src, opt);
  });
  Table sum{"fine_summary",
            {"eps", "dofs", "iterations", "damped", "matrix_energy", "inclusion_energy", "interface_energy", "load",
             "balance", "h1eps_norm"},
            {}};
  Table trunc{"fine_truncation", {"eps", "k", "energy", "interface", "balance", "tail", "excess"}, {}};
  for (std::size_t i = 0; i < sols.size(); ++i) {
    const FineSolution& s = sols[i];
    const EnergySplit& e = s.energies;
    const double total = e.matrix + e.inclusion + e.interface;
    const double balance = std::abs(total - e.load) / std::max(std::abs(e.load), 1e-300);
    const long long dofs = static_cast<long long>(s.u1.values.size() + s.u2.values.size());
    sum.add({s.eps, dofs, static_cast<long long>(s.iterations), std::string(s.damped ? "true" : "false"), e.matrix,
             e.inclusion, e.interface, e.load, balance, h1eps_norm(s)});
    r.iterations.emplace_back("fine eps=" + fmt17(s.eps), s.iterations);
    if (e.load != 0.0)
      r.check("energy balance at eps=" + fmt17(s.eps), balance <= 1e-8, detail::describe(balance, "<=", 1e-8));
    if (!model.depends_on_state())
      r.check("one Picard iteration at eps=" + fmt17(s.eps), s.iterations == 1,
              "iterations " + std::to_string(s.iterations));
    detail::truncation_rows(s, model, src, c.run.truncation_levels, trunc, r);
    std::ostringstream os;
    write_snapshot_csv(os, s);
    r.tables.push_back({"fine_snapshot_" + std::to_string(i), os.str()});
  }
  r.add(sum);
  r.add(trunc);
}

namespace detail {

struct HomogRun {
  HomogenizedTensorTable table;
  HomogenizedSolution sol;
  std::function<double(const Vec2&)> f;
  double offset = 0.0;  // NaN without an inclusion
  std::shared_ptr<const CellMesh> cm;
};

/// Right-hand side on Omega: the expression in L2 mode, the spike spread
/// over its cell at the finest eps in L1 mode.
inline std::function<double(const Vec2&)> macro_source(const ExperimentConfig& c) {
  const SourceTerm src = source(c);
  if (src.mode() == SourceTerm::Mode::spike) {
    auto tiling = std::make_shared<EpsilonTiling>(build_tiling(c.geometry.cell(), c.geometry.box(), c.geometry.eps.back()));
    auto fn = src.bind(*tiling);
    return [tiling, fn](const Vec2& x) { return fn(x); };
  }
  const Expression e = src.expression();
  return [e](const Vec2& x) { return e({x[0], x[1]}); };
}

inline HomogRun solve_homog(const ExperimentConfig& c, RunReport& r) {
  HomogRun out;
  const CoefficientModel model = c.coefficient_model();
  out.cm = std::make_shared<CellMesh>(c.geometry.cell(), c.geometry.m);
  out.f = macro_source(c);
  HomogenizedOptions opt;
  opt.grid = c.solver.homog_grid;
  opt.picard_tol = c.solver.picard_tol;
  opt.max_iterations = c.solver.max_iterations;
  opt.damping = c.solver.damping;
  // State range from a solve with A0(0), widened until no state is clamped.
  double lo = 0.0, hi = 0.0;
  {
    const auto frozen = constant_table(homogenized_tensor(model, 0.0, *out.cm).flux);
    const auto first = solve_homogenized(frozen, out.f, c.geometry.box(), opt);
    for (double v : first.u1.values) lo = std::min(lo, v), hi = std::max(hi, v);
  }
  for (int attempt = 0;; ++attempt) {
    const auto [tmin, tmax] = padded_range(lo, hi);
    out.table = tabulate(model, tmin, tmax, c.solver.table_samples, *out.cm, c.run.workers);
    out.sol = solve_homogenized(out.table, out.f, c.geometry.box(), opt);
    if (out.sol.clamped == 0 || attempt == 2) break;
    for (double v : out.sol.u1.values) lo = std::min(lo, v), hi = std::max(hi, v);
  }
  r.iterations.emplace_back("homogenized", out.sol.iterations);
  r.check("homogenized residual <= 1e-6", out.sol.residual <= 1e-6, detail::describe(out.sol.residual, "<=", 1e-6));
  r.check("table covers the solution range", out.sol.clamped == 0,
          "clamped quadrature points " + std::to_string(out.sol.clamped));
  r.check("table coercive", out.table.alpha0() > 0.0, "alpha0 " + fmt17(out.table.alpha0()));
  coefficient_checks(r, model, c.geometry.cell(), out.table.t_min(), out.table.t_max(), out.table.alpha0());
  if (!model.depends_on_state())
    r.check("one homogenized Picard iteration", out.sol.iterations == 1,
            "iterations " + std::to_string(out.sol.iterations));
  out.offset = c.geometry.inclusion ? offset_coefficient(c.geometry.cell(), model) : NAN;
  return out;
}

}  // namespace detail

/// Homogenized solve: tensor table, u1 and u2 on the macro grid, the limit
/// system residual and the truncation tail of u1.
inline void run_homog(const ExperimentConfig& c, RunReport& r) {
  const auto h = detail::solve_homog(c, r);
  const CoefficientModel model = c.coefficient_model();
  {
    std::ostringstream os;
    h.table.write_csv(os);
    r.tables.push_back({"homog_table", os.str()});
  }
  Table sol{"homog_solution", {"x1", "x2", "u1", "u2"}, {}};
  const FeSpace& s = *h.sol.u1.space;
  const bool with_u2 = std::isfinite(h.offset);
  const GridFunction u2 = with_u2 ? reconstruct_u2(h.sol.u1, h.f, h.offset) : h.sol.u1;
  for (int d = 0; d < s.num_dofs(); ++d) {
    const Vec2 x = s.grid().node(s.dof_node(d));
    const auto i = static_cast<std::size_t>(d);
    sol.add({x[0], x[1], h.sol.u1.values[i], with_u2 ? Table::Cell(u2.values[i]) : Table::Cell(std::string(""))});
  }
  r.add(sol);
  const auto lim = limit_system_residual(h.sol, h.table, model, *h.cm, h.f);
  Table sum{"homog_summary", {"quantity", "value"}, {}};
  sum.add({std::string("iterations"), static_cast<long long>(h.sol.iterations)});
  sum.add({std::string("residual"), h.sol.residual});
  sum.add({std::string("alpha0"), h.table.alpha0()});
  sum.add({std::string("offset"), h.offset});
  sum.add({std::string("center_u1"), *evaluate(h.sol.u1, c.geometry.box().center())});
  sum.add({std::string("limit_macro_residual"), lim.macro});
  sum.add({std::string("limit_micro_residual"), lim.micro});
  r.add(sum);
  Table tail{"homog_truncation", {"k", "tail"}, {}};
  const auto t = homogenized_truncation_tail(h.sol, h.table, c.run.truncation_levels);
  for (std::size_t i = 0; i < t.size(); ++i) tail.add({c.run.truncation_levels[i], t[i]});
  r.add(tail);
  if (t.size() >= 2)
    r.check("homogenized truncation tail decreasing in k", detail::strictly_decreasing(t), "levels " + std::to_string(t.size()));
}

/// Fine solves over the eps list against the homogenized limit: the ladder
/// report of unfolded distances, the jump relation residual and the
/// gradient errors with and without the corrector.
inline void run_sweep(const ExperimentConfig& c, RunReport& r) {
  const auto h = detail::solve_homog(c, r);
  const CoefficientModel model = c.coefficient_model();
  const SourceTerm src = detail::source(c);
  const auto opt = detail::fine_options(c);
  const bool l2 = c.model.data == DataMode::l2;
  if (!std::isfinite(h.offset)) throw GeometryError("sweep needs an inclusion");
  struct Out {
    TwoScaleRow row;
    int iterations;
    std::vector<TruncationRow> trunc;
  };
  const auto outs = parallel_map(c.geometry.eps.size(), c.run.workers, [&](std::size_t i) {
    const FineSolution fine = solve_fine(detail::eps_mesh(c, c.geometry.eps[i]), model, src, opt);
    Out o{two_scale_residuals(fine, h.sol, h.table, h.offset, h.f), fine.iterations, {}};
    o.trunc = truncation_diagnostics(fine, model, src, c.run.truncation_levels);
    return o;
  });
  Table ladder{"ladder",
               {"eps", "e1", "e2", "r_jump", "oscillation", "mean_energy", "grad_error", "grad_error_corrected"},
               {}};
  Table trunc{"sweep_truncation", {"eps", "k", "energy", "interface", "balance", "tail", "excess"}, {}};
  std::vector<double> e1, rj, osc, mean;
  Series se1{"e1", {}}, se2{"e2", {}}, srj{"r_jump", {}}, sg{"grad error", {}}, sgc{"corrected grad error", {}};
  for (const Out& o : outs) {
    const TwoScaleRow& w = o.row;
    ladder.add({w.eps, w.e1, w.e2, w.r_jump, w.oscillation, w.mean_energy, w.grad_error, w.grad_error_corrected});
    e1.push_back(w.e1);
    rj.push_back(w.r_jump);
    osc.push_back(w.oscillation);
    mean.push_back(w.mean_energy);
    se1.points.emplace_back(w.eps, w.e1);
    se2.points.emplace_back(w.eps, w.e2);
    srj.points.emplace_back(w.eps, w.r_jump);
    sg.points.emplace_back(w.eps, w.grad_error);
    sgc.points.emplace_back(w.eps, w.grad_error_corrected);
    r.iterations.emplace_back("fine eps=" + fmt17(w.eps), o.iterations);
    std::vector<double> tail;
    for (const TruncationRow& t : o.trunc) {
      trunc.add({w.eps, t.k, t.energy, t.interface, t.balance, t.tail, t.excess});
      tail.push_back(t.tail);
    }
    if (tail.size() >= 2)
      r.check("truncation tail decreasing in k at eps=" + fmt17(w.eps), detail::strictly_decreasing(tail),
              "levels " + std::to_string(tail.size()));
  }
  if (l2) {
    detail::ladder_checks(r, "e1", e1);
    detail::ladder_checks(r, "r_jump", rj);
    if (e1.size() >= 2) {
      r.check("oscillation energy decreasing", detail::strictly_decreasing(osc), "");
      r.check("mean gradient energy decreasing", detail::strictly_decreasing(mean), "");
    }
    const TwoScaleRow& last = outs.back().row;
    r.check("corrector improves the gradient at the finest eps", last.grad_error_corrected < last.grad_error,
            detail::describe(last.grad_error_corrected, "<", last.grad_error));
  }
  r.add(ladder);
  r.add(trunc);
  r.plots.push_back({"ladder", {"Homogenization ladder", "eps", "error", true, true}, {se1, se2, srj, sg, sgc}});
}

/// Runs one subcommand. Exceptions propagate; the caller maps them to exit
/// codes.
inline RunReport run(const std::string& subcommand, const ExperimentConfig& c, std::string_view config_text) {
  RunReport r;
  r.subcommand = subcommand;
  r.config_hash = fnv1a64(config_text);
  r.seed = c.run.seed;
  r.workers = c.run.workers;
  detail::Stopwatch sw;
  if (subcommand == "unfold-check")
    run_unfold_check(c, r);
  else if (subcommand == "extbench")
    run_extbench(c, r);
  else if (subcommand == "cell")
    run_cell(c, r);
  else if (subcommand == "fine")
    run_fine(c, r);
  else if (subcommand == "homog")
    run_homog(c, r);
  else if (subcommand == "sweep")
    run_sweep(c, r);
  else
    throw std::invalid_argument("unknown subcommand '" + subcommand + "'");
  r.timings.emplace_back("total", sw.seconds());
  return r;
}

inline nlohmann::ordered_json summary_json(const RunReport& r) {
  nlohmann::ordered_json j;
  j["subcommand"] = r.subcommand;
  j["passed"] = r.passed();
  j["provenance"] = {{"config_hash", r.config_hash}, {"code_version", r.code_version}, {"seed", r.seed},
                     {"workers", r.workers}};
  auto& checks = j["checks"] = nlohmann::ordered_json::array();
  for (const Check& c : r.checks) checks.push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
  auto& it = j["iterations"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : r.iterations) it[k] = v;
  auto& tm = j["timings_seconds"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : r.timings) tm[k] = v;
  auto& art = j["tables"] = nlohmann::ordered_json::array();
  for (const Artifact& a : r.tables) art.push_back(a.name + ".csv");
  return j;
}

/// Writes the enabled artifact formats into `dir`, creating it if needed.
inline void write_report(const RunReport& r, const std::filesystem::path& dir, const OutputConfig& out) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  auto put = [&](const std::string& name, const std::string& text) {
    const auto path = dir / name;
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open " + path.string() + " for writing");
    os << text;
    os.flush();
    if (!os) throw IoError("write failed for " + path.string());
  };
  if (out.csv)
    for (const Artifact& a : r.tables) put(a.name + ".csv", a.text);
  if (out.svg)
    for (const Plot& p : r.plots) put(p.name + ".svg", svg_plot(p.spec, p.series));
  if (out.json) put("summary.json", summary_json(r).dump(2) + "\n");
}

}  // namespace twoscale
