#pragma once

// Homogenized problem -div(A0(u1) grad u1) = f with u1 = 0 on the boundary,
// the reconstruction u2 = u1 + |Y2| / (|Gamma| M_Gamma(h)) f, and the
// two-scale discrepancies between a fine solution and the limit.

#include <cmath>
#include <functional>
#include <memory>
#include <vector>

#include "twoscale/cell_problem.hpp"
#include "twoscale/fine_solver.hpp"
#include "twoscale/unfolding.hpp"

namespace twoscale {

struct HomogenizedOptions {
  int grid = 256;  // elements per side of the macro mesh
  double picard_tol = 1e-8;
  int max_iterations = 50;
  bool damping = true;
  double cg_tol = 1e-10;
};

struct HomogenizedSolution {
  GridFunction u1;
  std::vector<double> trace;
  int iterations = 0;
  bool damped = false;
  int clamped = 0;        // quadrature points whose state fell outside the table in the last solve
  double residual = 0.0;  // |K(u1) u1 - b| / |b| on free dofs, 0 when b = 0
};

/// Space of Q1 functions on a uniform n x n grid of `domain`.
inline std::shared_ptr<const FeSpace> macro_space(const Box& domain, int n) {
  auto pg = std::make_shared<PhaseGrid>();
  pg->grid = TensorGrid::uniform(domain, n, n);
  pg->phase.assign(static_cast<std::size_t>(n) * static_cast<std::size_t>(n), Phase::matrix);
  return std::make_shared<FeSpace>(pg, Component::whole);
}

/// A table whose entries coincide needs a single solve.
inline bool state_independent(const HomogenizedTensorTable& table) {
  for (const auto& e : table.entries())
    if (!(e.A0 == table.entries().front().A0)) return false;
  return true;
}

/// A constant tensor as a one-entry table (no correctors attached).
inline HomogenizedTensorTable constant_table(const Mat2& A0) {
  HomogenizedTensorTable::Entry e;
  e.A0 = A0;
  e.min_eigenvalue = A0.min_sym_eigenvalue();
  return HomogenizedTensorTable({e});
}

inline HomogenizedSolution solve_homogenized(const HomogenizedTensorTable& table,
                                             const std::function<double(const Vec2&)>& f, const Box& domain,
                                             const HomogenizedOptions& opt = {}) {
  if (!(table.alpha0() > 0.0)) throw CellProblemError("homogenized tensor table is not coercive");
  const auto space = macro_space(domain, opt.grid);
  const int n = space->num_dofs();
  const auto b = assemble_load(*space, f);
  std::vector<bool> pinned(static_cast<std::size_t>(n), false);
  for (int d = 0; d < n; ++d)
    if (space->grid().on_boundary(space->dof_node(d))) pinned[static_cast<std::size_t>(d)] = true;

  HomogenizedSolution sol;
  auto solve_frozen = [&](const std::vector<double>& state) {
    int clamped = 0;
    auto field = [&](const Vec2&, double t) {
      bool c = false;
      const Mat2 A = table.at(t, &c);
      clamped += c ? 1 : 0;
      return A;
    };
    const CsrMatrix K = assemble_stiffness(*space, field, state);
    sol.clamped = clamped;
    const ConstrainedSystem sys(K, b, pinned);
    std::optional<std::span<const double>> guess;
    std::vector<double> g;
    if (!state.empty()) {
      g = sys.restrict_to_free(state);
      guess = std::span<const double>(g);
    }
    try {
      return sys.expand(solve_spd(sys.matrix(), sys.rhs(), CgOptions{opt.cg_tol, 50000, false}, guess).x);
    } catch (const SolverError& ex) {
      throw FineSolverError(std::string("homogenized solve failed: ") + ex.what());
    }
  };

  std::vector<double> u = solve_frozen({});
  if (state_independent(table)) {
    sol.iterations = 1;
    sol.trace.push_back(0.0);
  } else {
    int stagnant = 0;
    double last = INFINITY;
    bool converged = false;
    for (int it = 1; it <= opt.max_iterations; ++it) {
      std::vector<double> next = solve_frozen(u);
      if (sol.damped)
        for (std::size_t i = 0; i < next.size(); ++i) next[i] = 0.5 * next[i] + 0.5 * u[i];
      double du = 0.0;
      for (std::size_t i = 0; i < next.size(); ++i) du += (next[i] - u[i]) * (next[i] - u[i]);
      const double update = std::sqrt(du) / std::max(norm2(u), 1.0);
      sol.trace.push_back(update);
      sol.iterations = it;
      u = std::move(next);
      if (update <= opt.picard_tol) {
        converged = true;
        break;
      }
      stagnant = update >= last ? stagnant + 1 : 0;
      last = update;
      if (opt.damping && stagnant >= 10) sol.damped = true;
    }
    if (!converged)
      throw FineSolverError("homogenized Picard iteration did not converge in " + std::to_string(opt.max_iterations) +
                                " iterations",
                            sol.trace);
  }
  {
    const CsrMatrix K = assemble_stiffness(*space, [&](const Vec2&, double t) { return table.at(t); }, u);
    const ConstrainedSystem sys(K, b, pinned);
    const auto uf = sys.restrict_to_free(u);
    auto r = sys.matrix() * std::span<const double>(uf);
    for (std::size_t i = 0; i < r.size(); ++i) r[i] -= sys.rhs()[i];
    const double bn = norm2(sys.rhs());
    sol.residual = bn > 0.0 ? norm2(r) / bn : norm2(r);
  }
  sol.u1 = GridFunction(space, std::move(u));
  return sol;
}

/// |Y2| / (|Gamma| M_Gamma(h)), the coefficient of f in the u2 relation.
inline double offset_coefficient(const ReferenceCell& cell, const CoefficientModel& model, int m = 64) {
  if (!cell.has_inclusion()) throw GeometryError("the u2 relation needs an inclusion");
  const CellMesh cm(cell, m);
  const double Mh = interface_mean(cm.interface_edges(), [&](const Vec2& y) { return model.h(y); });
  if (!(Mh > 0.0)) throw CellProblemError("interface mean of h is not positive");
  const CellMeasures mu = cell_measures(cell);
  return mu.inclusion / (mu.interface * Mh);
}

inline GridFunction reconstruct_u2(const GridFunction& u1, const std::function<double(const Vec2&)>& f, double coefficient) {
  GridFunction u2 = u1;
  for (int d = 0; d < u2.space->num_dofs(); ++d)
    u2.values[static_cast<std::size_t>(d)] += coefficient * f(u2.space->grid().node(u2.space->dof_node(d)));
  return u2;
}

/// Q1 interpolant as a callable; points outside the mesh throw.
inline std::function<double(const Vec2&)> as_function(const GridFunction& u) {
  return [&u](const Vec2& x) {
    const auto v = evaluate(u, x);
    if (!v) throw GeometryError("point outside the macro mesh");
    return *v;
  };
}

struct TwoScaleRow {
  double eps = 0.0;
  double e1 = 0.0;                  // ||T1(u1_eps) - u1||  on Omega x Y1
  double e2 = 0.0;                  // ||T2(u2_eps) - u2||  on Omega x Y2
  double r_jump = 0.0;              // per-cell inclusion mean of u2_eps against the cell mean of u2
  double oscillation = 0.0;         // int |T2(grad u2_eps) - cell mean|^2
  double mean_energy = 0.0;         // int |cell mean of T2(grad u2_eps)|^2
  double grad_error = 0.0;          // ||T1(grad u1_eps) - grad u1||
  double grad_error_corrected = 0.0;  // ||T1(grad u1_eps) - (grad u1 + grad_y u1hat)||
};

/// Discrepancies between a fine solution and the homogenized limit. The
/// table must carry correctors computed on the fine mesh's cell mesh.
inline TwoScaleRow two_scale_residuals(const FineSolution& fine, const HomogenizedSolution& hom,
                                       const HomogenizedTensorTable& table, double coefficient,
                                       const std::function<double(const Vec2&)>& f) {
  const EpsMesh& mesh = *fine.mesh;
  const CellMesh& cm = mesh.cell_mesh();
  const double eps = mesh.eps();
  const double Y = cell_measures(cm.cell()).cell;
  const auto& cells = mesh.tiling().full_cells();
  const auto u1 = as_function(hom.u1);
  const std::function<double(const Vec2&)> u2 = [&](const Vec2& x) { return u1(x) + coefficient * f(x); };

  TwoScaleRow row;
  row.eps = eps;
  row.e1 = std::sqrt(unfolded_distance_sq(unfold(fine.u1, fine.mesh, MicroDomain::matrix), u1));
  row.e2 = std::sqrt(unfolded_distance_sq(unfold(fine.u2, fine.mesh, MicroDomain::inclusion), u2));

  // Macro moments per cell: mean of u1, int p, int p p^T with p = grad u1.
  struct Moments {
    double vol = 0.0, u = 0.0;
    Vec2 p{0.0, 0.0};
    double pp[2][2] = {{0.0, 0.0}, {0.0, 0.0}};
  };
  std::vector<Moments> mom(cells.size());
  {
    const FeSpace& s = *hom.u1.space;
    const TensorGrid& g = s.grid();
    for (int e = 0; e < g.num_elements(); ++e) {
      const auto loc = mesh.tiling().locate(g.element_box(e).center());
      if (!loc) continue;
      const int c = mesh.tiling().full_cell_index(loc->k);
      if (c < 0) continue;
      Moments& M = mom[static_cast<std::size_t>(c)];
      const auto v = element_values(s, hom.u1.values, e);
      for (const Q1Point& q : q1_rule(g.element_box(e))) {
        const Vec2 p = q1_gradient(q, v);
        M.vol += q.weight;
        M.u += q.weight * q1_value(q, v);
        for (int i = 0; i < 2; ++i) {
          M.p[static_cast<std::size_t>(i)] += q.weight * p[static_cast<std::size_t>(i)];
          for (int j = 0; j < 2; ++j) M.pp[i][j] += q.weight * p[static_cast<std::size_t>(i)] * p[static_cast<std::size_t>(j)];
        }
      }
    }
  }

  const TensorGrid& G = mesh.grid();
  const FeSpace& pms = *cm.periodic_matrix_space();
  const auto micro_matrix = pms.active_elements();
  double rj = 0.0, osc = 0.0, mean_e = 0.0, gplain = 0.0, gcorr = 0.0;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    const Index2& k = cells[c];
    // Jump relation: inclusion mean of u2_eps against the cell mean of u2.
    const auto incl = cell_elements(mesh, k, Component::inclusion);
    const double m2 = mean_value(fine.u2, incl);
    double g_int = 0.0, g_vol = 0.0;
    for (int e : cell_elements(mesh, k, Component::whole))
      for (const Q1Point& q : q1_rule(G.element_box(e))) {
        g_int += q.weight * u2(q.x);
        g_vol += q.weight;
      }
    const double cell_vol = eps * eps * Y;
    rj += cell_vol * std::pow(m2 - g_int / g_vol, 2);

    // Oscillation and mean energy of grad u2_eps on the cell's inclusion.
    Vec2 gm{0.0, 0.0};
    double vol2 = 0.0, g2 = 0.0;
    for (int e : incl) {
      const auto v = element_values(*fine.u2.space, fine.u2.values, e);
      for (const Q1Point& q : q1_rule(G.element_box(e))) {
        const Vec2 gr = q1_gradient(q, v);
        gm[0] += q.weight * gr[0];
        gm[1] += q.weight * gr[1];
        g2 += q.weight * (gr[0] * gr[0] + gr[1] * gr[1]);
        vol2 += q.weight;
      }
    }
    const double mean_sq = (gm[0] * gm[0] + gm[1] * gm[1]) / (vol2 * vol2);
    osc += Y * (g2 - vol2 * mean_sq);
    mean_e += Y * vol2 * mean_sq;

    // Gradient errors on Omega x Y1 through the moment expansion of
    // int_{eps Y^k} dx int_{Y1} dy |G(y) - M(y) p(x)|^2.
    const Moments& M = mom[c];
    const double t = M.vol > 0.0 ? M.u / M.vol : 0.0;
    const auto chi0 = table.chi_at(0, t), chi1 = table.chi_at(1, t);
    double GG = 0.0, cross_plain = 0.0, cross_corr = 0.0, quad_corr = 0.0, y1vol = 0.0;
    for (int me : micro_matrix) {
      const int ge = mesh.global_element_of_micro(k, me);
      const auto fv = element_values(*fine.u1.space, fine.u1.values, ge);
      const auto x0 = element_values(pms, chi0, me), x1 = element_values(pms, chi1, me);
      const auto gq = q1_rule(G.element_box(ge));
      const auto yq = q1_rule(cm.grid().element_box(me));
      for (std::size_t i = 0; i < 4; ++i) {
        const Vec2 Gv = q1_gradient(gq[i], fv);
        const Vec2 d0 = q1_gradient(yq[i], x0), d1 = q1_gradient(yq[i], x1);
        // Columns of M: e_j - grad chi^j.
        const double Mm[2][2] = {{1.0 - d0[0], -d1[0]}, {-d0[1], 1.0 - d1[1]}};
        const double wy = yq[i].weight;
        GG += wy * (Gv[0] * Gv[0] + Gv[1] * Gv[1]);
        y1vol += wy;
        cross_plain += wy * (Gv[0] * M.p[0] + Gv[1] * M.p[1]);
        for (int a = 0; a < 2; ++a)
          for (int b = 0; b < 2; ++b) {
            cross_corr += wy * Gv[static_cast<std::size_t>(a)] * Mm[a][b] * M.p[static_cast<std::size_t>(b)];
            double mtm = 0.0;
            for (int r = 0; r < 2; ++r) mtm += Mm[r][a] * Mm[r][b];
            quad_corr += wy * mtm * M.pp[a][b];
          }
      }
    }
    const double trace_pp = M.pp[0][0] + M.pp[1][1];
    gplain += cell_vol * GG - 2.0 * cross_plain + y1vol * trace_pp;
    gcorr += cell_vol * GG - 2.0 * cross_corr + quad_corr;
  }
  row.r_jump = std::sqrt(rj);
  row.oscillation = osc;
  row.mean_energy = mean_e;
  row.grad_error = std::sqrt(std::max(gplain, 0.0));
  row.grad_error_corrected = std::sqrt(std::max(gcorr, 0.0));
  return row;
}

struct LimitResidual {
  double macro = 0.0;  // max over hat tests of |int A0(u1) grad u1 . grad phi - int f phi| / max(|int f phi|, 1e-300)
  double micro = 0.0;  // max over periodic tests of |(1/|Y|) int int A (grad u1 + grad_y u1hat) . grad_y Phi| / scale
};

/// Residuals of the unfolded limit system for (u1, u1hat) against hats of
/// a coarse `tests` x `tests` grid and the periodic modes cos(2 pi y1),
/// sin(2 pi y2), cos(2 pi (y1 + y2)) weighted by sin(pi x1) sin(pi x2).
/// The micro integrals use block centers of a `blocks` x `blocks` partition.
inline LimitResidual limit_system_residual(const HomogenizedSolution& hom, const HomogenizedTensorTable& table,
                                           const CoefficientModel& model, const CellMesh& cm,
                                           const std::function<double(const Vec2&)>& f, int tests = 4,
                                           int blocks = 16) {
  LimitResidual out;
  const FeSpace& s = *hom.u1.space;
  const TensorGrid& g = s.grid();
  const Box dom = g.bounding_box();
  // Macro part.
  for (int ti = 1; ti < tests; ++ti)
    for (int tj = 1; tj < tests; ++tj) {
      const double cx = dom.lo[0] + dom.extent(0) * ti / tests, cy = dom.lo[1] + dom.extent(1) * tj / tests;
      const double hx = dom.extent(0) / tests, hy = dom.extent(1) / tests;
      double lhs = 0.0, rhs = 0.0;
      for (int e = 0; e < g.num_elements(); ++e) {
        const Box b = g.element_box(e);
        const Vec2 c = b.center();
        if (std::abs(c[0] - cx) >= hx || std::abs(c[1] - cy) >= hy) continue;
        const auto v = element_values(s, hom.u1.values, e);
        for (const Q1Point& q : q1_rule(b)) {
          const double px = 1.0 - std::abs(q.x[0] - cx) / hx, py = 1.0 - std::abs(q.x[1] - cy) / hy;
          const Vec2 dphi{(q.x[0] < cx ? 1.0 : -1.0) / hx * py, (q.x[1] < cy ? 1.0 : -1.0) / hy * px};
          const double t = q1_value(q, v);
          lhs += q.weight * table.at(t).form(q1_gradient(q, v), dphi);
          rhs += q.weight * f(q.x) * px * py;
        }
      }
      out.macro = std::max(out.macro, std::abs(lhs - rhs) / std::max(std::abs(rhs), 1e-300));
    }
  // Micro part.
  const FeSpace& pms = *cm.periodic_matrix_space();
  const double Y = cell_measures(cm.cell()).cell;
  const std::function<Vec2(const Vec2&)> modes[3] = {
      [](const Vec2& y) { return Vec2{-2 * M_PI * std::sin(2 * M_PI * y[0]), 0.0}; },
      [](const Vec2& y) { return Vec2{0.0, 2 * M_PI * std::cos(2 * M_PI * y[1])}; },
      [](const Vec2& y) {
        const double d = -2 * M_PI * std::sin(2 * M_PI * (y[0] + y[1]));
        return Vec2{d, d};
      }};
  for (const auto& mode : modes) {
    double res = 0.0, scale = 0.0;
    for (int bi = 0; bi < blocks; ++bi)
      for (int bj = 0; bj < blocks; ++bj) {
        const Vec2 x{dom.lo[0] + dom.extent(0) * (bi + 0.5) / blocks, dom.lo[1] + dom.extent(1) * (bj + 0.5) / blocks};
        const double wx = dom.measure() / (blocks * blocks);
        const int e = g.find_element(x);
        const auto v = element_values(s, hom.u1.values, e);
        const Box b = g.element_box(e);
        const Q1Point q = q1_point(b, (x[0] - b.lo[0]) / b.extent(0), (x[1] - b.lo[1]) / b.extent(1), 1.0);
        const double t = q1_value(q, v);
        const Vec2 p = q1_gradient(q, v);
        const double psi = std::sin(M_PI * x[0]) * std::sin(M_PI * x[1]);
        const auto c0 = table.chi_at(0, t), c1 = table.chi_at(1, t);
        double inner = 0.0, mag = 0.0;
        for (int me : pms.active_elements()) {
          const auto x0 = element_values(pms, c0, me), x1 = element_values(pms, c1, me);
          for (const Q1Point& yq : q1_rule(cm.grid().element_box(me))) {
            const Vec2 d0 = q1_gradient(yq, x0), d1 = q1_gradient(yq, x1);
            const Vec2 grad{p[0] - d0[0] * p[0] - d1[0] * p[1], p[1] - d0[1] * p[0] - d1[1] * p[1]};
            const Vec2 dPhi = mode(yq.x);
            const Vec2 Ag = model.A(yq.x, t).apply(grad);
            inner += yq.weight * (Ag[0] * dPhi[0] + Ag[1] * dPhi[1]);
            mag += yq.weight * std::hypot(Ag[0], Ag[1]) * std::hypot(dPhi[0], dPhi[1]);
          }
        }
        res += wx * psi * inner / Y;
        scale += wx * std::abs(psi) * mag / Y;
      }
    out.micro = std::max(out.micro, std::abs(res) / std::max(scale, 1e-300));
  }
  return out;
}

/// (1/k) int_{|u1| < k} A0(u1) grad u1 . grad u1 for each k.
inline std::vector<double> homogenized_truncation_tail(const HomogenizedSolution& hom, const HomogenizedTensorTable& table,
                                                       const std::vector<double>& ks) {
  const FeSpace& s = *hom.u1.space;
  std::vector<double> out;
  for (double k : ks) {
    double sum = 0.0;
    for (int e : s.active_elements()) {
      const auto v = element_values(s, hom.u1.values, e);
      for (const Q1Point& q : q1_rule(s.grid().element_box(e))) {
        const double t = q1_value(q, v);
        if (std::abs(t) >= k) continue;
        const Vec2 gr = q1_gradient(q, v);
        sum += q.weight * table.at(t).form(gr, gr);
      }
    }
    out.push_back(sum / k);
  }
  return out;
}

}  // namespace twoscale
