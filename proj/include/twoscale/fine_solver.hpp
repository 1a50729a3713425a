#pragma once

// The eps-level two-component problem
//   sum_i int_{Omega_i} A(x/eps, u_i) grad u_i . grad v_i
//     + eps^gamma int_Gamma h(x/eps) (u1 - u2)(v1 - v2) = sum_i int_{Omega_i} f v_i,
// u1 = 0 on the outer boundary, solved by frozen-coefficient (Picard)
// iteration.

#include <cmath>
#include <cstdio>
#include <functional>
#include <memory>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "twoscale/assembly.hpp"
#include "twoscale/coefficient.hpp"

namespace twoscale {

class FineSolverError : public SolverError {
 public:
  explicit FineSolverError(const std::string& msg, std::vector<double> trace = {}) : SolverError(msg, std::move(trace)) {}
};

/// Right-hand side f: an expression in x1, x2 (L2 mode) or a unit-mass
/// spike spread uniformly over the eps-cell containing a point (L1 mode).
class SourceTerm {
 public:
  enum class Mode { l2, spike };

  SourceTerm() : SourceTerm(Expression::constant(0.0, {"x1", "x2"})) {}
  explicit SourceTerm(Expression f) : mode_(Mode::l2), f_(std::move(f)) {}
  static SourceTerm expression(std::string_view text) { return SourceTerm(Expression::parse(text, {"x1", "x2"})); }
  static SourceTerm spike(const Vec2& at, double mass = 1.0) {
    SourceTerm s;
    s.mode_ = Mode::spike;
    s.at_ = at;
    s.mass_ = mass;
    return s;
  }

  Mode mode() const { return mode_; }
  const Expression& expression() const { return f_; }
  const Vec2& spike_point() const { return at_; }
  double spike_mass() const { return mass_; }
  bool is_zero() const { return mode_ == Mode::l2 ? (f_.is_constant() && f_({0.0, 0.0}) == 0.0) : mass_ == 0.0; }

  /// f as a callable on the given tiling. For spikes the support is the
  /// closed-open box of the cell containing the spike point.
  std::function<double(const Vec2&)> bind(const EpsilonTiling& tiling) const {
    if (mode_ == Mode::l2) return [f = f_](const Vec2& x) { return f({x[0], x[1]}); };
    const auto loc = tiling.locate(at_);
    if (!loc) throw GeometryError("spike point is not inside a paved cell");
    const Box b = tiling.cell_box(loc->k);
    const double height = mass_ / b.measure();
    return [b, height](const Vec2& x) {
      return x[0] >= b.lo[0] && x[0] < b.hi[0] && x[1] >= b.lo[1] && x[1] < b.hi[1] ? height : 0.0;
    };
  }

 private:
  Mode mode_;
  Expression f_;
  Vec2 at_{0.5, 0.5};
  double mass_ = 1.0;
};

struct FineOptions {
  double gamma = 1.0;
  double picard_tol = 1e-8;
  int max_iterations = 50;
  bool damping = true;    // relax by 0.5 after 10 non-decreasing updates
  double cg_tol = 1e-12;
};

struct EnergySplit {
  double matrix = 0.0;     // int_{Omega_1} A grad u1 . grad u1
  double inclusion = 0.0;  // int_{Omega_2} A grad u2 . grad u2
  double interface = 0.0;  // eps^gamma int_Gamma h (u1 - u2)^2
  double load = 0.0;       // int f u1 + int f u2
};

struct FineSolution {
  double eps = 0.0;
  double gamma = 1.0;
  std::shared_ptr<const EpsMesh> mesh;
  GridFunction u1;
  GridFunction u2;
  std::vector<double> trace;  // relative Picard update per iteration
  int iterations = 0;
  bool damped = false;
  EnergySplit energies;
};

namespace detail {

/// Inclusions whose interface carries no positive h mass decouple into a
/// pure Neumann block.
inline void check_interface_coupling(const EpsMesh& mesh, const std::function<double(const Vec2&)>& h) {
  const auto& incl = mesh.tiling().inclusion_cells();
  std::vector<double> mass(incl.size(), 0.0);
  std::vector<bool> present(incl.size(), false);
  for (const InterfaceEdge& e : mesh.interface_edges()) {
    const int c = mesh.inclusion_of_element(e.inclusion_element);
    if (c < 0) continue;
    present[static_cast<std::size_t>(c)] = true;
    for (const EdgePoint& p : edge_rule(e.xa, e.xb)) mass[static_cast<std::size_t>(c)] += p.weight * std::abs(h(p.x));
  }
  for (std::size_t c = 0; c < incl.size(); ++c)
    if (present[c] && !(mass[c] > 0.0))
      throw FineSolverError("interface coefficient vanishes on inclusion (" + std::to_string(incl[c][0]) + ", " +
                            std::to_string(incl[c][1]) + "): the inclusion block is singular (constant mode)");
}

}  // namespace detail

inline EnergySplit energy_split(const FineSolution& s, const CoefficientModel& model,
                                const std::function<double(const Vec2&)>& f) {
  const double eps = s.eps;
  auto A = [&](const Vec2& x, double t) { return model.A({x[0] / eps, x[1] / eps}, t); };
  auto h = [&](const Vec2& x) { return model.h({x[0] / eps, x[1] / eps}); };
  EnergySplit e;
  e.matrix = energy(s.u1, A, s.u1.values);
  e.inclusion = energy(s.u2, A, s.u2.values);
  e.interface = std::pow(eps, s.gamma) * jump_norm_sq(s.u1, s.u2, s.mesh->interface_edges(), h);
  const auto b1 = assemble_load(*s.u1.space, f), b2 = assemble_load(*s.u2.space, f);
  e.load = dot(b1, s.u1.values) + dot(b2, s.u2.values);
  return e;
}

inline FineSolution solve_fine(const std::shared_ptr<const EpsMesh>& mesh, const CoefficientModel& model,
                               const SourceTerm& source, const FineOptions& opt = {}) {
  const double eps = mesh->eps();
  const auto& s1 = mesh->space(Component::matrix);
  const auto& s2 = mesh->space(Component::inclusion);
  const int n1 = s1->num_dofs(), n2 = s2->num_dofs(), n = n1 + n2;
  const auto f = source.bind(mesh->tiling());
  auto A = [&](const Vec2& x, double t) { return model.A({x[0] / eps, x[1] / eps}, t); };
  std::function<double(const Vec2&)> h = [&](const Vec2& x) { return model.h({x[0] / eps, x[1] / eps}); };
  if (n2 > 0) detail::check_interface_coupling(*mesh, h);

  std::vector<double> rhs(static_cast<std::size_t>(n), 0.0);
  {
    const auto b1 = assemble_load(*s1, f), b2 = assemble_load(*s2, f);
    std::copy(b1.begin(), b1.end(), rhs.begin());
    std::copy(b2.begin(), b2.end(), rhs.begin() + n1);
  }
  std::vector<bool> pinned(static_cast<std::size_t>(n), false);
  for (int d = 0; d < n1; ++d)
    if (s1->grid().on_boundary(s1->dof_node(d))) pinned[static_cast<std::size_t>(d)] = true;

  // Interface block does not depend on the state.
  TripletList coupling(n, n);
  if (n2 > 0) add_interface_coupling(coupling, mesh->interface_edges(), *s1, *s2, n1, h, std::pow(eps, opt.gamma));
  const CsrMatrix C = coupling.compress();

  auto solve_frozen = [&](const std::vector<double>& state, const std::vector<double>* guess) {
    TripletList t(n, n);
    const std::span<const double> st1 = state.empty() ? std::span<const double>() : std::span<const double>(state).first(static_cast<std::size_t>(n1));
    const std::span<const double> st2 = state.empty() ? std::span<const double>() : std::span<const double>(state).subspan(static_cast<std::size_t>(n1));
    add_stiffness(t, *s1, A, st1, 0);
    add_stiffness(t, *s2, A, st2, n1);
    const CsrMatrix K = add(t.compress(), C);
    const ConstrainedSystem sys(K, rhs, pinned);
    std::optional<std::span<const double>> g;
    std::vector<double> gfree;
    if (guess) {
      gfree = sys.restrict_to_free(*guess);
      g = std::span<const double>(gfree);
    }
    try {
      return sys.expand(solve_spd(sys.matrix(), sys.rhs(), CgOptions{opt.cg_tol, 50000, false}, g).x);
    } catch (const SolverError& ex) {
      throw FineSolverError(std::string("linear solve failed: ") + ex.what());
    }
  };

  FineSolution sol;
  sol.eps = eps;
  sol.gamma = opt.gamma;
  sol.mesh = mesh;
  std::vector<double> u = solve_frozen({}, nullptr);
  if (!model.depends_on_state()) {
    sol.iterations = 1;
    sol.trace.push_back(0.0);
  } else {
    int stagnant = 0;
    double last = INFINITY;
    bool converged = false;
    for (int it = 1; it <= opt.max_iterations; ++it) {
      std::vector<double> next = solve_frozen(u, &u);
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
      throw FineSolverError("Picard iteration did not converge in " + std::to_string(opt.max_iterations) +
                                " iterations (last update " + std::to_string(sol.trace.back()) + ")",
                            sol.trace);
  }
  sol.u1 = GridFunction(s1, std::vector<double>(u.begin(), u.begin() + n1));
  sol.u2 = GridFunction(s2, std::vector<double>(u.begin() + n1, u.end()));
  sol.energies = energy_split(sol, model, f);
  return sol;
}

/// Squared H1_eps norm: |grad u1|^2 + |grad u2|^2 + eps |u1 - u2|^2_{L2(Gamma)}.
inline double h1eps_norm_sq(const FineSolution& s) {
  return gradient_norm_sq(s.u1) + gradient_norm_sq(s.u2) +
         s.eps * jump_norm_sq(s.u1, s.u2, s.mesh->interface_edges());
}
inline double h1eps_norm(const FineSolution& s) { return std::sqrt(h1eps_norm_sq(s)); }

// ---- truncation -------------------------------------------------------------

inline double truncate(double v, double k) { return std::max(-k, std::min(k, v)); }

inline GridFunction truncate(const GridFunction& u, double k) {
  GridFunction t = u;
  for (auto& v : t.values) v = truncate(v, k);
  return t;
}

struct TruncationRow {
  double k = 0.0;
  double energy = 0.0;     // sum_i int A grad T_k(u_i) . grad T_k(u_i)
  double interface = 0.0;  // eps^gamma int h (u1 - u2)(T_k u1 - T_k u2)
  double balance = 0.0;    // |energy + interface - int f T_k(u)|, reported only
  double tail = 0.0;       // (1/k) int_{|u| < k} A grad u . grad u
  double excess = 0.0;     // int_{|u| >= k} A grad u . grad u
};

/// Truncation diagnostics for each k. Coefficients are frozen at the
/// converged state; the tail indicator is evaluated at quadrature points.
inline std::vector<TruncationRow> truncation_diagnostics(const FineSolution& s, const CoefficientModel& model,
                                                         const SourceTerm& source, const std::vector<double>& ks) {
  const double eps = s.eps;
  auto A = [&](const Vec2& x, double t) { return model.A({x[0] / eps, x[1] / eps}, t); };
  auto h = [&](const Vec2& x) { return model.h({x[0] / eps, x[1] / eps}); };
  const auto f = source.bind(s.mesh->tiling());
  const auto b1 = assemble_load(*s.u1.space, f), b2 = assemble_load(*s.u2.space, f);
  std::vector<TruncationRow> rows;
  for (double k : ks) {
    if (!(k > 0.0)) throw std::invalid_argument("truncation level must be positive");
    TruncationRow r;
    r.k = k;
    const GridFunction t1 = truncate(s.u1, k), t2 = truncate(s.u2, k);
    r.energy = energy(t1, A, s.u1.values) + energy(t2, A, s.u2.values);
    double cross = 0.0;
    for (const InterfaceEdge& e : s.mesh->interface_edges()) {
      const double ja = s.u1.at_node(e.node_a) - s.u2.at_node(e.node_a);
      const double jb = s.u1.at_node(e.node_b) - s.u2.at_node(e.node_b);
      const double ta = t1.at_node(e.node_a) - t2.at_node(e.node_a);
      const double tb = t1.at_node(e.node_b) - t2.at_node(e.node_b);
      for (const EdgePoint& p : edge_rule(e.xa, e.xb))
        cross += p.weight * h(p.x) * (p.Na * ja + p.Nb * jb) * (p.Na * ta + p.Nb * tb);
    }
    r.interface = std::pow(eps, s.gamma) * cross;
    r.balance = std::abs(r.energy + r.interface - dot(b1, t1.values) - dot(b2, t2.values));
    double tail = 0.0, excess = 0.0;
    for (const GridFunction* u : {&s.u1, &s.u2}) {
      const FeSpace& sp = *u->space;
      for (int e : sp.active_elements()) {
        const auto v = element_values(sp, u->values, e);
        for (const Q1Point& q : q1_rule(sp.grid().element_box(e))) {
          const double val = q1_value(q, v);
          const Vec2 g = q1_gradient(q, v);
          const double w = q.weight * A(q.x, val).form(g, g);
          (std::abs(val) < k ? tail : excess) += w;
        }
      }
    }
    r.tail = tail / k;
    r.excess = excess;
    rows.push_back(r);
  }
  return rows;
}

/// Least-squares slope of energy(k) against k.
inline double truncation_slope(const std::vector<TruncationRow>& rows) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(rows.size());
  for (const TruncationRow& r : rows) {
    sx += r.k;
    sy += r.energy;
    sxx += r.k * r.k;
    sxy += r.k * r.energy;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

// ---- snapshots --------------------------------------------------------------

/// Node coordinates, component and value for both components.
inline void write_snapshot_csv(std::ostream& os, const FineSolution& s) {
  os << "x1,x2,component,value\n";
  char buf[128];
  for (const GridFunction* u : {&s.u1, &s.u2}) {
    const int comp = u == &s.u1 ? 1 : 2;
    for (int d = 0; d < u->space->num_dofs(); ++d) {
      const Vec2 x = u->space->grid().node(u->space->dof_node(d));
      std::snprintf(buf, sizeof buf, "%.17g,%.17g,%d,%.17g\n", x[0], x[1], comp, u->values[static_cast<std::size_t>(d)]);
      os << buf;
    }
  }
}

}  // namespace twoscale
