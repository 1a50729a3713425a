#pragma once

// Periodic cell problem on the perforated cell, the homogenized tensor and
// its tabulation in the state variable, and the first-order corrector.

#include <array>
#include <cmath>
#include <cstdio>
#include <memory>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "twoscale/assembly.hpp"
#include "twoscale/coefficient.hpp"
#include "twoscale/parallel.hpp"

namespace twoscale {

class CellProblemError : public std::runtime_error {
 public:
  explicit CellProblemError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Which mean of chi is fixed to zero.
enum class CellMean { interface, volume };

struct CellSolution {
  double t = 0.0;
  Vec2 lambda{0.0, 0.0};
  GridFunction chi;          // on the periodic Y1 space
  double energy = 0.0;       // int_{Y1} A grad chi . grad chi
  double residual = 0.0;     // max |K chi - b| / max(|b|, 1)
  int iterations = 0;
};

/// Gradients of u at the four Gauss points of every active element, in the
/// order of space.active_elements().
inline std::vector<Vec2> quadrature_gradients(const GridFunction& u) {
  const FeSpace& s = *u.space;
  std::vector<Vec2> out;
  for (int e : s.active_elements()) {
    const auto v = element_values(s, u.values, e);
    for (const Q1Point& q : q1_rule(s.grid().element_box(e))) out.push_back(q1_gradient(q, v));
  }
  return out;
}

/// Discrete weak solution chi of
///   int_{Y1} A(y,t) grad chi . grad v = int_{Y1} A(y,t) lambda . grad v
/// for all periodic v, normalized by M_Gamma(chi) = 0 (volume mean when
/// the cell has no inclusion or `mean` asks for it).
inline CellSolution solve_cell(const CoefficientModel& model, double t, const Vec2& lambda, const CellMesh& cm,
                               CellMean mean = CellMean::interface, double tolerance = 1e-12) {
  const auto space = cm.periodic_matrix_space();
  const int n = space->num_dofs();
  double min_eig = INFINITY;
  auto field = [&](const Vec2& y, double) {
    const Mat2 A = model.A(y, t);
    min_eig = std::min(min_eig, A.min_sym_eigenvalue());
    return A;
  };
  const CsrMatrix K = assemble_stiffness(*space, field);
  if (!(min_eig > 0.0))
    throw CellProblemError("coefficient is not coercive at t = " + std::to_string(t) +
                           " (smallest sampled eigenvalue " + std::to_string(min_eig) + ")");

  std::vector<double> b(static_cast<std::size_t>(n), 0.0);
  const TensorGrid& g = space->grid();
  for (int e : space->active_elements()) {
    const auto dofs = space->element_dofs(e);
    for (const Q1Point& q : q1_rule(g.element_box(e))) {
      const Vec2 Al = model.A(q.x, t).apply(lambda);
      for (std::size_t i = 0; i < 4; ++i)
        b[static_cast<std::size_t>(dofs[i])] += q.weight * (Al[0] * q.dN[i][0] + Al[1] * q.dN[i][1]);
    }
  }

  // Pinning one dof removes the constant kernel; the mean is fixed after.
  std::vector<bool> pinned(static_cast<std::size_t>(n), false);
  pinned[0] = true;
  const ConstrainedSystem sys(K, b, pinned);
  CgResult cg;
  try {
    cg = solve_spd(sys.matrix(), sys.rhs(), CgOptions{tolerance, 50000, false});
  } catch (const SolverError& ex) {
    throw CellProblemError(std::string("cell solve failed: ") + ex.what());
  }
  CellSolution sol;
  sol.t = t;
  sol.lambda = lambda;
  sol.iterations = cg.iterations;
  sol.chi = GridFunction(space, sys.expand(cg.x));

  const bool use_interface = mean == CellMean::interface && cm.cell().has_inclusion();
  const double shift = use_interface ? trace_mean(sol.chi, cm.interface_edges()) : mean_value(sol.chi);
  for (auto& v : sol.chi.values) v -= shift;

  std::vector<double> r(static_cast<std::size_t>(n));
  K.multiply(sol.chi.values, r);
  double rmax = 0.0, bmax = 1.0;
  for (int i = 0; i < n; ++i) {
    rmax = std::max(rmax, std::abs(r[static_cast<std::size_t>(i)] - b[static_cast<std::size_t>(i)]));
    bmax = std::max(bmax, std::abs(b[static_cast<std::size_t>(i)]));
  }
  sol.residual = rmax / bmax;
  sol.energy = dot(r, sol.chi.values);
  return sol;
}

struct HomogenizedTensor {
  double t = 0.0;
  Mat2 flux;    // columns (1/|Y|) int_{Y1} A (e_j - grad chi^j)
  Mat2 energy;  // entries (1/|Y|) int_{Y1} A (e_j - grad chi^j) . (e_i - grad chi^i)
  std::array<CellSolution, 2> chi;
};

/// A0(t) from the two cell solves for e1 and e2.
inline HomogenizedTensor homogenized_tensor(const CoefficientModel& model, double t, const CellMesh& cm,
                                            CellMean mean = CellMean::interface) {
  HomogenizedTensor out;
  out.t = t;
  out.chi[0] = solve_cell(model, t, {1.0, 0.0}, cm, mean);
  out.chi[1] = solve_cell(model, t, {0.0, 1.0}, cm, mean);
  const auto& space = *cm.periodic_matrix_space();
  const auto g0 = quadrature_gradients(out.chi[0].chi), g1 = quadrature_gradients(out.chi[1].chi);
  double F[2][2] = {{0, 0}, {0, 0}}, E[2][2] = {{0, 0}, {0, 0}};
  std::size_t k = 0;
  for (int e : space.active_elements())
    for (const Q1Point& q : q1_rule(space.grid().element_box(e))) {
      const Mat2 A = model.A(q.x, t);
      const Vec2 w[2] = {{1.0 - g0[k][0], -g0[k][1]}, {-g1[k][0], 1.0 - g1[k][1]}};
      for (int j = 0; j < 2; ++j) {
        const Vec2 Aw = A.apply(w[j]);
        for (int i = 0; i < 2; ++i) {
          F[i][j] += q.weight * Aw[static_cast<std::size_t>(i)];
          E[i][j] += q.weight * (Aw[0] * w[i][0] + Aw[1] * w[i][1]);
        }
      }
      ++k;
    }
  const double Y = cell_measures(cm.cell()).cell;
  out.flux = {F[0][0] / Y, F[0][1] / Y, F[1][0] / Y, F[1][1] / Y};
  out.energy = {E[0][0] / Y, E[0][1] / Y, E[1][0] / Y, E[1][1] / Y};
  return out;
}

/// (1/|Y|) int_{Y1} A(y,t) dy, the tensor of the chi = 0 competitor.
inline Mat2 voigt_bound(const CoefficientModel& model, double t, const CellMesh& cm) {
  const auto& space = *cm.periodic_matrix_space();
  Mat2 s{0, 0, 0, 0};
  for (int e : space.active_elements())
    for (const Q1Point& q : q1_rule(space.grid().element_box(e))) s = s + model.A(q.x, t) * q.weight;
  return s * (1.0 / cell_measures(cm.cell()).cell);
}

struct Richardson {
  double extrapolated = 0.0;
  double order = 0.0;
};

/// Richardson extrapolation of values on meshes h, h/2, h/4 with the order
/// fitted from the three values.
inline Richardson richardson(double a_h, double a_h2, double a_h4) {
  const double d1 = a_h - a_h2, d2 = a_h2 - a_h4;
  if (d2 == 0.0 || d1 / d2 <= 1.0) return {a_h4, 0.0};
  const double p = std::log2(d1 / d2);
  return {a_h4 - d2 / (std::pow(2.0, p) - 1.0), p};
}

/// A0 sampled on a uniform t-grid with piecewise linear interpolation.
class HomogenizedTensorTable {
 public:
  struct Entry {
    double t = 0.0;
    Mat2 A0;
    double min_eigenvalue = 0.0;
    std::array<GridFunction, 2> chi;
  };

  HomogenizedTensorTable() = default;
  explicit HomogenizedTensorTable(std::vector<Entry> entries) : entries_(std::move(entries)) {
    if (entries_.empty()) throw CellProblemError("empty tensor table");
    alpha0_ = INFINITY;
    for (const Entry& e : entries_) alpha0_ = std::min(alpha0_, e.min_eigenvalue);
  }

  const std::vector<Entry>& entries() const { return entries_; }
  double t_min() const { return entries_.front().t; }
  double t_max() const { return entries_.back().t; }
  /// Smallest eigenvalue of the symmetric part over the grid.
  double alpha0() const { return alpha0_; }

  /// Bracketing entries and weight of the upper one; t outside the grid is
  /// clamped and reported through `clamped`.
  void locate(double t, std::size_t& lo, double& w, bool* clamped = nullptr) const {
    const bool out = t < t_min() || t > t_max();
    if (clamped) *clamped = out;
    if (entries_.size() == 1 || t <= t_min()) {
      lo = 0;
      w = 0.0;
      return;
    }
    if (t >= t_max()) {
      lo = entries_.size() - 2;
      w = 1.0;
      return;
    }
    const double step = (t_max() - t_min()) / static_cast<double>(entries_.size() - 1);
    lo = std::min(static_cast<std::size_t>((t - t_min()) / step), entries_.size() - 2);
    w = (t - entries_[lo].t) / (entries_[lo + 1].t - entries_[lo].t);
  }

  Mat2 at(double t, bool* clamped = nullptr) const {
    std::size_t lo;
    double w;
    locate(t, lo, w, clamped);
    if (entries_.size() == 1) return entries_[0].A0;
    return entries_[lo].A0 * (1.0 - w) + entries_[lo + 1].A0 * w;
  }

  /// chi^j at t, interpolated linearly between grid values.
  std::vector<double> chi_at(int j, double t, bool* clamped = nullptr) const {
    std::size_t lo;
    double w;
    locate(t, lo, w, clamped);
    const auto& a = entries_[lo].chi[static_cast<std::size_t>(j)].values;
    if (entries_.size() == 1 || w == 0.0) return a;
    const auto& b = entries_[lo + 1].chi[static_cast<std::size_t>(j)].values;
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = (1.0 - w) * a[i] + w * b[i];
    return out;
  }

  /// max_i |A0(t_{i+1}) - A0(t_i)| / (t_{i+1} - t_i) in the Frobenius norm.
  double lipschitz() const {
    double L = 0.0;
    for (std::size_t i = 0; i + 1 < entries_.size(); ++i)
      L = std::max(L, (entries_[i + 1].A0 - entries_[i].A0).norm() / (entries_[i + 1].t - entries_[i].t));
    return L;
  }

  bool symmetric(double tol = 1e-10) const {
    for (const Entry& e : entries_)
      if (std::abs(e.A0.a12 - e.A0.a21) > tol * std::max(1.0, e.A0.max_abs())) return false;
    return true;
  }

  void write_csv(std::ostream& os) const {
    os << "t,A11,A12,A21,A22,min_eigenvalue\n";
    char buf[256];
    for (const Entry& e : entries_) {
      std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", e.t, e.A0.a11, e.A0.a12, e.A0.a21,
                    e.A0.a22, e.min_eigenvalue);
      os << buf;
    }
  }

 private:
  std::vector<Entry> entries_;
  double alpha0_ = 0.0;
};

/// Table range covering [lo, hi] padded by 20% of its width on each side.
inline std::pair<double, double> padded_range(double lo, double hi) {
  const double w = hi - lo;
  const double pad = w > 0.0 ? 0.2 * w : 0.2 * std::max(1.0, std::abs(lo));
  return {lo - pad, hi + pad};
}

/// Tabulates A0 on `samples` uniform points of [t_min, t_max]. A model that
/// does not depend on t is solved once.
inline HomogenizedTensorTable tabulate(const CoefficientModel& model, double t_min, double t_max, int samples,
                                       const CellMesh& cm, int workers = 1) {
  if (samples < 2) throw CellProblemError("tabulate needs at least two samples");
  if (!(t_max > t_min)) throw CellProblemError("tabulate needs t_min < t_max");
  auto entry = [&](double t) {
    HomogenizedTensor h;
    try {
      h = homogenized_tensor(model, t, cm);
    } catch (const std::exception& ex) {
      throw CellProblemError("tabulation failed at t = " + std::to_string(t) + ": " + ex.what());
    }
    HomogenizedTensorTable::Entry e;
    e.t = t;
    e.A0 = h.flux;
    e.min_eigenvalue = h.flux.min_sym_eigenvalue();
    e.chi = {h.chi[0].chi, h.chi[1].chi};
    return e;
  };
  auto t_of = [&](std::size_t i) { return t_min + (t_max - t_min) * static_cast<double>(i) / (samples - 1); };
  std::vector<HomogenizedTensorTable::Entry> entries;
  if (!model.depends_on_state()) {
    const auto e0 = entry(t_of(0));
    for (int i = 0; i < samples; ++i) {
      entries.push_back(e0);
      entries.back().t = t_of(static_cast<std::size_t>(i));
    }
  } else {
    entries = parallel_map(static_cast<std::size_t>(samples), workers, [&](std::size_t i) { return entry(t_of(i)); });
  }
  return HomogenizedTensorTable(std::move(entries));
}

/// Two-scale corrector u1hat(x, y) = -sum_j chi^j(y, u1(x)) d_j u1(x),
/// evaluated at element centers of the macro mesh and the nodes of the
/// periodic Y1 space.
struct CorrectorField {
  int elements = 0;
  int per_cell = 0;
  std::vector<double> values;  // [element * per_cell + micro dof]
  int clamped = 0;             // elements whose state fell outside the table

  double at(int e, int i) const { return values[static_cast<std::size_t>(e) * static_cast<std::size_t>(per_cell) + static_cast<std::size_t>(i)]; }
};

inline CorrectorField corrector(const GridFunction& u1, const HomogenizedTensorTable& table) {
  const FeSpace& s = *u1.space;
  const TensorGrid& g = s.grid();
  CorrectorField out;
  out.elements = g.num_elements();
  out.per_cell = static_cast<int>(table.entries().front().chi[0].values.size());
  out.values.assign(static_cast<std::size_t>(out.elements) * static_cast<std::size_t>(out.per_cell), 0.0);
  for (int e = 0; e < g.num_elements(); ++e) {
    if (!s.element_active(e)) continue;
    const auto v = element_values(s, u1.values, e);
    const Q1Point c = q1_point(g.element_box(e), 0.5, 0.5, 1.0);
    const double t = q1_value(c, v);
    const Vec2 grad = q1_gradient(c, v);
    bool clamped = false;
    const auto c0 = table.chi_at(0, t, &clamped);
    const auto c1 = table.chi_at(1, t);
    if (clamped) ++out.clamped;
    for (int i = 0; i < out.per_cell; ++i)
      out.values[static_cast<std::size_t>(e) * static_cast<std::size_t>(out.per_cell) + static_cast<std::size_t>(i)] =
          -(c0[static_cast<std::size_t>(i)] * grad[0] + c1[static_cast<std::size_t>(i)] * grad[1]);
  }
  return out;
}

}  // namespace twoscale
