#pragma once

// Extension operators on the reference cell and their eps-periodic
// versions. Every fill is a discrete Dirichlet problem for the Laplacian
// on a union of micro elements, factored once per operator.

#include <array>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <memory>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "twoscale/assembly.hpp"
#include "twoscale/random.hpp"
#include "twoscale/unfolding.hpp"

namespace twoscale {

/// Discrete harmonic fill on the elements flagged in `region`: nodes of the
/// region that are not `fixed` are solved for, fixed nodes supply data.
class HarmonicFill {
 public:
  HarmonicFill() = default;
  HarmonicFill(const TensorGrid& g, const std::vector<bool>& region, const std::vector<bool>& fixed) {
    const int nn = g.num_nodes();
    std::vector<bool> touched(static_cast<std::size_t>(nn), false);
    for (int e = 0; e < g.num_elements(); ++e)
      if (region[static_cast<std::size_t>(e)])
        for (int n : g.element_nodes(e)) touched[static_cast<std::size_t>(n)] = true;
    slot_.assign(static_cast<std::size_t>(nn), -1);
    for (int n = 0; n < nn; ++n)
      if (touched[static_cast<std::size_t>(n)] && !fixed[static_cast<std::size_t>(n)]) {
        slot_[static_cast<std::size_t>(n)] = static_cast<int>(interior_.size());
        interior_.push_back(n);
      }
    const int ni = static_cast<int>(interior_.size());
    TripletList t(ni, ni);
    for (int e = 0; e < g.num_elements(); ++e) {
      if (!region[static_cast<std::size_t>(e)]) continue;
      const auto nodes = g.element_nodes(e);
      std::array<std::array<double, 4>, 4> ke{};
      for (const Q1Point& q : q1_rule(g.element_box(e)))
        for (std::size_t i = 0; i < 4; ++i)
          for (std::size_t j = 0; j < 4; ++j)
            ke[i][j] += q.weight * (q.dN[i][0] * q.dN[j][0] + q.dN[i][1] * q.dN[j][1]);
      for (std::size_t i = 0; i < 4; ++i) {
        const int si = slot_[static_cast<std::size_t>(nodes[i])];
        if (si < 0) continue;
        for (std::size_t j = 0; j < 4; ++j) {
          const int sj = slot_[static_cast<std::size_t>(nodes[j])];
          if (sj >= 0)
            t.add(si, sj, ke[i][j]);
          else
            coupling_.push_back({si, nodes[j], ke[i][j]});
        }
      }
    }
    if (ni > 0) chol_ = DenseCholesky(t.compress());
  }

  /// Overwrites the interior entries of the node-indexed array `v`.
  void apply(std::vector<double>& v) const {
    if (interior_.empty()) return;
    std::vector<double> rhs(interior_.size(), 0.0);
    for (const Coupling& c : coupling_) rhs[static_cast<std::size_t>(c.row)] -= c.value * v[static_cast<std::size_t>(c.node)];
    const auto x = chol_.solve(rhs);
    for (std::size_t i = 0; i < interior_.size(); ++i) v[static_cast<std::size_t>(interior_[i])] = x[i];
  }

  const std::vector<int>& interior() const { return interior_; }

 private:
  struct Coupling {
    int row;
    int node;
    double value;
  };
  std::vector<int> slot_;
  std::vector<int> interior_;
  std::vector<Coupling> coupling_;
  DenseCholesky chol_;
};

enum class ExtensionVariant { p1, p2, p2_legacy };

inline const char* to_string(ExtensionVariant v) {
  switch (v) {
    case ExtensionVariant::p1: return "P1";
    case ExtensionVariant::p2: return "P2";
    case ExtensionVariant::p2_legacy: return "P2bar";
  }
  return "?";
}

/// Source component of a variant: Y1 for P1, Y2 otherwise.
inline Component source_component(ExtensionVariant v) {
  return v == ExtensionVariant::p1 ? Component::matrix : Component::inclusion;
}

/// Cell extension operator. Inputs are dof vectors of the source component
/// space of the cell mesh; outputs are dof vectors of the whole-cell space.
class CellExtensionOperator {
 public:
  CellExtensionOperator(std::shared_ptr<const CellMesh> cm, ExtensionVariant variant, double eta = 0.125)
      : cm_(std::move(cm)), variant_(variant), eta_(eta) {
    const ReferenceCell& cell = cm_->cell();
    if (!cell.has_inclusion()) throw GeometryError("extension operators need a two-component cell");
    const TensorGrid& g = cm_->grid();
    const PhaseGrid& pg = cm_->phase_grid();
    const int ne = g.num_elements(), nn = g.num_nodes();
    std::vector<bool> region(static_cast<std::size_t>(ne), false), fixed(static_cast<std::size_t>(nn), false);
    for (int n : cm_->interface_nodes()) fixed[static_cast<std::size_t>(n)] = true;
    switch (variant_) {
      case ExtensionVariant::p2:
        for (int e = 0; e < ne; ++e) region[static_cast<std::size_t>(e)] = pg.element_in(e, Component::matrix);
        for (int n = 0; n < nn; ++n)
          if (g.on_boundary(n)) fixed[static_cast<std::size_t>(n)] = true;
        break;
      case ExtensionVariant::p1:
        for (int e = 0; e < ne; ++e) region[static_cast<std::size_t>(e)] = pg.element_in(e, Component::inclusion);
        break;
      case ExtensionVariant::p2_legacy: {
        const Box inc = cell.inclusion_box();
        Box collar{{inc.lo[0] - eta, inc.lo[1] - eta}, {inc.hi[0] + eta, inc.hi[1] + eta}};
        for (int a = 0; a < kDim; ++a) {
          const double h = cell.period(a) / cm_->resolution();
          const double steps = eta / h;
          if (!(eta > 0.0) || std::abs(steps - std::round(steps)) > 1e-9 || std::round(steps) < 1.0)
            throw GeometryError("collar width is not a positive multiple of the micro mesh spacing");
          if (!(collar.lo[a] > 1e-12) || !(collar.hi[a] < cell.period(a) - 1e-12))
            throw GeometryError("collar does not fit inside the cell");
        }
        for (int e = 0; e < ne; ++e) {
          const Box b = g.element_box(e);
          const bool inside = b.lo[0] >= collar.lo[0] - 1e-12 && b.hi[0] <= collar.hi[0] + 1e-12 &&
                              b.lo[1] >= collar.lo[1] - 1e-12 && b.hi[1] <= collar.hi[1] + 1e-12;
          region[static_cast<std::size_t>(e)] = inside && pg.element_in(e, Component::matrix);
        }
        // Outer collar boundary: collar nodes touching an element outside it.
        std::vector<bool> in_collar(static_cast<std::size_t>(nn), false), outside(static_cast<std::size_t>(nn), false);
        for (int e = 0; e < ne; ++e)
          for (int n : g.element_nodes(e)) {
            if (region[static_cast<std::size_t>(e)]) in_collar[static_cast<std::size_t>(n)] = true;
            if (!region[static_cast<std::size_t>(e)] && pg.element_in(e, Component::matrix))
              outside[static_cast<std::size_t>(n)] = true;
          }
        for (int n = 0; n < nn; ++n)
          if (in_collar[static_cast<std::size_t>(n)] && outside[static_cast<std::size_t>(n)]) fixed[static_cast<std::size_t>(n)] = true;
        break;
      }
    }
    fill_ = HarmonicFill(g, region, fixed);
  }

  ExtensionVariant variant() const { return variant_; }
  double collar_width() const { return eta_; }
  const CellMesh& cell_mesh() const { return *cm_; }
  const std::shared_ptr<const CellMesh>& cell_mesh_ptr() const { return cm_; }
  const FeSpace& source_space() const { return *cm_->space(source_component(variant_)); }

  /// Extension of the source dof vector u; returns whole-cell dof values.
  std::vector<double> apply(std::span<const double> u) const {
    const FeSpace& src = source_space();
    const FeSpace& whole = *cm_->space(Component::whole);
    if (static_cast<int>(u.size()) != src.num_dofs()) throw GeometryError("extension: input size mismatch");
    const int nn = cm_->grid().num_nodes();
    std::vector<double> v(static_cast<std::size_t>(nn), 0.0);
    for (int d = 0; d < src.num_dofs(); ++d) v[static_cast<std::size_t>(src.dof_node(d))] = u[static_cast<std::size_t>(d)];
    if (variant_ == ExtensionVariant::p2) {
      // P2 u = M + S(u - M) with the boundary datum -M of the original u.
      const double M = mean_value(GridFunction(cm_->space(Component::inclusion), std::vector<double>(u.begin(), u.end())));
      std::vector<double> w(static_cast<std::size_t>(nn), 0.0);
      for (int d = 0; d < src.num_dofs(); ++d) {
        const auto n = static_cast<std::size_t>(src.dof_node(d));
        w[n] = v[n] - M;
      }
      for (int n = 0; n < nn; ++n)
        if (cm_->grid().on_boundary(n)) w[static_cast<std::size_t>(n)] = -M;
      fill_.apply(w);
      for (int n = 0; n < nn; ++n)
        if (src.dof(n) < 0) v[static_cast<std::size_t>(n)] = M + w[static_cast<std::size_t>(n)];
    } else {
      fill_.apply(v);
    }
    std::vector<double> out(static_cast<std::size_t>(whole.num_dofs()));
    for (int d = 0; d < whole.num_dofs(); ++d) out[static_cast<std::size_t>(d)] = v[static_cast<std::size_t>(whole.dof_node(d))];
    return out;
  }

  GridFunction apply(const GridFunction& u) const {
    return GridFunction(cm_->space(Component::whole), apply(std::span<const double>(u.values)));
  }

 private:
  std::shared_ptr<const CellMesh> cm_;
  ExtensionVariant variant_;
  double eta_;
  HarmonicFill fill_;
};

/// The fill S of a Y2 function: equal to u on Y2 and harmonic in Y1 with
/// data tr(u) on Gamma and `datum` on the cell boundary.
inline GridFunction harmonic_fill_S(const GridFunction& u, double datum) {
  const FeSpace& s2 = *u.space;
  if (s2.component() != Component::inclusion) throw GeometryError("harmonic_fill_S expects a Y2 function");
  const TensorGrid& g = s2.grid();
  const PhaseGrid& pg = s2.phase_grid();
  std::vector<bool> region(static_cast<std::size_t>(g.num_elements())), fixed(static_cast<std::size_t>(g.num_nodes()), false);
  for (int e = 0; e < g.num_elements(); ++e) region[static_cast<std::size_t>(e)] = pg.element_in(e, Component::matrix);
  std::vector<double> v(static_cast<std::size_t>(g.num_nodes()), 0.0);
  for (int n = 0; n < g.num_nodes(); ++n) {
    if (s2.dof(n) >= 0) {
      fixed[static_cast<std::size_t>(n)] = true;
      v[static_cast<std::size_t>(n)] = u.values[static_cast<std::size_t>(s2.dof(n))];
    } else if (g.on_boundary(n)) {
      fixed[static_cast<std::size_t>(n)] = true;
      v[static_cast<std::size_t>(n)] = datum;
    }
  }
  HarmonicFill(g, region, fixed).apply(v);
  auto whole = std::make_shared<FeSpace>(u.space->phase_grid_ptr(), Component::whole);
  GridFunction out(whole);
  for (int d = 0; d < whole->num_dofs(); ++d) out.values[static_cast<std::size_t>(d)] = v[static_cast<std::size_t>(whole->dof_node(d))];
  return out;
}

inline GridFunction extend_P2(const CellExtensionOperator& op, const GridFunction& u) {
  if (op.variant() != ExtensionVariant::p2) throw GeometryError("extend_P2: operator has a different variant");
  return op.apply(u);
}
inline GridFunction extend_P1(const CellExtensionOperator& op, const GridFunction& u) {
  if (op.variant() != ExtensionVariant::p1) throw GeometryError("extend_P1: operator has a different variant");
  return op.apply(u);
}
inline GridFunction legacy_extend_P2bar(const CellExtensionOperator& op, const GridFunction& u) {
  if (op.variant() != ExtensionVariant::p2_legacy) throw GeometryError("legacy_extend_P2bar: operator has a different variant");
  return op.apply(u);
}

struct PeriodicExtension {
  GridFunction field;         // on the whole eps-mesh space
  double max_mismatch = 0.0;  // largest disagreement of neighbouring cells at shared nodes
};

/// P_i^eps u: per cell k of K-hat, u_k(y) = u(eps k l + eps y) / eps is
/// extended by the cell operator and scaled back; zero on Lambda_eps.
inline PeriodicExtension extend_periodic(const GridFunction& u, const CellExtensionOperator& op,
                                         const std::shared_ptr<const EpsMesh>& mesh) {
  const Component src = source_component(op.variant());
  if (u.space->component() != src || &u.space->phase_grid() != &mesh->phase_grid())
    throw GeometryError("extend_periodic: input is not on the source component of the eps-mesh");
  if (op.cell_mesh().resolution() != mesh->resolution()) throw GeometryError("extend_periodic: resolution mismatch");
  const double eps = mesh->eps();
  const CellMesh& cm = op.cell_mesh();
  const FeSpace& cs = op.source_space();
  const FeSpace& cw = *cm.space(Component::whole);
  const auto& ws = mesh->space(Component::whole);
  PeriodicExtension out{GridFunction(ws), 0.0};
  std::vector<bool> written(static_cast<std::size_t>(ws->num_dofs()), false);
  std::vector<double> local(static_cast<std::size_t>(cs.num_dofs()));
  for (const Index2& k : mesh->tiling().full_cells()) {
    for (int d = 0; d < cs.num_dofs(); ++d) {
      const int g = mesh->global_node_of_micro(k, cs.dof_node(d));
      local[static_cast<std::size_t>(d)] = u.at_node(g) / eps;
    }
    const auto ext = op.apply(local);
    for (int d = 0; d < cw.num_dofs(); ++d) {
      const int g = ws->dof(mesh->global_node_of_micro(k, cw.dof_node(d)));
      const double v = eps * ext[static_cast<std::size_t>(d)];
      auto& slot = out.field.values[static_cast<std::size_t>(g)];
      if (written[static_cast<std::size_t>(g)]) {
        out.max_mismatch = std::max(out.max_mismatch, std::abs(slot - v));
      } else {
        slot = v;
        written[static_cast<std::size_t>(g)] = true;
      }
    }
  }
  return out;
}

// ---- ratio measurement ------------------------------------------------------

enum class InputFamily { zero_mean_random, constant_per_cell, smooth_global };

inline const char* to_string(InputFamily f) {
  switch (f) {
    case InputFamily::zero_mean_random: return "zero_mean_random";
    case InputFamily::constant_per_cell: return "constant_per_cell";
    case InputFamily::smooth_global: return "smooth_global";
  }
  return "?";
}

/// One draw of an input family on the source component of the eps-mesh.
/// Values outside K-hat cells are zero.
inline GridFunction draw_input(const EpsMesh& mesh, Component src, InputFamily family, std::mt19937_64& rng) {
  GridFunction u(mesh.space(src));
  const FeSpace& ms = *mesh.cell_mesh().space(src);
  for (const Index2& k : mesh.tiling().full_cells()) {
    std::vector<double> local(static_cast<std::size_t>(ms.num_dofs()));
    switch (family) {
      case InputFamily::zero_mean_random: {
        for (auto& v : local) v = uniform(rng, -1.0, 1.0);
        const double M = mean_value(GridFunction(mesh.cell_mesh().space(src), local));
        for (auto& v : local) v -= M;
        break;
      }
      case InputFamily::constant_per_cell: {
        const double c = uniform(rng, 0.5, 1.5);
        for (auto& v : local) v = c;
        break;
      }
      case InputFamily::smooth_global:
        for (int d = 0; d < ms.num_dofs(); ++d) {
          const Vec2 x = mesh.grid().node(mesh.global_node_of_micro(k, ms.dof_node(d)));
          local[static_cast<std::size_t>(d)] = std::sin(M_PI * x[0]) * std::sin(M_PI * x[1]);
        }
        break;
    }
    for (int d = 0; d < ms.num_dofs(); ++d) {
      const int g = mesh.global_node_of_micro(k, ms.dof_node(d));
      u.values[static_cast<std::size_t>(u.space->dof(g))] = local[static_cast<std::size_t>(d)];
    }
  }
  return u;
}

struct RatioRow {
  ExtensionVariant variant = ExtensionVariant::p2;
  double eps = 0.0;
  InputFamily family = InputFamily::zero_mean_random;
  double ratio = 0.0;
  bool skipped = false;
};

/// || grad P u ||_{L2(Omega)} over the norm of u on the paved source
/// component: the H1 seminorm for P1 and P2, the full H1 norm for P2bar.
inline RatioRow extension_ratio(const GridFunction& u, const CellExtensionOperator& op,
                                const std::shared_ptr<const EpsMesh>& mesh, InputFamily family) {
  RatioRow row{op.variant(), mesh->eps(), family, 0.0, false};
  const Component src = source_component(op.variant());
  std::vector<int> els;
  for (const Index2& k : mesh->tiling().full_cells()) {
    const auto ce = cell_elements(*mesh, k, src);
    els.insert(els.end(), ce.begin(), ce.end());
  }
  double den = gradient_norm_sq(u, els);
  if (op.variant() == ExtensionVariant::p2_legacy) den += l2_norm_sq(u, els);
  if (!(den > 0.0)) {
    row.skipped = true;
    return row;
  }
  const PeriodicExtension ext = extend_periodic(u, op, mesh);
  row.ratio = std::sqrt(gradient_norm_sq(ext.field) / den);
  return row;
}

/// Max ratio over `samples` draws per eps. Draws for eps index i use the
/// stream task_rng(seed, i).
inline std::vector<RatioRow> measure_ratio(ExtensionVariant variant, const ReferenceCell& cell, const Box& domain,
                                           const std::vector<double>& eps_list, int m, InputFamily family,
                                           int samples, std::uint64_t seed, double eta = 0.125) {
  auto cm = std::make_shared<CellMesh>(cell, m);
  const CellExtensionOperator op(cm, variant, eta);
  std::vector<RatioRow> rows;
  for (std::size_t i = 0; i < eps_list.size(); ++i) {
    const auto mesh = std::make_shared<EpsMesh>(build_tiling(cell, domain, eps_list[i]), m);
    auto rng = task_rng(seed, i);
    RatioRow best{variant, eps_list[i], family, 0.0, true};
    for (int s = 0; s < samples; ++s) {
      const GridFunction u = draw_input(*mesh, source_component(variant), family, rng);
      const RatioRow r = extension_ratio(u, op, mesh, family);
      if (!r.skipped && (best.skipped || r.ratio > best.ratio)) best = r;
    }
    rows.push_back(best);
  }
  return rows;
}

/// Least-squares slope of log(ratio) against log(eps) over non-skipped rows.
inline double fitted_slope(const std::vector<RatioRow>& rows) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = 0;
  for (const RatioRow& r : rows) {
    if (r.skipped) continue;
    const double x = std::log(r.eps), y = std::log(r.ratio);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++n;
  }
  if (n < 2) return std::nan("");
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

/// (max - min) / max of the ratios.
inline double relative_spread(const std::vector<RatioRow>& rows) {
  double lo = INFINITY, hi = 0.0;
  for (const RatioRow& r : rows) {
    if (r.skipped) continue;
    lo = std::min(lo, r.ratio);
    hi = std::max(hi, r.ratio);
  }
  return hi > 0.0 ? (hi - lo) / hi : 0.0;
}

inline void write_csv(std::ostream& os, const std::vector<RatioRow>& rows) {
  os << "variant,eps,family,ratio\n";
  char buf[64];
  for (const RatioRow& r : rows) {
    std::snprintf(buf, sizeof buf, "%.17g", r.eps);
    os << to_string(r.variant) << ',' << buf << ',' << to_string(r.family) << ',';
    if (r.skipped) {
      os << "skipped\n";
    } else {
      std::snprintf(buf, sizeof buf, "%.17g", r.ratio);
      os << buf << '\n';
    }
  }
}

}  // namespace twoscale
