#pragma once

// Discrete periodic unfolding. With the eps-mesh spacing eps*l/m, the node
// eps*(k*l + y) of cell k coincides with micro node y of the cell mesh, so
// T_eps is a pure re-indexing of nodal values. Cells outside K-hat carry
// the implicit value 0.

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <ostream>
#include <span>
#include <vector>

#include "twoscale/assembly.hpp"
#include "twoscale/mesh.hpp"

namespace twoscale {

enum class MicroDomain { cell, matrix, inclusion, interface };

inline Component component_of(MicroDomain d) {
  switch (d) {
    case MicroDomain::cell: return Component::whole;
    case MicroDomain::matrix: return Component::matrix;
    case MicroDomain::inclusion: return Component::inclusion;
    case MicroDomain::interface: return Component::whole;
  }
  return Component::whole;
}

/// Values indexed by (cell of K-hat, micro node). For the interface domain
/// the micro nodes are CellMesh::interface_nodes(); otherwise they are the
/// dofs of the cell-mesh space of the matching component.
struct UnfoldedField {
  std::shared_ptr<const EpsMesh> mesh;
  MicroDomain domain = MicroDomain::cell;
  int per_cell = 0;
  std::vector<double> values;

  int num_cells() const { return per_cell == 0 ? 0 : static_cast<int>(values.size()) / per_cell; }
  std::span<const double> cell(int c) const {
    return {values.data() + static_cast<std::ptrdiff_t>(c) * per_cell, static_cast<std::size_t>(per_cell)};
  }
  std::span<double> cell(int c) {
    return {values.data() + static_cast<std::ptrdiff_t>(c) * per_cell, static_cast<std::size_t>(per_cell)};
  }
  double at(int c, int micro) const { return values[static_cast<std::size_t>(c) * static_cast<std::size_t>(per_cell) + static_cast<std::size_t>(micro)]; }

  /// Micro field of cell c as a GridFunction on the cell mesh (not for the
  /// interface domain).
  GridFunction cell_function(int c) const {
    const auto& s = mesh->cell_mesh().space(component_of(domain));
    const auto v = cell(c);
    return GridFunction(s, std::vector<double>(v.begin(), v.end()));
  }
};

/// Cell-mesh node of micro index i of an unfolded field.
inline int micro_node(const CellMesh& cm, MicroDomain d, int i) {
  if (d == MicroDomain::interface) return cm.interface_nodes()[static_cast<std::size_t>(i)];
  return cm.space(component_of(d))->dof_node(i);
}

inline int micro_count(const CellMesh& cm, MicroDomain d) {
  if (d == MicroDomain::interface) return static_cast<int>(cm.interface_nodes().size());
  return cm.space(component_of(d))->num_dofs();
}

/// T_eps(phi) restricted to Omega x Y_d.
inline UnfoldedField unfold(const GridFunction& phi, const std::shared_ptr<const EpsMesh>& mesh, MicroDomain d) {
  if (&phi.space->phase_grid() != &mesh->phase_grid())
    throw GeometryError("unfold: function does not live on the given eps-mesh");
  const CellMesh& cm = mesh->cell_mesh();
  const auto& cells = mesh->tiling().full_cells();
  UnfoldedField F;
  F.mesh = mesh;
  F.domain = d;
  F.per_cell = micro_count(cm, d);
  F.values.resize(cells.size() * static_cast<std::size_t>(F.per_cell));
  for (std::size_t c = 0; c < cells.size(); ++c)
    for (int i = 0; i < F.per_cell; ++i) {
      const int g = mesh->global_node_of_micro(cells[c], micro_node(cm, d, i));
      const int dof = g < 0 ? -1 : phi.space->dof(g);
      if (dof < 0) throw GeometryError("unfold: micro node has no counterpart in the function's component");
      F.values[c * static_cast<std::size_t>(F.per_cell) + static_cast<std::size_t>(i)] = phi.values[static_cast<std::size_t>(dof)];
    }
  return F;
}

/// sum_k eps^2 int_{Y_d} F(k, y) dy, i.e. (1/|Y|) int_{Omega x Y_d} F.
inline double integrate_unfolded(const UnfoldedField& F) {
  const double eps = F.mesh->eps();
  double sum = 0.0;
  for (int c = 0; c < F.num_cells(); ++c) sum += integrate(F.cell_function(c));
  return eps * eps * sum;
}

/// || F ||^2 in L2(Omega x Y_d).
inline double unfolded_l2_sq(const UnfoldedField& F) {
  const double eps = F.mesh->eps();
  const double Y = cell_measures(F.mesh->tiling().cell()).cell;
  double sum = 0.0;
  for (int c = 0; c < F.num_cells(); ++c) sum += l2_norm_sq(F.cell_function(c));
  return eps * eps * Y * sum;
}

/// Global elements of the eps-mesh covering cell k, restricted to the
/// micro elements of component c.
inline std::vector<int> cell_elements(const EpsMesh& mesh, const Index2& k, Component c) {
  const CellMesh& cm = mesh.cell_mesh();
  std::vector<int> out;
  for (int e = 0; e < cm.grid().num_elements(); ++e)
    if (cm.phase_grid().element_in(e, c)) out.push_back(mesh.global_element_of_micro(k, e));
  return out;
}

/// Elements of the eps-mesh that lie in Lambda_eps.
inline std::vector<int> lambda_elements(const EpsMesh& mesh) {
  const TensorGrid& g = mesh.grid();
  std::vector<int> out;
  for (int e = 0; e < g.num_elements(); ++e) {
    const auto loc = mesh.tiling().locate(g.element_box(e).center());
    if (!loc) out.push_back(e);
  }
  return out;
}

/// int over the paved part of component c of phi, by quadrature on the
/// eps-mesh (the direct route for the integration identity).
inline double integrate_paved(const GridFunction& phi, const EpsMesh& mesh, Component c) {
  double sum = 0.0;
  for (const Index2& k : mesh.tiling().full_cells()) {
    const auto els = cell_elements(mesh, k, c);
    sum += integrate(phi, els);
  }
  return sum;
}

/// || T_eps(phi) - g ||^2 in L2(Omega x Y_d) for g a function of x only.
/// T_eps(phi) is constant in x on each cell, so the square expands into
/// per-cell moments of F (micro quadrature) and of g (eps-mesh quadrature).
inline double unfolded_distance_sq(const UnfoldedField& F, const std::function<double(const Vec2&)>& g) {
  const EpsMesh& mesh = *F.mesh;
  const TensorGrid& grid = mesh.grid();
  const double eps = mesh.eps();
  const double Yd = [&] {
    const CellMeasures cm = cell_measures(mesh.tiling().cell());
    switch (F.domain) {
      case MicroDomain::matrix: return cm.matrix;
      case MicroDomain::inclusion: return cm.inclusion;
      default: return cm.cell;
    }
  }();
  const double cell_vol = eps * eps * cell_measures(mesh.tiling().cell()).cell;
  auto moments = [&](std::span<const int> els) {
    double m1 = 0.0, m2 = 0.0;
    for (int e : els)
      for (const Q1Point& q : q1_rule(grid.element_box(e))) {
        const double v = g(q.x);
        m1 += q.weight * v;
        m2 += q.weight * v * v;
      }
    return std::pair{m1, m2};
  };
  double sum = 0.0;
  const auto& cells = mesh.tiling().full_cells();
  for (std::size_t c = 0; c < cells.size(); ++c) {
    const GridFunction f = F.cell_function(static_cast<int>(c));
    const double f1 = integrate(f), f2 = l2_norm_sq(f);
    const auto [g1, g2] = moments(cell_elements(mesh, cells[c], Component::whole));
    sum += cell_vol * f2 - 2.0 * f1 * g1 + Yd * g2;
  }
  sum += Yd * moments(lambda_elements(mesh)).second;
  return std::max(sum, 0.0);
}

/// max |grad_y T(phi) - eps T(grad phi)| over the Gauss points of every
/// micro element of every cell of K-hat.
inline double unfold_gradient_check(const GridFunction& phi, const std::shared_ptr<const EpsMesh>& mesh) {
  const Component comp = phi.space->component();
  const MicroDomain d = comp == Component::matrix      ? MicroDomain::matrix
                        : comp == Component::inclusion ? MicroDomain::inclusion
                                                       : MicroDomain::cell;
  const UnfoldedField F = unfold(phi, mesh, d);
  const CellMesh& cm = mesh->cell_mesh();
  const FeSpace& ms = *cm.space(comp);
  const double eps = mesh->eps();
  double worst = 0.0;
  const auto& cells = mesh->tiling().full_cells();
  for (std::size_t c = 0; c < cells.size(); ++c) {
    const auto fc = F.cell(static_cast<int>(c));
    for (int e = 0; e < cm.grid().num_elements(); ++e) {
      if (!ms.element_active(e)) continue;
      const int ge = mesh->global_element_of_micro(cells[c], e);
      const auto micro_rule = q1_rule(cm.grid().element_box(e));
      const auto macro_rule = q1_rule(mesh->grid().element_box(ge));
      const auto mv = element_values(ms, fc, e);
      const auto gv = element_values(*phi.space, phi.values, ge);
      for (std::size_t q = 0; q < 4; ++q) {
        const Vec2 gy = q1_gradient(micro_rule[q], mv);
        const Vec2 gx = q1_gradient(macro_rule[q], gv);
        worst = std::max({worst, std::abs(gy[0] - eps * gx[0]), std::abs(gy[1] - eps * gx[1])});
      }
    }
  }
  return worst;
}

/// Boundary unfolding of the trace of phi on Gamma^eps.
inline UnfoldedField unfold_boundary(const GridFunction& phi, const std::shared_ptr<const EpsMesh>& mesh) {
  return unfold(phi, mesh, MicroDomain::interface);
}

/// || F ||^2 in L2(Omega x Gamma) for a boundary-unfolded field.
inline double boundary_l2_sq(const UnfoldedField& F) {
  const CellMesh& cm = F.mesh->cell_mesh();
  const double eps = F.mesh->eps();
  const double Y = cell_measures(F.mesh->tiling().cell()).cell;
  std::vector<int> slot(static_cast<std::size_t>(cm.grid().num_nodes()), -1);
  for (std::size_t i = 0; i < cm.interface_nodes().size(); ++i)
    slot[static_cast<std::size_t>(cm.interface_nodes()[i])] = static_cast<int>(i);
  double sum = 0.0;
  for (int c = 0; c < F.num_cells(); ++c) {
    const auto v = F.cell(c);
    for (const InterfaceEdge& e : cm.interface_edges()) {
      const double a = v[static_cast<std::size_t>(slot[static_cast<std::size_t>(e.node_a)])];
      const double b = v[static_cast<std::size_t>(slot[static_cast<std::size_t>(e.node_b)])];
      for (const EdgePoint& p : edge_rule(e.xa, e.xb)) {
        const double w = p.Na * a + p.Nb * b;
        sum += p.weight * w * w;
      }
    }
  }
  return eps * eps * Y * sum;
}

/// Interface edges of the eps-mesh whose inclusion belongs to a K-hat cell.
inline std::vector<InterfaceEdge> paved_interface_edges(const EpsMesh& mesh) {
  std::vector<InterfaceEdge> out;
  const auto& incl = mesh.tiling().inclusion_cells();
  for (const InterfaceEdge& e : mesh.interface_edges()) {
    const int c = mesh.inclusion_of_element(e.inclusion_element);
    if (c >= 0 && mesh.tiling().in_full(incl[static_cast<std::size_t>(c)])) out.push_back(e);
  }
  return out;
}

/// || phi ||^2 in L2(Gamma-hat_eps), by edge quadrature on the eps-mesh.
inline double paved_interface_l2_sq(const GridFunction& phi, const EpsMesh& mesh) {
  double sum = 0.0;
  for (const InterfaceEdge& e : paved_interface_edges(mesh)) {
    const double a = phi.at_node(e.node_a), b = phi.at_node(e.node_b);
    for (const EdgePoint& p : edge_rule(e.xa, e.xb)) {
      const double w = p.Na * a + p.Nb * b;
      sum += p.weight * w * w;
    }
  }
  return sum;
}

/// max |T(phi psi) - T(phi) T(psi)| with the nodal product phi psi.
inline double product_identity_check(const GridFunction& phi, const GridFunction& psi,
                                     const std::shared_ptr<const EpsMesh>& mesh, MicroDomain d) {
  if (phi.space != psi.space) throw GeometryError("product check: functions on different spaces");
  GridFunction prod = phi;
  for (std::size_t i = 0; i < prod.values.size(); ++i) prod.values[i] *= psi.values[i];
  const UnfoldedField a = unfold(prod, mesh, d), b = unfold(phi, mesh, d), c = unfold(psi, mesh, d);
  double worst = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) worst = std::max(worst, std::abs(a.values[i] - b.values[i] * c.values[i]));
  return worst;
}

/// Unfold a function on Omega to Y_1 and Y_2 and reassemble on Y; returns
/// the max deviation from unfolding directly to Y.
inline double reassembly_check(const GridFunction& phi, const std::shared_ptr<const EpsMesh>& mesh) {
  const CellMesh& cm = mesh->cell_mesh();
  const UnfoldedField whole = unfold(phi, mesh, MicroDomain::cell);
  const UnfoldedField f1 = unfold(phi, mesh, MicroDomain::matrix);
  const UnfoldedField f2 = unfold(phi, mesh, MicroDomain::inclusion);
  const FeSpace& sw = *cm.space(Component::whole);
  const FeSpace& s1 = *cm.space(Component::matrix);
  const FeSpace& s2 = *cm.space(Component::inclusion);
  double worst = 0.0;
  for (int c = 0; c < whole.num_cells(); ++c)
    for (int i = 0; i < sw.num_dofs(); ++i) {
      const int n = sw.dof_node(i);
      const double v = s1.dof(n) >= 0 ? f1.at(c, s1.dof(n)) : f2.at(c, s2.dof(n));
      worst = std::max(worst, std::abs(v - whole.at(c, i)));
    }
  return worst;
}

/// CSV rows k1,k2,node,value (node = cell-mesh node id).
inline void write_csv(std::ostream& os, const UnfoldedField& F) {
  const CellMesh& cm = F.mesh->cell_mesh();
  const auto& cells = F.mesh->tiling().full_cells();
  os << "k1,k2,node,value\n";
  char buf[64];
  for (int c = 0; c < F.num_cells(); ++c)
    for (int i = 0; i < F.per_cell; ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", F.at(c, i));
      os << cells[static_cast<std::size_t>(c)][0] << ',' << cells[static_cast<std::size_t>(c)][1] << ','
         << micro_node(cm, F.domain, i) << ',' << buf << '\n';
    }
}

}  // namespace twoscale
