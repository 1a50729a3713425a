#pragma once

// Structured Q1 meshes. A TensorGrid carries per-axis node coordinates; a
// PhaseGrid labels each element as matrix or inclusion; an FeSpace numbers
// the degrees of freedom of one component (matrix, inclusion or both). Nodes
// on the interface belong to both component spaces, so every interface node
// has one copy per component.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "twoscale/geometry.hpp"

namespace twoscale {

enum class Phase : std::uint8_t { matrix = 1, inclusion = 2 };

/// Component of a mesh: Omega / Y (whole), Omega_1 / Y_1 (matrix) or
/// Omega_2 / Y_2 (inclusion).
enum class Component : std::uint8_t { whole, matrix, inclusion };

inline const char* to_string(Component c) {
  switch (c) {
    case Component::whole: return "whole";
    case Component::matrix: return "matrix";
    case Component::inclusion: return "inclusion";
  }
  return "?";
}

class TensorGrid {
 public:
  TensorGrid() = default;
  TensorGrid(std::vector<double> x, std::vector<double> y) : x_(std::move(x)), y_(std::move(y)) {
    if (x_.size() < 2 || y_.size() < 2) throw GeometryError("grid needs at least one element per axis");
    for (const auto* c : {&x_, &y_})
      for (std::size_t i = 1; i < c->size(); ++i)
        if (!((*c)[i] > (*c)[i - 1])) throw GeometryError("grid coordinates must be strictly increasing");
  }

  static TensorGrid uniform(const Box& box, int nx, int ny) {
    auto axis = [](double lo, double hi, int n) {
      std::vector<double> c(static_cast<std::size_t>(n) + 1);
      for (int i = 0; i <= n; ++i) c[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / n;
      c.back() = hi;
      return c;
    };
    return TensorGrid(axis(box.lo[0], box.hi[0], nx), axis(box.lo[1], box.hi[1], ny));
  }

  const std::vector<double>& coords(int axis) const { return axis == 0 ? x_ : y_; }
  int elements(int axis) const { return static_cast<int>(coords(axis).size()) - 1; }
  int nodes(int axis) const { return static_cast<int>(coords(axis).size()); }
  int num_nodes() const { return nodes(0) * nodes(1); }
  int num_elements() const { return elements(0) * elements(1); }

  int node_id(int i, int j) const { return j * nodes(0) + i; }
  Index2 node_index(int id) const { return {id % nodes(0), id / nodes(0)}; }
  int element_id(int i, int j) const { return j * elements(0) + i; }
  Index2 element_index(int id) const { return {id % elements(0), id / elements(0)}; }

  Vec2 node(int id) const {
    const Index2 ij = node_index(id);
    return {x_[static_cast<std::size_t>(ij[0])], y_[static_cast<std::size_t>(ij[1])]};
  }

  Box element_box(int e) const {
    const Index2 ij = element_index(e);
    const auto i = static_cast<std::size_t>(ij[0]);
    const auto j = static_cast<std::size_t>(ij[1]);
    return Box{{x_[i], y_[j]}, {x_[i + 1], y_[j + 1]}};
  }

  /// Nodes of element e in counter-clockwise order starting at the lower-left.
  std::array<int, 4> element_nodes(int e) const {
    const Index2 ij = element_index(e);
    return {node_id(ij[0], ij[1]), node_id(ij[0] + 1, ij[1]), node_id(ij[0] + 1, ij[1] + 1),
            node_id(ij[0], ij[1] + 1)};
  }

  bool on_boundary(int node) const {
    const Index2 ij = node_index(node);
    return ij[0] == 0 || ij[1] == 0 || ij[0] == elements(0) || ij[1] == elements(1);
  }

  Box bounding_box() const { return Box{{x_.front(), y_.front()}, {x_.back(), y_.back()}}; }

  /// Element containing p (closed on the right at the last element), or -1.
  int find_element(const Vec2& p) const {
    int ij[2];
    for (int a = 0; a < kDim; ++a) {
      const auto& c = coords(a);
      if (p[a] < c.front() || p[a] > c.back()) return -1;
      auto it = std::upper_bound(c.begin(), c.end(), p[a]);
      int i = static_cast<int>(it - c.begin()) - 1;
      ij[a] = std::clamp(i, 0, elements(a) - 1);
    }
    return element_id(ij[0], ij[1]);
  }

 private:
  std::vector<double> x_;
  std::vector<double> y_;
};

/// A straight element edge separating a matrix element from an inclusion
/// element (or, on a cell mesh, any edge of the inclusion boundary).
struct InterfaceEdge {
  int node_a = -1;
  int node_b = -1;
  int matrix_element = -1;
  int inclusion_element = -1;
  double length() const { return std::hypot(xb[0] - xa[0], xb[1] - xa[1]); }
  Vec2 xa{};
  Vec2 xb{};
};

struct PhaseGrid {
  TensorGrid grid;
  std::vector<Phase> phase;

  bool element_in(int e, Component c) const {
    switch (c) {
      case Component::whole: return true;
      case Component::matrix: return phase[static_cast<std::size_t>(e)] == Phase::matrix;
      case Component::inclusion: return phase[static_cast<std::size_t>(e)] == Phase::inclusion;
    }
    return false;
  }

  /// All edges with a matrix element on one side and an inclusion element on
  /// the other, in a fixed order (vertical edges first, then horizontal).
  std::vector<InterfaceEdge> interface_edges() const {
    std::vector<InterfaceEdge> edges;
    const int nx = grid.elements(0), ny = grid.elements(1);
    for (int j = 0; j < ny; ++j)
      for (int i = 1; i < nx; ++i) {
        const int l = grid.element_id(i - 1, j), r = grid.element_id(i, j);
        if (phase[static_cast<std::size_t>(l)] == phase[static_cast<std::size_t>(r)]) continue;
        InterfaceEdge e;
        e.node_a = grid.node_id(i, j);
        e.node_b = grid.node_id(i, j + 1);
        e.matrix_element = phase[static_cast<std::size_t>(l)] == Phase::matrix ? l : r;
        e.inclusion_element = phase[static_cast<std::size_t>(l)] == Phase::matrix ? r : l;
        e.xa = grid.node(e.node_a);
        e.xb = grid.node(e.node_b);
        edges.push_back(e);
      }
    for (int j = 1; j < ny; ++j)
      for (int i = 0; i < nx; ++i) {
        const int b = grid.element_id(i, j - 1), t = grid.element_id(i, j);
        if (phase[static_cast<std::size_t>(b)] == phase[static_cast<std::size_t>(t)]) continue;
        InterfaceEdge e;
        e.node_a = grid.node_id(i, j);
        e.node_b = grid.node_id(i + 1, j);
        e.matrix_element = phase[static_cast<std::size_t>(b)] == Phase::matrix ? b : t;
        e.inclusion_element = phase[static_cast<std::size_t>(b)] == Phase::matrix ? t : b;
        e.xa = grid.node(e.node_a);
        e.xb = grid.node(e.node_b);
        edges.push_back(e);
      }
    return edges;
  }
};

/// Degrees of freedom of one component of a PhaseGrid. With `periodic`, the
/// nodes on the right/top faces are identified with their partners on the
/// left/bottom faces.
class FeSpace {
 public:
  FeSpace(std::shared_ptr<const PhaseGrid> mesh, Component component, bool periodic = false)
      : mesh_(std::move(mesh)), component_(component), periodic_(periodic) {
    const TensorGrid& g = mesh_->grid;
    active_.assign(static_cast<std::size_t>(g.num_elements()), false);
    std::vector<bool> touched(static_cast<std::size_t>(g.num_nodes()), false);
    for (int e = 0; e < g.num_elements(); ++e) {
      if (!mesh_->element_in(e, component_)) continue;
      active_[static_cast<std::size_t>(e)] = true;
      for (int n : g.element_nodes(e)) touched[static_cast<std::size_t>(n)] = true;
    }
    node_dof_.assign(static_cast<std::size_t>(g.num_nodes()), -1);
    const int nx = g.elements(0), ny = g.elements(1);
    for (int n = 0; n < g.num_nodes(); ++n) {
      if (!touched[static_cast<std::size_t>(n)]) continue;
      Index2 ij = g.node_index(n);
      if (periodic_) {
        if (ij[0] == nx) ij[0] = 0;
        if (ij[1] == ny) ij[1] = 0;
      }
      const int rep = g.node_id(ij[0], ij[1]);
      if (rep != n) continue;
      node_dof_[static_cast<std::size_t>(n)] = static_cast<int>(dof_node_.size());
      dof_node_.push_back(n);
    }
    if (periodic_) {
      for (int n = 0; n < g.num_nodes(); ++n) {
        if (!touched[static_cast<std::size_t>(n)]) continue;
        Index2 ij = g.node_index(n);
        if (ij[0] == nx) ij[0] = 0;
        if (ij[1] == ny) ij[1] = 0;
        const int rep = g.node_id(ij[0], ij[1]);
        if (node_dof_[static_cast<std::size_t>(rep)] < 0)
          throw GeometryError("periodic space: partner node is not part of the component");
        node_dof_[static_cast<std::size_t>(n)] = node_dof_[static_cast<std::size_t>(rep)];
      }
    }
  }

  const PhaseGrid& phase_grid() const { return *mesh_; }
  const std::shared_ptr<const PhaseGrid>& phase_grid_ptr() const { return mesh_; }
  const TensorGrid& grid() const { return mesh_->grid; }
  Component component() const { return component_; }
  bool periodic() const { return periodic_; }

  int num_dofs() const { return static_cast<int>(dof_node_.size()); }
  bool element_active(int e) const { return active_[static_cast<std::size_t>(e)]; }
  int dof(int node) const { return node_dof_[static_cast<std::size_t>(node)]; }
  /// Representative grid node of a dof.
  int dof_node(int d) const { return dof_node_[static_cast<std::size_t>(d)]; }

  std::array<int, 4> element_dofs(int e) const {
    const auto nodes = grid().element_nodes(e);
    return {dof(nodes[0]), dof(nodes[1]), dof(nodes[2]), dof(nodes[3])};
  }

  std::vector<int> active_elements() const {
    std::vector<int> out;
    for (int e = 0; e < grid().num_elements(); ++e)
      if (element_active(e)) out.push_back(e);
    return out;
  }

 private:
  std::shared_ptr<const PhaseGrid> mesh_;
  Component component_;
  bool periodic_;
  std::vector<bool> active_;
  std::vector<int> node_dof_;
  std::vector<int> dof_node_;
};

/// Nodal values on one FeSpace.
struct GridFunction {
  std::shared_ptr<const FeSpace> space;
  std::vector<double> values;

  GridFunction() = default;
  explicit GridFunction(std::shared_ptr<const FeSpace> s)
      : space(std::move(s)), values(static_cast<std::size_t>(space->num_dofs()), 0.0) {}
  GridFunction(std::shared_ptr<const FeSpace> s, std::vector<double> v) : space(std::move(s)), values(std::move(v)) {
    if (static_cast<int>(values.size()) != space->num_dofs())
      throw GeometryError("GridFunction: value count does not match the space");
  }

  double at_node(int node) const {
    const int d = space->dof(node);
    if (d < 0) throw GeometryError("GridFunction: node is not part of the component");
    return values[static_cast<std::size_t>(d)];
  }
};

inline GridFunction interpolate(std::shared_ptr<const FeSpace> space, const std::function<double(const Vec2&)>& fn) {
  GridFunction u(space);
  for (int d = 0; d < space->num_dofs(); ++d) u.values[static_cast<std::size_t>(d)] = fn(space->grid().node(space->dof_node(d)));
  return u;
}

/// Q1 interpolation of u at p; nullopt if p is not covered by an active element.
inline std::optional<double> evaluate(const GridFunction& u, const Vec2& p) {
  const TensorGrid& g = u.space->grid();
  const int e = g.find_element(p);
  if (e < 0 || !u.space->element_active(e)) return std::nullopt;
  const Box b = g.element_box(e);
  const double xi = (p[0] - b.lo[0]) / b.extent(0);
  const double eta = (p[1] - b.lo[1]) / b.extent(1);
  const auto d = u.space->element_dofs(e);
  const double v0 = u.values[static_cast<std::size_t>(d[0])], v1 = u.values[static_cast<std::size_t>(d[1])];
  const double v2 = u.values[static_cast<std::size_t>(d[2])], v3 = u.values[static_cast<std::size_t>(d[3])];
  return (1 - xi) * (1 - eta) * v0 + xi * (1 - eta) * v1 + xi * eta * v2 + (1 - xi) * eta * v3;
}

/// Mesh of the reference cell with m elements per axis. The inclusion
/// fractions times m must be integers so that the interface lies on element
/// edges.
class CellMesh {
 public:
  CellMesh(const ReferenceCell& cell, int m) : cell_(cell), m_(m) {
    if (m < 1) throw GeometryError("micro resolution must be positive");
    auto pg = std::make_shared<PhaseGrid>();
    pg->grid = TensorGrid::uniform(cell.cell_box(), m, m);
    if (cell.has_inclusion()) {
      for (int a = 0; a < kDim; ++a) {
        const double lo = cell.inclusion_low_fraction()[a] * m, hi = cell.inclusion_high_fraction()[a] * m;
        incl_lo_[a] = static_cast<int>(std::lround(lo));
        incl_hi_[a] = static_cast<int>(std::lround(hi));
        if (std::abs(lo - incl_lo_[a]) > 1e-9 || std::abs(hi - incl_hi_[a]) > 1e-9)
          throw GeometryError("inclusion is not conforming to the micro mesh (fraction * m must be an integer)");
      }
    } else {
      incl_lo_ = incl_hi_ = {0, 0};
    }
    pg->phase.assign(static_cast<std::size_t>(pg->grid.num_elements()), Phase::matrix);
    for (int e = 0; e < pg->grid.num_elements(); ++e) {
      const Index2 ij = pg->grid.element_index(e);
      if (in_inclusion_element(ij)) pg->phase[static_cast<std::size_t>(e)] = Phase::inclusion;
    }
    mesh_ = pg;
    whole_ = std::make_shared<FeSpace>(mesh_, Component::whole);
    matrix_ = std::make_shared<FeSpace>(mesh_, Component::matrix);
    inclusion_ = std::make_shared<FeSpace>(mesh_, Component::inclusion);
    periodic_matrix_ = std::make_shared<FeSpace>(mesh_, Component::matrix, true);
    edges_ = mesh_->interface_edges();
    for (int n = 0; n < mesh_->grid.num_nodes(); ++n)
      if (on_interface(mesh_->grid.node_index(n))) interface_nodes_.push_back(n);
  }

  const ReferenceCell& cell() const { return cell_; }
  int resolution() const { return m_; }
  const PhaseGrid& phase_grid() const { return *mesh_; }
  const std::shared_ptr<const PhaseGrid>& phase_grid_ptr() const { return mesh_; }
  const TensorGrid& grid() const { return mesh_->grid; }

  const std::shared_ptr<const FeSpace>& space(Component c) const {
    switch (c) {
      case Component::whole: return whole_;
      case Component::matrix: return matrix_;
      case Component::inclusion: return inclusion_;
    }
    return whole_;
  }
  const std::shared_ptr<const FeSpace>& periodic_matrix_space() const { return periodic_matrix_; }

  const std::vector<InterfaceEdge>& interface_edges() const { return edges_; }
  const std::vector<int>& interface_nodes() const { return interface_nodes_; }

  /// Micro node index range of the inclusion box.
  const Index2& inclusion_lo() const { return incl_lo_; }
  const Index2& inclusion_hi() const { return incl_hi_; }

  bool on_interface(const Index2& ij) const {
    if (!cell_.has_inclusion()) return false;
    const bool in_x = ij[0] >= incl_lo_[0] && ij[0] <= incl_hi_[0];
    const bool in_y = ij[1] >= incl_lo_[1] && ij[1] <= incl_hi_[1];
    return in_x && in_y && (ij[0] == incl_lo_[0] || ij[0] == incl_hi_[0] || ij[1] == incl_lo_[1] || ij[1] == incl_hi_[1]);
  }
  bool on_interface_node(int node) const { return on_interface(grid().node_index(node)); }
  bool on_cell_boundary(int node) const { return grid().on_boundary(node); }

 private:
  bool in_inclusion_element(const Index2& ij) const {
    return cell_.has_inclusion() && ij[0] >= incl_lo_[0] && ij[0] < incl_hi_[0] && ij[1] >= incl_lo_[1] &&
           ij[1] < incl_hi_[1];
  }

  ReferenceCell cell_;
  int m_;
  Index2 incl_lo_{};
  Index2 incl_hi_{};
  std::shared_ptr<const PhaseGrid> mesh_;
  std::shared_ptr<const FeSpace> whole_, matrix_, inclusion_, periodic_matrix_;
  std::vector<InterfaceEdge> edges_;
  std::vector<int> interface_nodes_;
};

/// Mesh of Omega conforming to the eps-paving: every lattice point
/// eps*l*(k + a/m) inside Omega is a grid line, as are the faces of Omega.
/// On exact pavings this is the uniform grid with spacing eps*l/m, and the
/// node of cell k with micro index (a,b) coincides with micro node (a,b) of
/// the cell mesh.
class EpsMesh {
 public:
  EpsMesh(EpsilonTiling tiling, int m, bool include_boundary_inclusions = true)
      : tiling_(std::move(tiling)), m_(m), cell_mesh_(std::make_shared<CellMesh>(tiling_.cell(), m)),
        include_boundary_inclusions_(include_boundary_inclusions) {
    const Box& dom = tiling_.domain();
    const double eps = tiling_.eps();
    std::array<std::vector<double>, 2> coords;
    for (int a = 0; a < kDim; ++a) {
      const double step = eps * tiling_.cell().period(a);
      const double tol = 1e-9 * step / m;
      const long lmin = static_cast<long>(std::floor(dom.lo[a] / step * m)) - 1;
      const long lmax = static_cast<long>(std::ceil(dom.hi[a] / step * m)) + 1;
      auto& c = coords[static_cast<std::size_t>(a)];
      auto& map = lattice_map_[static_cast<std::size_t>(a)];
      lattice_lo_[static_cast<std::size_t>(a)] = lmin;
      map.assign(static_cast<std::size_t>(lmax - lmin + 1), -1);
      for (long L = lmin; L <= lmax; ++L) {
        double x = step * static_cast<double>(L) / m;
        if (x < dom.lo[a] - tol || x > dom.hi[a] + tol) continue;
        if (std::abs(x - dom.lo[a]) <= tol) x = dom.lo[a];
        if (std::abs(x - dom.hi[a]) <= tol) x = dom.hi[a];
        map[static_cast<std::size_t>(L - lmin)] = static_cast<int>(c.size());
        c.push_back(x);
      }
      // Faces of Omega that are not lattice lines become extra breakpoints.
      if (c.empty() || c.front() > dom.lo[a]) {
        c.insert(c.begin(), dom.lo[a]);
        for (auto& v : map)
          if (v >= 0) ++v;
      }
      if (c.back() < dom.hi[a]) c.push_back(dom.hi[a]);
    }
    auto pg = std::make_shared<PhaseGrid>();
    pg->grid = TensorGrid(coords[0], coords[1]);
    pg->phase.assign(static_cast<std::size_t>(pg->grid.num_elements()), Phase::matrix);
    const auto& incl = include_boundary_inclusions_ ? tiling_.inclusion_cells() : tiling_.full_cells();
    if (tiling_.cell().has_inclusion()) {
      element_cell_.assign(static_cast<std::size_t>(pg->grid.num_elements()), -1);
      for (const Index2& k : incl) {
        if (!tiling_.in_inclusion_set(k)) continue;
        const int ci = tiling_.inclusion_cell_index(k);
        const int i0 = grid_index(0, k[0] * m + cell_mesh_->inclusion_lo()[0]);
        const int i1 = grid_index(0, k[0] * m + cell_mesh_->inclusion_hi()[0]);
        const int j0 = grid_index(1, k[1] * m + cell_mesh_->inclusion_lo()[1]);
        const int j1 = grid_index(1, k[1] * m + cell_mesh_->inclusion_hi()[1]);
        if (i0 < 0 || i1 < 0 || j0 < 0 || j1 < 0)
          throw GeometryError("inclusion box is not resolved by the eps-mesh");
        for (int j = j0; j < j1; ++j)
          for (int i = i0; i < i1; ++i) {
            const int e = pg->grid.element_id(i, j);
            pg->phase[static_cast<std::size_t>(e)] = Phase::inclusion;
            element_cell_[static_cast<std::size_t>(e)] = ci;
          }
      }
    }
    mesh_ = pg;
    whole_ = std::make_shared<FeSpace>(mesh_, Component::whole);
    matrix_ = std::make_shared<FeSpace>(mesh_, Component::matrix);
    inclusion_ = std::make_shared<FeSpace>(mesh_, Component::inclusion);
    edges_ = mesh_->interface_edges();
  }

  const EpsilonTiling& tiling() const { return tiling_; }
  double eps() const { return tiling_.eps(); }
  int resolution() const { return m_; }
  bool includes_boundary_inclusions() const { return include_boundary_inclusions_; }
  const CellMesh& cell_mesh() const { return *cell_mesh_; }
  const std::shared_ptr<const CellMesh>& cell_mesh_ptr() const { return cell_mesh_; }
  const PhaseGrid& phase_grid() const { return *mesh_; }
  const std::shared_ptr<const PhaseGrid>& phase_grid_ptr() const { return mesh_; }
  const TensorGrid& grid() const { return mesh_->grid; }

  const std::shared_ptr<const FeSpace>& space(Component c) const {
    switch (c) {
      case Component::whole: return whole_;
      case Component::matrix: return matrix_;
      case Component::inclusion: return inclusion_;
    }
    return whole_;
  }

  const std::vector<InterfaceEdge>& interface_edges() const { return edges_; }

  /// Index into tiling().inclusion_cells() of the inclusion that owns element
  /// e, or -1 for matrix elements.
  int inclusion_of_element(int e) const {
    if (element_cell_.empty()) return -1;
    return element_cell_[static_cast<std::size_t>(e)];
  }

  /// Grid coordinate index of lattice index L = k*m + a on an axis, or -1.
  int grid_index(int axis, long lattice) const {
    const long i = lattice - lattice_lo_[axis];
    const auto& map = lattice_map_[axis];
    if (i < 0 || i >= static_cast<long>(map.size())) return -1;
    return map[static_cast<std::size_t>(i)];
  }

  /// Global grid node of micro node (a, b) of cell k, or -1.
  int global_node(const Index2& k, int a, int b) const {
    const int i = grid_index(0, static_cast<long>(k[0]) * m_ + a);
    const int j = grid_index(1, static_cast<long>(k[1]) * m_ + b);
    if (i < 0 || j < 0) return -1;
    return grid().node_id(i, j);
  }

  /// Global grid element of micro element (a, b) of cell k, or -1.
  int global_element(const Index2& k, int a, int b) const {
    const int i = grid_index(0, static_cast<long>(k[0]) * m_ + a);
    const int j = grid_index(1, static_cast<long>(k[1]) * m_ + b);
    if (i < 0 || j < 0) return -1;
    return grid().element_id(i, j);
  }

  /// Global grid node coinciding with a cell-mesh node of cell k.
  int global_node_of_micro(const Index2& k, int micro_node) const {
    const Index2 ab = cell_mesh_->grid().node_index(micro_node);
    return global_node(k, ab[0], ab[1]);
  }
  int global_element_of_micro(const Index2& k, int micro_element) const {
    const Index2 ab = cell_mesh_->grid().element_index(micro_element);
    return global_element(k, ab[0], ab[1]);
  }

 private:
  EpsilonTiling tiling_;
  int m_;
  std::shared_ptr<const CellMesh> cell_mesh_;
  bool include_boundary_inclusions_;
  std::array<long, 2> lattice_lo_{};
  std::array<std::vector<int>, 2> lattice_map_;
  std::shared_ptr<const PhaseGrid> mesh_;
  std::shared_ptr<const FeSpace> whole_, matrix_, inclusion_;
  std::vector<InterfaceEdge> edges_;
  std::vector<int> element_cell_;
};

}  // namespace twoscale
