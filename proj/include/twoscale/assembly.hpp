#pragma once

// Q1 assembly on FeSpaces. Volume integrals use 2x2 Gauss points per
// element; edge integrals use 2 Gauss points per edge. All loops run in
// element order, so results are bitwise reproducible.

#include <array>
#include <cmath>
#include <exception>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "twoscale/coefficient.hpp"
#include "twoscale/mesh.hpp"
#include "twoscale/sparse.hpp"

namespace twoscale {

class AssemblyError : public std::runtime_error {
 public:
  AssemblyError(const std::string& msg, int element)
      : std::runtime_error("element " + std::to_string(element) + ": " + msg), element_(element) {}
  int element() const { return element_; }

 private:
  int element_;
};

namespace gauss {
/// Two-point rule on [0, 1].
inline constexpr double kLo = 0.5 - 0.28867513459481287;  // 0.5 - 0.5/sqrt(3)
inline constexpr double kHi = 0.5 + 0.28867513459481287;
inline constexpr std::array<double, 2> kPoints{kLo, kHi};
inline constexpr double kWeight = 0.5;
}  // namespace gauss

/// Bilinear shape data at one reference point of an axis-aligned element.
struct Q1Point {
  Vec2 x{};
  std::array<double, 4> N{};
  std::array<Vec2, 4> dN{};
  double weight = 0.0;  // Gauss weight times element area
};

inline Q1Point q1_point(const Box& b, double xi, double eta, double ref_weight) {
  const double hx = b.extent(0), hy = b.extent(1);
  Q1Point q;
  q.x = {b.lo[0] + xi * hx, b.lo[1] + eta * hy};
  q.N = {(1 - xi) * (1 - eta), xi * (1 - eta), xi * eta, (1 - xi) * eta};
  q.dN = {Vec2{-(1 - eta) / hx, -(1 - xi) / hy}, Vec2{(1 - eta) / hx, -xi / hy}, Vec2{eta / hx, xi / hy},
          Vec2{-eta / hx, (1 - xi) / hy}};
  q.weight = ref_weight * hx * hy;
  return q;
}

/// The four Gauss points of an element, lower-left first, x fastest.
inline std::array<Q1Point, 4> q1_rule(const Box& b) {
  std::array<Q1Point, 4> pts;
  int i = 0;
  for (double eta : gauss::kPoints)
    for (double xi : gauss::kPoints) pts[static_cast<std::size_t>(i++)] = q1_point(b, xi, eta, gauss::kWeight * gauss::kWeight);
  return pts;
}

inline double q1_value(const Q1Point& q, const std::array<double, 4>& v) {
  return q.N[0] * v[0] + q.N[1] * v[1] + q.N[2] * v[2] + q.N[3] * v[3];
}

inline Vec2 q1_gradient(const Q1Point& q, const std::array<double, 4>& v) {
  Vec2 g{0.0, 0.0};
  for (std::size_t i = 0; i < 4; ++i) {
    g[0] += q.dN[i][0] * v[i];
    g[1] += q.dN[i][1] * v[i];
  }
  return g;
}

inline std::array<double, 4> element_values(const FeSpace& s, std::span<const double> u, int e) {
  const auto d = s.element_dofs(e);
  return {u[static_cast<std::size_t>(d[0])], u[static_cast<std::size_t>(d[1])], u[static_cast<std::size_t>(d[2])],
          u[static_cast<std::size_t>(d[3])]};
}

/// Stiffness entries  int A(x, t) grad phi_j . grad phi_i  over the active
/// elements of `space`, with t the Q1 interpolant of `state` (0 when empty).
/// `field` is called as field(x, t) -> Mat2. Triplets are added with the
/// given dof offset.
template <class MatrixField>
void add_stiffness(TripletList& out, const FeSpace& space, MatrixField&& field, std::span<const double> state = {},
                   int offset = 0) {
  const TensorGrid& g = space.grid();
  for (int e = 0; e < g.num_elements(); ++e) {
    if (!space.element_active(e)) continue;
    const auto dofs = space.element_dofs(e);
    const std::array<double, 4> sv = state.empty() ? std::array<double, 4>{} : element_values(space, state, e);
    std::array<std::array<double, 4>, 4> ke{};
    try {
      for (const Q1Point& q : q1_rule(g.element_box(e))) {
        const double t = state.empty() ? 0.0 : q1_value(q, sv);
        const Mat2 A = field(q.x, t);
        for (std::size_t j = 0; j < 4; ++j) {
          const Vec2 Ag = A.apply(q.dN[j]);
          for (std::size_t i = 0; i < 4; ++i) ke[i][j] += q.weight * (Ag[0] * q.dN[i][0] + Ag[1] * q.dN[i][1]);
        }
      }
    } catch (const std::exception& ex) {
      throw AssemblyError(ex.what(), e);
    }
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 4; ++j) out.add(dofs[i] + offset, dofs[j] + offset, ke[i][j]);
  }
}

template <class MatrixField>
CsrMatrix assemble_stiffness(const FeSpace& space, MatrixField&& field, std::span<const double> state = {}) {
  TripletList t(space.num_dofs(), space.num_dofs());
  add_stiffness(t, space, field, state);
  return t.compress();
}

/// Laplace stiffness (A = I).
inline CsrMatrix assemble_laplace(const FeSpace& space) {
  return assemble_stiffness(space, [](const Vec2&, double) { return Mat2::identity(); });
}

/// Mass matrix  int phi_j phi_i.
inline CsrMatrix assemble_mass(const FeSpace& space) {
  const TensorGrid& g = space.grid();
  TripletList t(space.num_dofs(), space.num_dofs());
  for (int e = 0; e < g.num_elements(); ++e) {
    if (!space.element_active(e)) continue;
    const auto dofs = space.element_dofs(e);
    for (const Q1Point& q : q1_rule(g.element_box(e)))
      for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j) t.add(dofs[i], dofs[j], q.weight * q.N[i] * q.N[j]);
  }
  return t.compress();
}

/// Load vector  int f phi_i ; f is called as f(x).
template <class Source>
std::vector<double> assemble_load(const FeSpace& space, Source&& f) {
  const TensorGrid& g = space.grid();
  std::vector<double> b(static_cast<std::size_t>(space.num_dofs()), 0.0);
  for (int e = 0; e < g.num_elements(); ++e) {
    if (!space.element_active(e)) continue;
    const auto dofs = space.element_dofs(e);
    try {
      for (const Q1Point& q : q1_rule(g.element_box(e))) {
        const double fv = f(q.x);
        for (std::size_t i = 0; i < 4; ++i) b[static_cast<std::size_t>(dofs[i])] += q.weight * fv * q.N[i];
      }
    } catch (const AssemblyError&) {
      throw;
    } catch (const std::exception& ex) {
      throw AssemblyError(ex.what(), e);
    }
  }
  return b;
}

/// Two Gauss points of a straight edge: positions, weights (including
/// length) and the linear shape values of the end nodes.
struct EdgePoint {
  Vec2 x{};
  double weight = 0.0;
  double Na = 0.0;
  double Nb = 0.0;
};

inline std::array<EdgePoint, 2> edge_rule(const Vec2& xa, const Vec2& xb) {
  const double len = std::hypot(xb[0] - xa[0], xb[1] - xa[1]);
  std::array<EdgePoint, 2> pts;
  for (std::size_t i = 0; i < 2; ++i) {
    const double s = gauss::kPoints[i];
    pts[i] = {{xa[0] + s * (xb[0] - xa[0]), xa[1] + s * (xb[1] - xa[1])}, gauss::kWeight * len, 1.0 - s, s};
  }
  return pts;
}

/// Adds  scale * int_edges h (u1 - u2)(v1 - v2)  to a block system whose
/// first block is s1 (offset 0) and second block is s2 (offset `offset2`).
/// `h` is called as h(x).
template <class Weight>
void add_interface_coupling(TripletList& out, const std::vector<InterfaceEdge>& edges, const FeSpace& s1,
                            const FeSpace& s2, int offset2, Weight&& h, double scale) {
  for (const InterfaceEdge& e : edges) {
    const int a1 = s1.dof(e.node_a), b1 = s1.dof(e.node_b);
    const int a2 = s2.dof(e.node_a), b2 = s2.dof(e.node_b);
    if (a1 < 0 || b1 < 0 || a2 < 0 || b2 < 0) throw GeometryError("interface edge without a copy in both components");
    double m[2][2] = {{0.0, 0.0}, {0.0, 0.0}};
    for (const EdgePoint& p : edge_rule(e.xa, e.xb)) {
      const double w = scale * p.weight * h(p.x);
      const double N[2] = {p.Na, p.Nb};
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) m[i][j] += w * N[i] * N[j];
    }
    const int d1[2] = {a1, b1};
    const int d2[2] = {a2 + offset2, b2 + offset2};
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) {
        out.add(d1[i], d1[j], m[i][j]);
        out.add(d1[i], d2[j], -m[i][j]);
        out.add(d2[i], d1[j], -m[i][j]);
        out.add(d2[i], d2[j], m[i][j]);
      }
  }
}

/// The interface contribution alone as an (n1 + n2) square matrix.
template <class Weight>
CsrMatrix assemble_interface_coupling(const std::vector<InterfaceEdge>& edges, const FeSpace& s1, const FeSpace& s2,
                                      Weight&& h, double eps, double gamma = 1.0) {
  const int n = s1.num_dofs() + s2.num_dofs();
  TripletList t(n, n);
  add_interface_coupling(t, edges, s1, s2, s1.num_dofs(), h, std::pow(eps, gamma));
  return t.compress();
}

// ---- integrals -------------------------------------------------------------

/// int u over the active elements of u's space (or only over `elements`).
inline double integrate(const GridFunction& u, std::span<const int> elements = {}) {
  const FeSpace& s = *u.space;
  const TensorGrid& g = s.grid();
  double sum = 0.0;
  auto body = [&](int e) {
    const auto v = element_values(s, u.values, e);
    for (const Q1Point& q : q1_rule(g.element_box(e))) sum += q.weight * q1_value(q, v);
  };
  if (elements.empty()) {
    for (int e = 0; e < g.num_elements(); ++e)
      if (s.element_active(e)) body(e);
  } else {
    for (int e : elements) body(e);
  }
  return sum;
}

inline double measure(const FeSpace& s, std::span<const int> elements = {}) {
  const TensorGrid& g = s.grid();
  double sum = 0.0;
  if (elements.empty()) {
    for (int e = 0; e < g.num_elements(); ++e)
      if (s.element_active(e)) sum += g.element_box(e).measure();
  } else {
    for (int e : elements) sum += g.element_box(e).measure();
  }
  return sum;
}

/// Volume mean of u over its component (or over `elements`).
inline double mean_value(const GridFunction& u, std::span<const int> elements = {}) {
  const double m = measure(*u.space, elements);
  if (!(m > 0.0)) throw GeometryError("mean value over an empty region");
  return integrate(u, elements) / m;
}

/// int over `edges` of fn(x); fn is sampled at the edge Gauss points.
template <class Fn>
double edge_integral(const std::vector<InterfaceEdge>& edges, Fn&& fn) {
  double sum = 0.0;
  for (const InterfaceEdge& e : edges)
    for (const EdgePoint& p : edge_rule(e.xa, e.xb)) sum += p.weight * fn(p.x);
  return sum;
}

inline double edges_length(const std::vector<InterfaceEdge>& edges) {
  double sum = 0.0;
  for (const InterfaceEdge& e : edges) sum += e.length();
  return sum;
}

/// Mean over `edges` of a callable fn(x).
template <class Fn>
double interface_mean(const std::vector<InterfaceEdge>& edges, Fn&& fn) {
  const double len = edges_length(edges);
  if (!(len > 0.0)) throw GeometryError("mean value over an empty interface");
  return edge_integral(edges, fn) / len;
}

/// int over `edges` of the trace of u (linear along each edge).
inline double trace_integral(const GridFunction& u, const std::vector<InterfaceEdge>& edges) {
  double sum = 0.0;
  for (const InterfaceEdge& e : edges) sum += 0.5 * e.length() * (u.at_node(e.node_a) + u.at_node(e.node_b));
  return sum;
}

/// Mean of the trace of u over `edges` (the M_Gamma mean).
inline double trace_mean(const GridFunction& u, const std::vector<InterfaceEdge>& edges) {
  const double len = edges_length(edges);
  if (!(len > 0.0)) throw GeometryError("mean value over an empty interface");
  return trace_integral(u, edges) / len;
}

/// int_edges w(x) (u - v)^2 with u, v given on (possibly different) spaces.
template <class Weight>
double jump_norm_sq(const GridFunction& u, const GridFunction& v, const std::vector<InterfaceEdge>& edges, Weight&& w) {
  double sum = 0.0;
  for (const InterfaceEdge& e : edges) {
    const double ja = u.at_node(e.node_a) - v.at_node(e.node_a);
    const double jb = u.at_node(e.node_b) - v.at_node(e.node_b);
    for (const EdgePoint& p : edge_rule(e.xa, e.xb)) {
      const double j = p.Na * ja + p.Nb * jb;
      sum += p.weight * w(p.x) * j * j;
    }
  }
  return sum;
}

inline double jump_norm_sq(const GridFunction& u, const GridFunction& v, const std::vector<InterfaceEdge>& edges) {
  return jump_norm_sq(u, v, edges, [](const Vec2&) { return 1.0; });
}

/// int A(x, t) grad u . grad u with t the interpolant of `state` (0 when
/// `state` is empty).
template <class MatrixField>
double energy(const GridFunction& u, MatrixField&& field, std::span<const double> state = {},
              std::span<const int> elements = {}) {
  const FeSpace& s = *u.space;
  const TensorGrid& g = s.grid();
  double sum = 0.0;
  auto body = [&](int e) {
    const auto v = element_values(s, u.values, e);
    const std::array<double, 4> sv = state.empty() ? std::array<double, 4>{} : element_values(s, state, e);
    for (const Q1Point& q : q1_rule(g.element_box(e))) {
      const Vec2 gr = q1_gradient(q, v);
      sum += q.weight * field(q.x, state.empty() ? 0.0 : q1_value(q, sv)).form(gr, gr);
    }
  };
  if (elements.empty()) {
    for (int e = 0; e < g.num_elements(); ++e)
      if (s.element_active(e)) body(e);
  } else {
    for (int e : elements) body(e);
  }
  return sum;
}

/// || grad u ||^2 over the component.
inline double gradient_norm_sq(const GridFunction& u, std::span<const int> elements = {}) {
  return energy(u, [](const Vec2&, double) { return Mat2::identity(); }, {}, elements);
}

inline double l2_norm_sq(const GridFunction& u, std::span<const int> elements = {}) {
  const FeSpace& s = *u.space;
  const TensorGrid& g = s.grid();
  double sum = 0.0;
  auto body = [&](int e) {
    const auto v = element_values(s, u.values, e);
    for (const Q1Point& q : q1_rule(g.element_box(e))) {
      const double val = q1_value(q, v);
      sum += q.weight * val * val;
    }
  };
  if (elements.empty()) {
    for (int e = 0; e < g.num_elements(); ++e)
      if (s.element_active(e)) body(e);
  } else {
    for (int e : elements) body(e);
  }
  return sum;
}

}  // namespace twoscale
