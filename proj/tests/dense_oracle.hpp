#pragma once

// Dense reference solver shared by the fine-solver tests and the acceptance
// binary. Written against Eigen, independent of the library assembly.

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <iostream>

#include "twoscale/fine_solver.hpp"

namespace oracle {

using namespace twoscale;

// Bilinear basis of one rectangle written out independently of the library:
// value and gradient of the hat of corner (cx, cy) in {0, 1}^2 at (x, y).
struct Hat {
  double value;
  double gx, gy;
};
inline Hat hat(const Box& b, int cx, int cy, double x, double y) {
  const double hx = b.hi[0] - b.lo[0], hy = b.hi[1] - b.lo[1];
  const double px = cx ? (x - b.lo[0]) / hx : (b.hi[0] - x) / hx;
  const double py = cy ? (y - b.lo[1]) / hy : (b.hi[1] - y) / hy;
  const double dx = cx ? 1.0 / hx : -1.0 / hx, dy = cy ? 1.0 / hy : -1.0 / hy;
  return {px * py, dx * py, px * dy};
}

// Dense Picard oracle for the isotropic model a(x/eps, t) I with h = 1 and
// f = 1: own element integrals, exact 1D interface mass, Eigen LLT.
// Empty when the oracle Picard loop does not converge.
inline Eigen::VectorXd dense_oracle(const EpsMesh& mesh, const std::function<double(double)>& a, bool picard) {
  const FeSpace& s1 = *mesh.space(Component::matrix);
  const FeSpace& s2 = *mesh.space(Component::inclusion);
  const int n1 = s1.num_dofs(), n = n1 + s2.num_dofs();
  const TensorGrid& g = mesh.grid();
  const double eps = mesh.eps();
  const double r = 0.5 / std::sqrt(3.0);
  const double gp[2] = {0.5 - r, 0.5 + r};

  auto solve = [&](const Eigen::VectorXd* state) {
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n, n);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
    for (int comp = 0; comp < 2; ++comp) {
      const FeSpace& s = comp == 0 ? s1 : s2;
      const int off = comp == 0 ? 0 : n1;
      for (int e = 0; e < g.num_elements(); ++e) {
        if (!s.element_active(e)) continue;
        const Box box = g.element_box(e);
        const Index2 ij = g.element_index(e);
        int dofs[4];
        int corner[4][2];
        for (int c = 0; c < 4; ++c) {
          corner[c][0] = c & 1;
          corner[c][1] = c >> 1;
          dofs[c] = off + s.dof(g.node_id(ij[0] + corner[c][0], ij[1] + corner[c][1]));
        }
        const double w = 0.25 * box.measure();
        for (double qx : gp)
          for (double qy : gp) {
            const double x = box.lo[0] + qx * (box.hi[0] - box.lo[0]);
            const double y = box.lo[1] + qy * (box.hi[1] - box.lo[1]);
            Hat H[4];
            double t = 0.0;
            for (int c = 0; c < 4; ++c) {
              H[c] = hat(box, corner[c][0], corner[c][1], x, y);
              if (state) t += H[c].value * (*state)(dofs[c]);
            }
            const double coef = a(t);
            for (int i = 0; i < 4; ++i) {
              b(dofs[i]) += w * H[i].value;
              for (int j = 0; j < 4; ++j) K(dofs[i], dofs[j]) += w * coef * (H[i].gx * H[j].gx + H[i].gy * H[j].gy);
            }
          }
      }
    }
    for (const InterfaceEdge& e : mesh.interface_edges()) {
      const double m = eps * e.length() / 6.0;
      const int d[2][2] = {{s1.dof(e.node_a), s1.dof(e.node_b)}, {n1 + s2.dof(e.node_a), n1 + s2.dof(e.node_b)}};
      for (int p = 0; p < 2; ++p)
        for (int q = 0; q < 2; ++q) {
          const double sign = p == q ? 1.0 : -1.0;
          for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) K(d[p][i], d[q][j]) += sign * m * (i == j ? 2.0 : 1.0);
        }
    }
    for (int dof = 0; dof < n1; ++dof) {
      if (!g.on_boundary(s1.dof_node(dof))) continue;
      K.row(dof).setZero();
      K.col(dof).setZero();
      K(dof, dof) = 1.0;
      b(dof) = 0.0;
    }
    return Eigen::VectorXd(K.llt().solve(b));
  };

  Eigen::VectorXd u = solve(nullptr);
  if (!picard) return u;
  for (int it = 0; it < 50; ++it) {
    const Eigen::VectorXd next = solve(&u);
    const double update = (next - u).norm() / std::max(u.norm(), 1.0);
    u = next;
    if (update <= 1e-8) return u;
  }
  std::cerr << "oracle Picard did not converge\n";
  return Eigen::VectorXd();
}

inline double max_diff(const FineSolution& s, const Eigen::VectorXd& ref) {
  const int n1 = s.u1.space->num_dofs();
  double d = 0.0;
  for (int i = 0; i < n1; ++i) d = std::max(d, std::abs(s.u1.values[static_cast<std::size_t>(i)] - ref(i)));
  for (std::size_t i = 0; i < s.u2.values.size(); ++i) d = std::max(d, std::abs(s.u2.values[i] - ref(n1 + static_cast<int>(i))));
  return d;
}

}  // namespace oracle
