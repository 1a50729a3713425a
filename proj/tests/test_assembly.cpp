#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "twoscale/assembly.hpp"

using namespace twoscale;

namespace {

std::shared_ptr<const FeSpace> square_space(int n, const Box& box = Box{{0, 0}, {1, 1}}) {
  auto pg = std::make_shared<PhaseGrid>();
  pg->grid = TensorGrid::uniform(box, n, n);
  pg->phase.assign(static_cast<std::size_t>(n * n), Phase::matrix);
  return std::make_shared<FeSpace>(pg, Component::whole);
}

// Gauss-Legendre with 20 points on [a, b], coefficients from Eigen's
// symmetric eigensolver on the Jacobi matrix (Golub-Welsch).
double gauss_legendre(const std::function<double(double)>& f, double a, double b) {
  const int n = 20;
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
  for (int i = 1; i < n; ++i) J(i, i - 1) = J(i - 1, i) = i / std::sqrt(4.0 * i * i - 1.0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
  double s = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = es.eigenvalues()(i);
    const double w = 2.0 * es.eigenvectors()(0, i) * es.eigenvectors()(0, i);
    s += w * f(0.5 * (a + b) + 0.5 * (b - a) * x);
  }
  return 0.5 * (b - a) * s;
}

}  // namespace

TEST(Stiffness, UnitElementMatrix) {
  const auto s = square_space(1);
  const CsrMatrix k = assemble_laplace(*s);
  // Hand integration of the bilinear basis gradients on [0,1]^2. Node order:
  // (0,0), (1,0), (0,1), (1,1).
  const double expect[4][4] = {{2. / 3, -1. / 6, -1. / 6, -1. / 3},
                               {-1. / 6, 2. / 3, -1. / 3, -1. / 6},
                               {-1. / 6, -1. / 3, 2. / 3, -1. / 6},
                               {-1. / 3, -1. / 6, -1. / 6, 2. / 3}};
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) EXPECT_NEAR(k.at(i, j), expect[i][j], 1e-15);
}

TEST(Stiffness, InteriorRowSumsVanish) {
  const auto s = square_space(6);
  const CsrMatrix k = assemble_laplace(*s);
  for (int i = 0; i < k.rows(); ++i) {
    double sum = 0.0;
    for (int p = k.row_ptr()[static_cast<std::size_t>(i)]; p < k.row_ptr()[static_cast<std::size_t>(i) + 1]; ++p)
      sum += k.values()[static_cast<std::size_t>(p)];
    EXPECT_NEAR(sum, 0.0, 1e-14);
  }
}

TEST(Stiffness, LinearScalingInA) {
  const auto s = square_space(5);
  const CsrMatrix k1 = assemble_laplace(*s);
  const std::vector<double> ones(static_cast<std::size_t>(s->num_dofs()), 1.0);
  const CsrMatrix k2 = assemble_stiffness(*s, [](const Vec2&, double t) { return Mat2::identity(1.0 + t); }, ones);
  for (std::size_t p = 0; p < k1.values().size(); ++p) EXPECT_EQ(k2.values()[p], 2.0 * k1.values()[p]);
}

TEST(Stiffness, SymmetricForSymmetricA) {
  const auto s = square_space(7);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1, 1);
  std::vector<double> state(static_cast<std::size_t>(s->num_dofs()));
  for (auto& v : state) v = u(rng);
  const CoefficientModel m = CoefficientModel::from_text("2 + sin(2*pi*y1)*t", "0.3*cos(t)", "0.3*cos(t)", "2", "1");
  const CsrMatrix k = assemble_stiffness(*s, [&](const Vec2& x, double t) { return m.A(x, t); }, state);
  EXPECT_LE(k.asymmetry(), 1e-14);
}

TEST(Stiffness, EvaluationFailureCarriesElement) {
  const auto s = square_space(2);
  const Expression e = parse_expression("1 / (y1 - 0.75 + y2 - 0.75)");
  try {
    assemble_stiffness(*s, [&](const Vec2& x, double) {
      if (x[0] > 0.5 && x[1] > 0.5) throw ExpressionError("division by zero");
      return Mat2::identity(e({x[0], x[1], 0.0}));
    });
    FAIL();
  } catch (const AssemblyError& err) {
    EXPECT_EQ(err.element(), 3);
  }
}

TEST(Interface, SingleEdgeMassMatrix) {
  // Two unit elements side by side: left matrix, right inclusion.
  auto pg = std::make_shared<PhaseGrid>();
  pg->grid = TensorGrid({0.0, 1.0, 2.0}, {0.0, 1.0});
  pg->phase = {Phase::matrix, Phase::inclusion};
  const FeSpace s1(pg, Component::matrix), s2(pg, Component::inclusion);
  const auto edges = pg->interface_edges();
  ASSERT_EQ(edges.size(), 1u);
  const double eps = 0.125, L = 1.0;
  const CsrMatrix c = assemble_interface_coupling(edges, s1, s2, [](const Vec2&) { return 1.0; }, eps);
  const int a1 = s1.dof(edges[0].node_a), b1 = s1.dof(edges[0].node_b);
  const int n1 = s1.num_dofs();
  const int a2 = s2.dof(edges[0].node_a) + n1, b2 = s2.dof(edges[0].node_b) + n1;
  const double m = eps * L / 6.0;
  EXPECT_NEAR(c.at(a1, a1), 2 * m, 1e-16);
  EXPECT_NEAR(c.at(a1, b1), m, 1e-16);
  EXPECT_NEAR(c.at(a1, a2), -2 * m, 1e-16);
  EXPECT_NEAR(c.at(a1, b2), -m, 1e-16);
  EXPECT_NEAR(c.at(b2, b2), 2 * m, 1e-16);
  EXPECT_LE(c.asymmetry(), 0.0);

  const CsrMatrix z = assemble_interface_coupling(edges, s1, s2, [](const Vec2&) { return 0.0; }, eps);
  for (double v : z.values()) EXPECT_EQ(v, 0.0);

  const CsrMatrix g = assemble_interface_coupling(edges, s1, s2, [](const Vec2&) { return 1.0; }, eps, -1.0);
  for (std::size_t p = 0; p < c.values().size(); ++p)
    EXPECT_NEAR(g.values()[p], c.values()[p] / (eps * eps), 1e-15 * std::abs(g.values()[p]));
}

TEST(Interface, CouplingIsPositiveSemidefinite) {
  const CellMesh cm(ReferenceCell(), 8);
  const auto& s1 = *cm.space(Component::matrix);
  const auto& s2 = *cm.space(Component::inclusion);
  const CoefficientModel m = CoefficientModel::isotropic("1", "2 + sin(2*pi*y1)");
  const CsrMatrix c =
      assemble_interface_coupling(cm.interface_edges(), s1, s2, [&](const Vec2& y) { return m.h(y); }, 0.5);
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(c.rows(), c.cols());
  for (int i = 0; i < c.rows(); ++i)
    for (int j = 0; j < c.cols(); ++j) d(i, j) = c.at(i, j);
  EXPECT_GE(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(d).eigenvalues().minCoeff(), -1e-14);
}

TEST(Means, VolumeAndInterface) {
  const CellMesh cm(ReferenceCell(), 16);
  const auto s2 = cm.space(Component::inclusion);
  const GridFunction c = interpolate(s2, [](const Vec2&) { return 3.5; });
  EXPECT_NEAR(mean_value(c), 3.5, 1e-14);
  const GridFunction y1 = interpolate(s2, [](const Vec2& y) { return y[0]; });
  EXPECT_NEAR(mean_value(y1), 0.5, 1e-14);

  // M_Gamma(h) for h = 2 + sin(2 pi y1) against a high-order 1D oracle.
  const CoefficientModel m = CoefficientModel::isotropic("1", "2 + sin(2*pi*y1)");
  const auto h = [&](double y1v, double y2v) { return m.h({y1v, y2v}); };
  const double oracle =
      (gauss_legendre([&](double s) { return h(s, 0.25); }, 0.25, 0.75) +
       gauss_legendre([&](double s) { return h(s, 0.75); }, 0.25, 0.75) +
       gauss_legendre([&](double s) { return h(0.25, s); }, 0.25, 0.75) +
       gauss_legendre([&](double s) { return h(0.75, s); }, 0.25, 0.75)) /
      2.0;
  EXPECT_NEAR(oracle, 2.0, 1e-13);
  EXPECT_NEAR(interface_mean(cm.interface_edges(), [&](const Vec2& y) { return m.h(y); }), oracle, 1e-13);
}

TEST(Means, SubtractingTheMeanLeavesZero) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-1, 1);
  const CellMesh cm(ReferenceCell(), 8);
  for (Component comp : {Component::whole, Component::matrix, Component::inclusion}) {
    GridFunction f(cm.space(comp));
    for (auto& v : f.values) v = u(rng);
    const double mv = mean_value(f);
    GridFunction g = f;
    for (auto& v : g.values) v -= mv;
    EXPECT_NEAR(mean_value(g), 0.0, 1e-14);
  }
  GridFunction f(cm.space(Component::matrix));
  for (auto& v : f.values) v = u(rng);
  const double mg = trace_mean(f, cm.interface_edges());
  for (auto& v : f.values) v -= mg;
  EXPECT_NEAR(trace_mean(f, cm.interface_edges()), 0.0, 1e-14);
}

TEST(Means, EdgeQuadratureExactForLinearTraces) {
  const CellMesh cm(ReferenceCell(), 4);
  const GridFunction f = interpolate(cm.space(Component::inclusion), [](const Vec2& y) { return y[0] + 2 * y[1]; });
  // Each side of [1/4,3/4]^2 has length 1/2; the mean of y1 + 2 y2 over the
  // square boundary is 0.5 + 1.0 by symmetry.
  EXPECT_NEAR(trace_mean(f, cm.interface_edges()), 1.5, 1e-15);
  EXPECT_NEAR(interface_mean(cm.interface_edges(), [](const Vec2& y) { return y[0] + 2 * y[1]; }), 1.5, 1e-15);
}
