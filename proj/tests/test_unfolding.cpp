#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "twoscale/unfolding.hpp"

using namespace twoscale;

namespace {

const Box kUnit{{0.0, 0.0}, {1.0, 1.0}};

std::shared_ptr<const EpsMesh> eps_mesh(double eps, int m, const ReferenceCell& cell = ReferenceCell()) {
  return std::make_shared<EpsMesh>(build_tiling(cell, kUnit, eps), m);
}

GridFunction random_field(const std::shared_ptr<const FeSpace>& s, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  GridFunction f(s);
  for (auto& v : f.values) v = u(rng);
  return f;
}

double sinsin(const Vec2& x) { return std::sin(M_PI * x[0]) * std::sin(M_PI * x[1]); }

}  // namespace

TEST(Unfold, ConstantField) {
  const auto mesh = eps_mesh(0.3, 4);
  const auto f = interpolate(mesh->space(Component::whole), [](const Vec2&) { return 2.5; });
  const UnfoldedField F = unfold(f, mesh, MicroDomain::cell);
  EXPECT_EQ(F.num_cells(), 9);
  for (double v : F.values) EXPECT_EQ(v, 2.5);
}

TEST(Unfold, PeriodicFieldUnfoldsToItsProfile) {
  const auto mesh = eps_mesh(0.25, 8);
  auto psi = [](const Vec2& y) { return std::cos(2 * M_PI * y[0]) + y[1] * (1 - y[1]); };
  const auto f = interpolate(mesh->space(Component::matrix), [&](const Vec2& x) {
    return psi(mesh->tiling().cell().reduce({x[0] / 0.25, x[1] / 0.25}));
  });
  const UnfoldedField F = unfold(f, mesh, MicroDomain::matrix);
  const CellMesh& cm = mesh->cell_mesh();
  const auto& s1 = *cm.space(Component::matrix);
  for (int c = 0; c < F.num_cells(); ++c)
    for (int i = 0; i < F.per_cell; ++i) {
      Vec2 y = cm.grid().node(s1.dof_node(i));
      // Faces y = 1 carry the value of the neighbour's y = 0 face.
      EXPECT_NEAR(F.at(c, i), psi(cm.cell().reduce(y)), 1e-13);
    }
}

TEST(Unfold, AffineReindexing) {
  const auto mesh = eps_mesh(0.25, 4);
  const auto f = interpolate(mesh->space(Component::whole), [](const Vec2& x) { return x[0]; });
  const UnfoldedField F = unfold(f, mesh, MicroDomain::cell);
  const CellMesh& cm = mesh->cell_mesh();
  const auto& cells = mesh->tiling().full_cells();
  for (int c = 0; c < F.num_cells(); ++c)
    for (int i = 0; i < F.per_cell; ++i) {
      const Vec2 y = cm.grid().node(cm.space(Component::whole)->dof_node(i));
      EXPECT_NEAR(F.at(c, i), (cells[static_cast<std::size_t>(c)][0] + y[0]) / 4.0, 1e-15);
    }
}

TEST(Unfold, RejectsForeignMesh) {
  const auto a = eps_mesh(0.25, 4), b = eps_mesh(0.25, 4);
  const auto f = interpolate(a->space(Component::whole), [](const Vec2&) { return 1.0; });
  EXPECT_THROW(unfold(f, b, MicroDomain::cell), GeometryError);
  const auto g = interpolate(a->space(Component::inclusion), [](const Vec2&) { return 1.0; });
  EXPECT_THROW(unfold(g, a, MicroDomain::matrix), GeometryError);
}

TEST(Integration, Examples) {
  auto mesh = eps_mesh(0.25, 8);
  const auto one = interpolate(mesh->space(Component::matrix), [](const Vec2&) { return 1.0; });
  EXPECT_NEAR(integrate_unfolded(unfold(one, mesh, MicroDomain::matrix)), 0.75, 1e-14);

  mesh = eps_mesh(0.25, 4, ReferenceCell::without_inclusion());
  const auto x1 = interpolate(mesh->space(Component::whole), [](const Vec2& x) { return x[0]; });
  EXPECT_NEAR(integrate_unfolded(unfold(x1, mesh, MicroDomain::cell)), 0.5, 1e-14);

  mesh = eps_mesh(0.125, 8);
  const auto s = interpolate(mesh->space(Component::inclusion), sinsin);
  const double lhs = integrate_unfolded(unfold(s, mesh, MicroDomain::inclusion));
  const double rhs = integrate(s);  // direct quadrature over Omega_2^eps
  EXPECT_NEAR(lhs, rhs, 1e-12 * std::abs(rhs));
}

TEST(Integration, InexactPavingPinsThePavedPart) {
  const auto mesh = eps_mesh(0.3, 4);
  for (Component c : {Component::matrix, Component::inclusion}) {
    const MicroDomain d = c == Component::matrix ? MicroDomain::matrix : MicroDomain::inclusion;
    const auto f = interpolate(mesh->space(c), [](const Vec2& x) { return 1.0 + x[0] * x[1]; });
    const double lhs = integrate_unfolded(unfold(f, mesh, d));
    EXPECT_NEAR(lhs, integrate_paved(f, *mesh, c), 1e-12 * lhs);
    // Lambda carries strictly positive mass of this positive integrand in
    // the matrix; boundary inclusions outside K-hat do not exist at 0.3.
    if (c == Component::matrix) {
      EXPECT_GT(integrate(f) - lhs, 0.1);
    }
  }
}

TEST(Integration, NormBound) {
  for (double eps : {0.25, 0.3, 0.125}) {
    const auto mesh = eps_mesh(eps, 4);
    for (Component c : {Component::whole, Component::matrix, Component::inclusion}) {
      const MicroDomain d = c == Component::whole ? MicroDomain::cell
                            : c == Component::matrix ? MicroDomain::matrix
                                                     : MicroDomain::inclusion;
      const auto f = random_field(mesh->space(c), 17);
      EXPECT_LE(unfolded_l2_sq(unfold(f, mesh, d)), (1 + 1e-12) * l2_norm_sq(f));
    }
  }
}

TEST(Gradient, IdentityHoldsAtQuadraturePoints) {
  auto mesh = eps_mesh(0.25, 4);
  const auto affine = interpolate(mesh->space(Component::whole), [](const Vec2& x) { return 3 * x[0] - 2 * x[1] + 1; });
  EXPECT_LE(unfold_gradient_check(affine, mesh), 1e-14);
  EXPECT_LE(unfold_gradient_check(random_field(mesh->space(Component::whole), 3), mesh), 1e-13);
  EXPECT_LE(unfold_gradient_check(random_field(mesh->space(Component::matrix), 4), mesh), 1e-13);
  mesh = eps_mesh(0.125, 8);
  const auto sq = interpolate(mesh->space(Component::inclusion), [](const Vec2& x) { return x[0] * x[0]; });
  EXPECT_LE(unfold_gradient_check(sq, mesh), 1e-13);
}

TEST(Boundary, ConstantTraceRatio) {
  for (double eps : {0.25, 0.125}) {
    const auto mesh = eps_mesh(eps, 8);
    const auto one = interpolate(mesh->space(Component::matrix), [](const Vec2&) { return 1.0; });
    const double lhs = boundary_l2_sq(unfold_boundary(one, mesh));
    const double rhs = paved_interface_l2_sq(one, *mesh);
    EXPECT_NEAR(lhs / rhs, eps * 1.0, 1e-14);
  }
}

TEST(Boundary, LinearTraceAgainstEdgeQuadrature) {
  const auto mesh = eps_mesh(0.125, 8);
  const auto f = interpolate(mesh->space(Component::inclusion), [](const Vec2& x) { return x[0]; });
  const double lhs = boundary_l2_sq(unfold_boundary(f, mesh));
  // Exact oracle: each inclusion [a, a + w] x [b, b + w] with w = eps/2
  // contributes w * (a^2 + (a+w)^2) on its vertical sides and
  // 2 * int_a^{a+w} s^2 ds on its horizontal sides.
  const double eps = 0.125, w = eps / 2;
  double oracle = 0.0;
  for (const Index2& k : mesh->tiling().full_cells()) {
    const double a = eps * (k[0] + 0.25);
    oracle += w * (a * a + (a + w) * (a + w)) + 2.0 * (std::pow(a + w, 3) - std::pow(a, 3)) / 3.0;
  }
  EXPECT_NEAR(lhs, eps * oracle, 1e-12 * lhs);
}

TEST(Boundary, InequalityWhenLambdaIsNonEmpty) {
  const auto mesh = std::make_shared<EpsMesh>(build_tiling(ReferenceCell(), kUnit, 0.35), 4);
  const auto one = interpolate(mesh->space(Component::matrix), [](const Vec2&) { return 1.0; });
  double full = 0.0;
  for (const auto& e : mesh->interface_edges()) full += e.length();
  const double lhs = boundary_l2_sq(unfold_boundary(one, mesh));
  EXPECT_LT(lhs, 0.35 * full);
}

TEST(Product, Identities) {
  const auto mesh = eps_mesh(0.25, 4);
  const auto s = mesh->space(Component::whole);
  const auto c = interpolate(s, [](const Vec2&) { return 1.5; });
  EXPECT_EQ(product_identity_check(c, c, mesh, MicroDomain::cell), 0.0);
  GridFunction sq = c;
  for (auto& v : sq.values) v *= v;
  for (double v : unfold(sq, mesh, MicroDomain::cell).values) EXPECT_EQ(v, 2.25);
  const auto a = random_field(s, 1), b = random_field(s, 2);
  EXPECT_LE(product_identity_check(a, b, mesh, MicroDomain::cell), 1e-14);
  const auto z = interpolate(s, [](const Vec2&) { return 0.0; });
  EXPECT_EQ(product_identity_check(a, z, mesh, MicroDomain::inclusion), 0.0);
}

TEST(Reassembly, ComponentsGlueToTheCellField) {
  const auto mesh = eps_mesh(0.125, 8);
  EXPECT_EQ(reassembly_check(random_field(mesh->space(Component::whole), 8), mesh), 0.0);
}

TEST(Distance, ZeroForConstantsAndMatchesDirectForm) {
  const auto mesh = eps_mesh(0.3, 4);
  const auto c = interpolate(mesh->space(Component::whole), [](const Vec2&) { return 2.0; });
  const UnfoldedField F = unfold(c, mesh, MicroDomain::cell);
  // On K-hat the distance vanishes; Lambda contributes |Y| * 4 * |Lambda|.
  EXPECT_NEAR(unfolded_distance_sq(F, [](const Vec2&) { return 2.0; }), 4.0 * mesh->tiling().lambda_measure(), 1e-12);
}

TEST(Ladder, UnfoldingConvergesForSmoothData) {
  std::vector<double> err;
  for (double eps : {0.25, 0.125, 0.0625, 0.03125}) {
    const auto mesh = eps_mesh(eps, 8);
    const auto f = interpolate(mesh->space(Component::whole), sinsin);
    err.push_back(std::sqrt(unfolded_distance_sq(unfold(f, mesh, MicroDomain::cell), sinsin)));
  }
  for (std::size_t i = 1; i < err.size(); ++i) EXPECT_LT(err[i], err[i - 1]);
  EXPECT_LE(err.back() / err.front(), 0.5);
}

TEST(Csv, RowsPerCellAndNode) {
  const auto mesh = eps_mesh(0.5, 4);
  const auto f = interpolate(mesh->space(Component::whole), [](const Vec2& x) { return x[1]; });
  std::ostringstream os;
  write_csv(os, unfold(f, mesh, MicroDomain::cell));
  const std::string s = os.str();
  EXPECT_EQ(std::count(s.begin(), s.end(), '\n'), 1 + 4 * 25);
  EXPECT_EQ(s.substr(0, 17), "k1,k2,node,value\n");
}
