#include <gtest/gtest.h>

#include <cmath>

#include "twoscale/homogenized.hpp"

using namespace twoscale;

namespace {

const Box kUnit{{0.0, 0.0}, {1.0, 1.0}};
const CoefficientModel kLinear = CoefficientModel::isotropic("1");
const CoefficientModel kSaturating = CoefficientModel::isotropic("1 + t^2 / (1 + t^2)", "1", 1.0);
double one(const Vec2&) { return 1.0; }

// Center value of -lap u = 1 on the unit square from the double sine series.
double poisson_center_series() {
  double sum = 0.0;
  for (int m = 1; m < 400; m += 2)
    for (int n = 1; n < 400; n += 2) {
      const double sign = ((m + n) / 2 - 1) % 2 == 0 ? 1.0 : -1.0;
      sum += sign * 16.0 / (std::pow(M_PI, 4) * m * n * (m * m + n * n));
    }
  return sum;
}

}  // namespace

TEST(Homogenized, SeriesOracleMatchesTheFrozenCenterValue) {
  EXPECT_NEAR(poisson_center_series(), 0.0736713, 1e-6);
}

TEST(Homogenized, ConstantTensorCenterValue) {
  for (double alpha : {1.0, 2.5}) {
    const auto sol = solve_homogenized(constant_table(Mat2::identity(alpha)), one, kUnit);
    const double ref = poisson_center_series() / alpha;
    EXPECT_NEAR(*evaluate(sol.u1, {0.5, 0.5}), ref, 0.005 * ref);
    EXPECT_EQ(sol.iterations, 1);
    EXPECT_LE(sol.residual, 1e-8);
  }
}

TEST(Homogenized, ZeroSourceGivesZero) {
  HomogenizedOptions opt;
  opt.grid = 32;
  const auto sol = solve_homogenized(constant_table(Mat2::identity(1.0)), [](const Vec2&) { return 0.0; }, kUnit, opt);
  for (double v : sol.u1.values) EXPECT_EQ(v, 0.0);
}

TEST(Homogenized, StateIndependentTableTakesOneIteration) {
  const auto cm = std::make_shared<CellMesh>(ReferenceCell(), 8);
  const auto table = tabulate(kLinear, -0.1, 0.3, 5, *cm);
  EXPECT_TRUE(state_independent(table));
  HomogenizedOptions opt;
  opt.grid = 64;
  const auto sol = solve_homogenized(table, one, kUnit, opt);
  EXPECT_EQ(sol.iterations, 1);
  ASSERT_EQ(sol.trace.size(), 1u);
  EXPECT_EQ(sol.trace[0], 0.0);
}

TEST(Homogenized, PicardConvergesWithDirichletAndSmallResidual) {
  const auto cm = std::make_shared<CellMesh>(ReferenceCell(), 8);
  const auto table = tabulate(kSaturating, -0.05, 0.25, 9, *cm);
  EXPECT_FALSE(state_independent(table));
  HomogenizedOptions opt;
  opt.grid = 64;
  const auto sol = solve_homogenized(table, one, kUnit, opt);
  EXPECT_GT(sol.iterations, 1);
  EXPECT_LE(sol.iterations, 50);
  EXPECT_LE(sol.trace.back(), 1e-8);
  EXPECT_LE(sol.residual, 1e-7);
  EXPECT_EQ(sol.clamped, 0);
  const FeSpace& s = *sol.u1.space;
  for (int d = 0; d < s.num_dofs(); ++d) {
    if (s.grid().on_boundary(s.dof_node(d))) {
      EXPECT_EQ(sol.u1.values[static_cast<std::size_t>(d)], 0.0);
    }
  }
}

TEST(Homogenized, NonCoerciveTableIsRejected) {
  EXPECT_THROW(solve_homogenized(constant_table(Mat2::identity(-1.0)), one, kUnit), CellProblemError);
}

TEST(Homogenized, OffsetCoefficientExamples) {
  EXPECT_NEAR(offset_coefficient(ReferenceCell(), kLinear), 0.125, 1e-14);
  EXPECT_NEAR(offset_coefficient(ReferenceCell(), CoefficientModel::isotropic("1", "2")), 0.0625, 1e-14);
  EXPECT_THROW(offset_coefficient(ReferenceCell(), CoefficientModel::isotropic("1", "0")), CellProblemError);
  EXPECT_THROW(offset_coefficient(ReferenceCell::without_inclusion(), kLinear), GeometryError);
}

TEST(Homogenized, ReconstructU2IsAffine) {
  HomogenizedOptions opt;
  opt.grid = 16;
  const auto sol = solve_homogenized(constant_table(Mat2::identity(1.0)), one, kUnit, opt);
  const auto u2 = reconstruct_u2(sol.u1, one, 0.125);
  for (std::size_t i = 0; i < u2.values.size(); ++i) EXPECT_DOUBLE_EQ(u2.values[i], sol.u1.values[i] + 0.125);
  const auto same = reconstruct_u2(sol.u1, [](const Vec2&) { return 0.0; }, 0.125);
  EXPECT_EQ(same.values, sol.u1.values);
}

// Fine fields manufactured from an affine u1: the jump residual is the
// offset norm and the gradient residuals vanish. A constant u1 also makes
// the unfolded distances exact.
TEST(Homogenized, SyntheticFineSolutionGivesExactResiduals) {
  const auto mesh = std::make_shared<EpsMesh>(build_tiling(ReferenceCell(), kUnit, 0.125), 4);
  const auto cm = mesh->cell_mesh_ptr();
  const auto table = tabulate(kLinear, 0.0, 1.0, 2, *cm);
  auto u1 = [](const Vec2& x) { return 0.3 + x[0] + 2.0 * x[1]; };
  HomogenizedSolution hom;
  hom.u1 = interpolate(macro_space(kUnit, 32), u1);
  FineSolution fine;
  fine.eps = 0.125;
  fine.mesh = mesh;
  fine.u1 = interpolate(mesh->space(Component::matrix), u1);
  fine.u2 = interpolate(mesh->space(Component::inclusion), u1);
  const auto row = two_scale_residuals(fine, hom, table, 0.125, one);
  EXPECT_NEAR(row.r_jump, 0.125, 1e-12);
  EXPECT_NEAR(row.oscillation, 0.0, 1e-12);
  // Mean gradient (1, 2) on Omega x Y2.
  EXPECT_NEAR(row.mean_energy, 5.0 * 0.25, 1e-10);
  EXPECT_LE(row.grad_error, 1e-6);

  auto c = [](const Vec2&) { return 0.3; };
  hom.u1 = interpolate(macro_space(kUnit, 32), c);
  fine.u1 = interpolate(mesh->space(Component::matrix), c);
  fine.u2 = interpolate(mesh->space(Component::inclusion), c);
  const auto flat = two_scale_residuals(fine, hom, table, 0.125, one);
  EXPECT_LE(flat.e1, 1e-6);
  EXPECT_NEAR(flat.e2, 0.125 * std::sqrt(cell_measures(ReferenceCell()).inclusion), 1e-9);
}

TEST(Homogenized, ShortLadderDecreasesAndCorrectorHelps) {
  const auto cm = std::make_shared<CellMesh>(ReferenceCell(), 8);
  const auto table = tabulate(kLinear, -0.05, 0.25, 5, *cm);
  const auto hom = solve_homogenized(table, one, kUnit);
  const double c = offset_coefficient(ReferenceCell(), kLinear);
  std::vector<TwoScaleRow> rows;
  for (double eps : {0.25, 0.125}) {
    const auto mesh = std::make_shared<EpsMesh>(build_tiling(ReferenceCell(), kUnit, eps), 8);
    rows.push_back(two_scale_residuals(solve_fine(mesh, kLinear, SourceTerm::expression("1")), hom, table, c, one));
  }
  EXPECT_LT(rows[1].e1, rows[0].e1);
  EXPECT_LT(rows[1].r_jump, rows[0].r_jump);
  EXPECT_LT(rows[1].oscillation, rows[0].oscillation);
  EXPECT_LT(rows[1].grad_error_corrected, rows[1].grad_error);
}

TEST(Homogenized, LimitSystemResidualIsSmall) {
  const auto cm = std::make_shared<CellMesh>(ReferenceCell(), 8);
  const auto table = tabulate(kSaturating, -0.05, 0.25, 9, *cm);
  HomogenizedOptions opt;
  opt.grid = 64;
  const auto hom = solve_homogenized(table, one, kUnit, opt);
  const auto r = limit_system_residual(hom, table, kSaturating, *cm, one, 4, 4);
  EXPECT_LE(r.macro, 1e-6);
  EXPECT_LE(r.micro, 1e-8);
}

TEST(Homogenized, TruncationTailDecreasesInK) {
  HomogenizedOptions opt;
  opt.grid = 32;
  const auto table = constant_table(Mat2::identity(1.0));
  const auto sol = solve_homogenized(table, one, kUnit, opt);
  const auto tail = homogenized_truncation_tail(sol, table, {0.02, 0.05, 0.1, 1.0, 2.0});
  for (std::size_t i = 1; i < tail.size(); ++i) EXPECT_LT(tail[i], tail[i - 1]);
  EXPECT_NEAR(tail[4] * 2.0, tail[3], 1e-14);
}
