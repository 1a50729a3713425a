#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>
#include <utility>

#include "twoscale/expression.hpp"
#include "twoscale/geometry.hpp"

namespace twoscale {

/// 2x2 matrix, row-major.
struct Mat2 {
  double a11 = 0.0, a12 = 0.0, a21 = 0.0, a22 = 0.0;

  static Mat2 identity(double s = 1.0) { return {s, 0.0, 0.0, s}; }
  Vec2 apply(const Vec2& v) const { return {a11 * v[0] + a12 * v[1], a21 * v[0] + a22 * v[1]}; }
  /// (A a) . b
  double form(const Vec2& a, const Vec2& b) const {
    const Vec2 Aa = apply(a);
    return Aa[0] * b[0] + Aa[1] * b[1];
  }
  Mat2 operator*(double s) const { return {a11 * s, a12 * s, a21 * s, a22 * s}; }
  Mat2 operator+(const Mat2& o) const { return {a11 + o.a11, a12 + o.a12, a21 + o.a21, a22 + o.a22}; }
  Mat2 operator-(const Mat2& o) const { return {a11 - o.a11, a12 - o.a12, a21 - o.a21, a22 - o.a22}; }
  double max_abs() const { return std::max({std::abs(a11), std::abs(a12), std::abs(a21), std::abs(a22)}); }
  /// Frobenius norm.
  double norm() const { return std::sqrt(a11 * a11 + a12 * a12 + a21 * a21 + a22 * a22); }

  /// Smallest eigenvalue of the symmetric part; equals min A xi.xi / |xi|^2.
  double min_sym_eigenvalue() const {
    const double s = 0.5 * (a12 + a21);
    const double m = 0.5 * (a11 + a22);
    const double d = std::sqrt(0.25 * (a11 - a22) * (a11 - a22) + s * s);
    return m - d;
  }
  double max_sym_eigenvalue() const {
    const double s = 0.5 * (a12 + a21);
    const double m = 0.5 * (a11 + a22);
    const double d = std::sqrt(0.25 * (a11 - a22) * (a11 - a22) + s * s);
    return m + d;
  }

  friend bool operator==(const Mat2&, const Mat2&) = default;
};

struct CoercivityReport {
  double min_eigenvalue = std::numeric_limits<double>::infinity();
  double max_norm = 0.0;  // sampled M_r
  double min_h = std::numeric_limits<double>::infinity();
  bool coercive(double alpha, double tol = 1e-12) const { return min_eigenvalue >= alpha - tol; }
};

/// Matrix field A(y, t) and interface weight h(y) given as expressions over
/// (y1, y2, t). Arguments y are reduced modulo the cell periods before
/// evaluation, so the fields are exactly Y-periodic.
class CoefficientModel {
 public:
  CoefficientModel() : CoefficientModel(Expression::constant(1.0), Expression::constant(0.0),
                                        Expression::constant(0.0), Expression::constant(1.0),
                                        Expression::constant(1.0)) {}

  CoefficientModel(Expression a11, Expression a12, Expression a21, Expression a22, Expression h,
                   double alpha = 0.0, Vec2 periods = {1.0, 1.0})
      : a_{std::move(a11), std::move(a12), std::move(a21), std::move(a22)}, h_(std::move(h)),
        alpha_(alpha), periods_(periods) {
    for (const auto& e : a_) state_dependent_ = state_dependent_ || e.depends_on("t");
    symmetric_ = a_[1].same_tree(a_[2]);
    if (h_.depends_on("t")) throw ExpressionError("h must not depend on t");
  }

  /// Isotropic model A = a(y,t) I.
  static CoefficientModel isotropic(std::string_view a, std::string_view h = "1", double alpha = 0.0,
                                    Vec2 periods = {1.0, 1.0}) {
    const Expression ea = Expression::parse(a);
    return CoefficientModel(ea, Expression::constant(0.0), Expression::constant(0.0), ea, Expression::parse(h),
                            alpha, periods);
  }

  static CoefficientModel from_text(std::string_view a11, std::string_view a12, std::string_view a21,
                                    std::string_view a22, std::string_view h, double alpha = 0.0,
                                    Vec2 periods = {1.0, 1.0}) {
    return CoefficientModel(Expression::parse(a11), Expression::parse(a12), Expression::parse(a21),
                            Expression::parse(a22), Expression::parse(h), alpha, periods);
  }

  void set_periods(const Vec2& p) { periods_ = p; }
  const Vec2& periods() const { return periods_; }
  double alpha() const { return alpha_; }
  void set_alpha(double a) { alpha_ = a; }
  bool depends_on_state() const { return state_dependent_; }
  bool symmetric() const { return symmetric_; }
  const Expression& entry(int i) const { return a_[static_cast<std::size_t>(i)]; }
  const Expression& h_expression() const { return h_; }

  Vec2 reduce(const Vec2& y) const {
    Vec2 r{};
    for (int a = 0; a < kDim; ++a) {
      double v = std::fmod(y[static_cast<std::size_t>(a)], periods_[static_cast<std::size_t>(a)]);
      if (v < 0.0) v += periods_[static_cast<std::size_t>(a)];
      r[static_cast<std::size_t>(a)] = v;
    }
    return r;
  }

  Mat2 A(const Vec2& y, double t) const {
    const Vec2 r = reduce(y);
    const double v[3] = {r[0], r[1], t};
    Mat2 m;
    double* out[4] = {&m.a11, &m.a12, &m.a21, &m.a22};
    for (std::size_t i = 0; i < 4; ++i) *out[i] = a_[i].evaluate(v);
    return m;
  }

  double h(const Vec2& y) const {
    const Vec2 r = reduce(y);
    const double v[3] = {r[0], r[1], 0.0};
    return h_.evaluate(v);
  }

  /// Same model with A replaced by c A (h unchanged).
  CoefficientModel scaled(double c) const {
    auto sc = [c](const Expression& e) {
      char buf[40];
      std::snprintf(buf, sizeof buf, "%.17g", c);
      return Expression::parse(std::string(buf) + " * (" + e.print() + ")");
    };
    return CoefficientModel(sc(a_[0]), sc(a_[1]), sc(a_[2]), sc(a_[3]), h_, alpha_ * c, periods_);
  }

  /// Samples A on an n x n grid of Y times nt values of t, and h on the
  /// inclusion boundary of `cell`.
  CoercivityReport sample(const ReferenceCell& cell, double t_min, double t_max, int n = 16, int nt = 11) const {
    CoercivityReport r;
    for (int it = 0; it < nt; ++it) {
      const double t = nt == 1 ? t_min : t_min + (t_max - t_min) * it / (nt - 1);
      for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
          const Vec2 y{cell.period(0) * (i + 0.5) / n, cell.period(1) * (j + 0.5) / n};
          const Mat2 m = A(y, t);
          r.min_eigenvalue = std::min(r.min_eigenvalue, m.min_sym_eigenvalue());
          r.max_norm = std::max(r.max_norm, m.norm());
        }
    }
    if (cell.has_inclusion()) {
      const Box b = cell.inclusion_box();
      for (int i = 0; i <= 4 * n; ++i) {
        const double s = static_cast<double>(i) / (4 * n);
        const Vec2 pts[4] = {{b.lo[0] + s * b.extent(0), b.lo[1]},
                             {b.lo[0] + s * b.extent(0), b.hi[1]},
                             {b.lo[0], b.lo[1] + s * b.extent(1)},
                             {b.hi[0], b.lo[1] + s * b.extent(1)}};
        for (const auto& p : pts) r.min_h = std::min(r.min_h, h(p));
      }
    }
    return r;
  }

 private:
  std::array<Expression, 4> a_;
  Expression h_;
  double alpha_;
  Vec2 periods_;
  bool state_dependent_ = false;
  bool symmetric_ = false;
};

}  // namespace twoscale
