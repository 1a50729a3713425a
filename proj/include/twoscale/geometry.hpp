#pragma once

// Reference cell, inclusion geometry and the epsilon-paving of a box domain.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace twoscale {

inline constexpr int kDim = 2;

using Vec2 = std::array<double, 2>;
using Index2 = std::array<int, 2>;

class GeometryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Axis-aligned box [lo, hi].
struct Box {
  Vec2 lo{0.0, 0.0};
  Vec2 hi{1.0, 1.0};

  double extent(int axis) const { return hi[axis] - lo[axis]; }
  double measure() const { return extent(0) * extent(1); }
  double perimeter() const { return 2.0 * (extent(0) + extent(1)); }
  Vec2 center() const { return {0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1])}; }

  bool contains(const Vec2& p) const {
    return p[0] >= lo[0] && p[0] <= hi[0] && p[1] >= lo[1] && p[1] <= hi[1];
  }
  bool strictly_contains(const Vec2& p) const {
    return p[0] > lo[0] && p[0] < hi[0] && p[1] > lo[1] && p[1] < hi[1];
  }

  friend bool operator==(const Box&, const Box&) = default;
};

/// The periodicity cell Y = [0,l1) x [0,l2) with an axis-aligned box
/// inclusion Y2. The inclusion is stored as per-axis fractions of the
/// periods; an empty inclusion (Y2 = {}) is a supported degenerate mode in
/// which Y1 = Y and the interface is empty.
class ReferenceCell {
 public:
  ReferenceCell() : ReferenceCell({1.0, 1.0}, {0.25, 0.25}, {0.75, 0.75}) {}

  ReferenceCell(Vec2 periods, Vec2 inclusion_low, Vec2 inclusion_high)
      : periods_(periods), low_(inclusion_low), high_(inclusion_high) {
    for (int a = 0; a < kDim; ++a) {
      if (!(periods_[a] > 0.0) || !std::isfinite(periods_[a]))
        throw GeometryError("cell period must be positive and finite");
    }
    const bool empty = low_ == high_;
    if (empty) {
      has_inclusion_ = false;
      return;
    }
    for (int a = 0; a < kDim; ++a) {
      if (!(low_[a] > 0.0 && low_[a] < high_[a] && high_[a] < 1.0))
        throw GeometryError(
            "inclusion fractions must satisfy 0 < low < high < 1 on every axis");
    }
    has_inclusion_ = true;
  }

  static ReferenceCell without_inclusion(Vec2 periods = {1.0, 1.0}) {
    return ReferenceCell(periods, {0.5, 0.5}, {0.5, 0.5});
  }

  const Vec2& periods() const { return periods_; }
  double period(int axis) const { return periods_[axis]; }
  bool has_inclusion() const { return has_inclusion_; }
  const Vec2& inclusion_low_fraction() const { return low_; }
  const Vec2& inclusion_high_fraction() const { return high_; }

  Box cell_box() const { return Box{{0.0, 0.0}, periods_}; }

  /// Closed inclusion box in cell coordinates (degenerate if empty).
  Box inclusion_box() const {
    return Box{{low_[0] * periods_[0], low_[1] * periods_[1]},
               {high_[0] * periods_[0], high_[1] * periods_[1]}};
  }

  bool in_inclusion(const Vec2& y) const {
    return has_inclusion_ && inclusion_box().strictly_contains(y);
  }

  /// Reduces y modulo the periods into [0, l).
  Vec2 reduce(const Vec2& y) const {
    Vec2 r{};
    for (int a = 0; a < kDim; ++a) {
      double v = std::fmod(y[a], periods_[a]);
      if (v < 0.0) v += periods_[a];
      if (v >= periods_[a]) v = 0.0;
      r[a] = v;
    }
    return r;
  }

  friend bool operator==(const ReferenceCell& a, const ReferenceCell& b) {
    return a.periods_ == b.periods_ && a.has_inclusion_ == b.has_inclusion_ &&
           (!a.has_inclusion_ || (a.low_ == b.low_ && a.high_ == b.high_));
  }

 private:
  Vec2 periods_;
  Vec2 low_;
  Vec2 high_;
  bool has_inclusion_ = true;
};

struct CellMeasures {
  double cell = 0.0;       // |Y|
  double matrix = 0.0;     // |Y1|
  double inclusion = 0.0;  // |Y2|
  double interface = 0.0;  // |Gamma|
};

inline CellMeasures cell_measures(const ReferenceCell& cell) {
  CellMeasures m;
  m.cell = cell.period(0) * cell.period(1);
  if (cell.has_inclusion()) {
    const Box inc = cell.inclusion_box();
    m.inclusion = inc.measure();
    m.interface = inc.perimeter();
  }
  m.matrix = m.cell - m.inclusion;
  return m;
}

enum class TilingStatus { ok, empty_paving };

/// Result of locating a point of the paved region: x = eps*(k.l) + eps*y.
struct CellLocation {
  Index2 k{};
  Vec2 y{};
};

/// The eps-scaled paving of a box domain by translates of the reference
/// cell. `full_cells` enumerates {k : eps(k_l + closure(Y)) in closure(Omega)}
/// and `inclusion_cells` enumerates {k : eps(k_l + closure(Y2)) in Omega};
/// both in row-major order (k2 outer, k1 inner).
class EpsilonTiling {
 public:
  EpsilonTiling(ReferenceCell cell, Box domain, double eps)
      : cell_(std::move(cell)), domain_(domain), eps_(eps) {
    if (!(eps > 0.0) || !std::isfinite(eps)) throw GeometryError("eps must be positive");
    if (!(domain.extent(0) > 0.0 && domain.extent(1) > 0.0))
      throw GeometryError("domain box is degenerate");
    enumerate();
  }

  const ReferenceCell& cell() const { return cell_; }
  const Box& domain() const { return domain_; }
  double eps() const { return eps_; }
  TilingStatus status() const { return full_cells_.empty() ? TilingStatus::empty_paving : TilingStatus::ok; }

  const std::vector<Index2>& full_cells() const { return full_cells_; }
  const std::vector<Index2>& inclusion_cells() const { return inclusion_cells_; }

  /// Index into full_cells(), or -1.
  int full_cell_index(const Index2& k) const { return lookup(full_lookup_, k); }
  /// Index into inclusion_cells(), or -1.
  int inclusion_cell_index(const Index2& k) const { return lookup(inclusion_lookup_, k); }

  bool in_full(const Index2& k) const { return full_cell_index(k) >= 0; }
  bool in_inclusion_set(const Index2& k) const { return inclusion_cell_index(k) >= 0; }

  /// Cells whose inclusion lies in Omega but whose full cell does not.
  std::vector<Index2> boundary_inclusion_cells() const {
    std::vector<Index2> out;
    for (const auto& k : inclusion_cells_)
      if (!in_full(k)) out.push_back(k);
    return out;
  }

  Box cell_box(const Index2& k) const {
    Box b;
    for (int a = 0; a < kDim; ++a) {
      b.lo[a] = eps_ * k[a] * cell_.period(a);
      b.hi[a] = eps_ * (k[a] + 1) * cell_.period(a);
    }
    return b;
  }

  Box inclusion_box(const Index2& k) const {
    const Box inc = cell_.inclusion_box();
    Box b;
    for (int a = 0; a < kDim; ++a) {
      b.lo[a] = eps_ * (k[a] * cell_.period(a) + inc.lo[a]);
      b.hi[a] = eps_ * (k[a] * cell_.period(a) + inc.hi[a]);
    }
    return b;
  }

  bool exact_paving() const {
    return std::abs(lambda_measure()) <= 1e-12 * domain_.measure();
  }

  double cell_measure() const { return eps_ * eps_ * cell_measures(cell_).cell; }
  /// |hat Omega_eps|
  double paved_measure() const { return static_cast<double>(full_cells_.size()) * cell_measure(); }
  /// |Lambda_eps|
  double lambda_measure() const { return domain_.measure() - paved_measure(); }
  /// |Omega_2^eps|
  double inclusion_measure() const {
    return static_cast<double>(inclusion_cells_.size()) * eps_ * eps_ * cell_measures(cell_).inclusion;
  }
  /// |Omega_1^eps|
  double matrix_measure() const { return domain_.measure() - inclusion_measure(); }
  /// |Gamma^eps|
  double interface_measure() const {
    return static_cast<double>(inclusion_cells_.size()) * eps_ * cell_measures(cell_).interface;
  }

  /// Locates x in the paving with the left-closed convention
  /// k = floor(x / (eps l)), y = x/eps - k.l in [0, l). Returns nullopt for
  /// points outside hat Omega_eps (i.e. in Lambda_eps or outside Omega).
  std::optional<CellLocation> locate(const Vec2& x) const {
    CellLocation loc;
    for (int a = 0; a < kDim; ++a) {
      const double l = cell_.period(a);
      const double q = x[a] / (eps_ * l);
      int k = static_cast<int>(std::floor(q));
      double y = x[a] / eps_ - k * l;
      if (y < 0.0) y = 0.0;
      if (y >= l) {
        ++k;
        y = std::max(0.0, y - l);
      }
      loc.k[a] = k;
      loc.y[a] = y;
    }
    if (!in_full(loc.k)) return std::nullopt;
    return loc;
  }

  /// Inverse of locate: eps k_l + eps y.
  Vec2 global_point(const Index2& k, const Vec2& y) const {
    return {eps_ * k[0] * cell_.period(0) + eps_ * y[0], eps_ * k[1] * cell_.period(1) + eps_ * y[1]};
  }

 private:
  struct Lookup {
    Index2 lo{0, 0};
    Index2 count{0, 0};
    std::vector<int> index;
  };

  static int lookup(const Lookup& t, const Index2& k) {
    const int i = k[0] - t.lo[0];
    const int j = k[1] - t.lo[1];
    if (i < 0 || j < 0 || i >= t.count[0] || j >= t.count[1]) return -1;
    return t.index[static_cast<std::size_t>(j) * t.count[0] + i];
  }

  void enumerate() {
    const double tol = 1e-12 * std::max({1.0, std::abs(domain_.lo[0]), std::abs(domain_.hi[0]),
                                         std::abs(domain_.lo[1]), std::abs(domain_.hi[1])});
    Index2 kmin{}, kmax{};
    for (int a = 0; a < kDim; ++a) {
      const double step = eps_ * cell_.period(a);
      kmin[a] = static_cast<int>(std::floor(domain_.lo[a] / step)) - 1;
      kmax[a] = static_cast<int>(std::ceil(domain_.hi[a] / step)) + 1;
    }
    for (Lookup* t : {&full_lookup_, &inclusion_lookup_}) {
      t->lo = kmin;
      t->count = {kmax[0] - kmin[0] + 1, kmax[1] - kmin[1] + 1};
      t->index.assign(static_cast<std::size_t>(t->count[0]) * t->count[1], -1);
    }
    for (int k2 = kmin[1]; k2 <= kmax[1]; ++k2) {
      for (int k1 = kmin[0]; k1 <= kmax[0]; ++k1) {
        const Index2 k{k1, k2};
        const Box cb = cell_box(k);
        bool full = true;
        for (int a = 0; a < kDim; ++a)
          full = full && cb.lo[a] >= domain_.lo[a] - tol && cb.hi[a] <= domain_.hi[a] + tol;
        const std::size_t slot =
            static_cast<std::size_t>(k2 - kmin[1]) * full_lookup_.count[0] + (k1 - kmin[0]);
        if (full) {
          full_lookup_.index[slot] = static_cast<int>(full_cells_.size());
          full_cells_.push_back(k);
        }
        if (cell_.has_inclusion()) {
          const Box ib = inclusion_box(k);
          bool inside = true;
          for (int a = 0; a < kDim; ++a)
            inside = inside && ib.lo[a] > domain_.lo[a] + tol && ib.hi[a] < domain_.hi[a] - tol;
          if (inside) {
            inclusion_lookup_.index[slot] = static_cast<int>(inclusion_cells_.size());
            inclusion_cells_.push_back(k);
          }
        }
      }
    }
  }

  ReferenceCell cell_;
  Box domain_;
  double eps_;
  std::vector<Index2> full_cells_;
  std::vector<Index2> inclusion_cells_;
  Lookup full_lookup_;
  Lookup inclusion_lookup_;
};

inline EpsilonTiling build_tiling(const ReferenceCell& cell, const Box& domain, double eps) {
  return EpsilonTiling(cell, domain, eps);
}

}  // namespace twoscale
