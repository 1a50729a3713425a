#pragma once

// Compressed-row sparse matrices, triplet assembly, Dirichlet reduction and
// the Jacobi-preconditioned conjugate gradient solver.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace twoscale {

class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& msg, std::vector<double> history = {})
      : std::runtime_error(msg), history_(std::move(history)) {}
  /// Relative residual per iteration, when available.
  const std::vector<double>& history() const { return history_; }

 private:
  std::vector<double> history_;
};

class NotPositiveDefinite : public SolverError {
 public:
  using SolverError::SolverError;
};

class SingularSystem : public SolverError {
 public:
  using SolverError::SolverError;
};

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

class CsrMatrix {
 public:
  CsrMatrix() = default;
  CsrMatrix(int rows, int cols, std::vector<int> row_ptr, std::vector<int> col, std::vector<double> val)
      : rows_(rows), cols_(cols), row_ptr_(std::move(row_ptr)), col_(std::move(col)), val_(std::move(val)) {}

  static CsrMatrix identity(int n) {
    std::vector<int> rp(static_cast<std::size_t>(n) + 1), c(static_cast<std::size_t>(n));
    std::iota(rp.begin(), rp.end(), 0);
    std::iota(c.begin(), c.end(), 0);
    return CsrMatrix(n, n, std::move(rp), std::move(c), std::vector<double>(static_cast<std::size_t>(n), 1.0));
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::size_t nonzeros() const { return val_.size(); }
  const std::vector<int>& row_ptr() const { return row_ptr_; }
  const std::vector<int>& col() const { return col_; }
  const std::vector<double>& values() const { return val_; }
  std::vector<double>& values() { return val_; }

  double at(int i, int j) const {
    const auto b = col_.begin() + row_ptr_[static_cast<std::size_t>(i)];
    const auto e = col_.begin() + row_ptr_[static_cast<std::size_t>(i) + 1];
    const auto it = std::lower_bound(b, e, j);
    if (it == e || *it != j) return 0.0;
    return val_[static_cast<std::size_t>(it - col_.begin())];
  }

  void multiply(std::span<const double> x, std::span<double> y) const {
    for (int i = 0; i < rows_; ++i) {
      double s = 0.0;
      for (int p = row_ptr_[static_cast<std::size_t>(i)]; p < row_ptr_[static_cast<std::size_t>(i) + 1]; ++p)
        s += val_[static_cast<std::size_t>(p)] * x[static_cast<std::size_t>(col_[static_cast<std::size_t>(p)])];
      y[static_cast<std::size_t>(i)] = s;
    }
  }

  std::vector<double> operator*(std::span<const double> x) const {
    std::vector<double> y(static_cast<std::size_t>(rows_));
    multiply(x, y);
    return y;
  }

  std::vector<double> diagonal() const {
    std::vector<double> d(static_cast<std::size_t>(std::min(rows_, cols_)), 0.0);
    for (int i = 0; i < static_cast<int>(d.size()); ++i) d[static_cast<std::size_t>(i)] = at(i, i);
    return d;
  }

  /// max |a_ij - a_ji| / max |a_ij|
  double asymmetry() const {
    double amax = 0.0, dmax = 0.0;
    for (int i = 0; i < rows_; ++i)
      for (int p = row_ptr_[static_cast<std::size_t>(i)]; p < row_ptr_[static_cast<std::size_t>(i) + 1]; ++p) {
        const double v = val_[static_cast<std::size_t>(p)];
        amax = std::max(amax, std::abs(v));
        dmax = std::max(dmax, std::abs(v - at(col_[static_cast<std::size_t>(p)], i)));
      }
    return amax > 0.0 ? dmax / amax : 0.0;
  }

  CsrMatrix scaled(double s) const {
    CsrMatrix m = *this;
    for (auto& v : m.val_) v *= s;
    return m;
  }

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<int> row_ptr_{0};
  std::vector<int> col_;
  std::vector<double> val_;
};

/// Coordinate-format accumulator. Duplicate entries are summed in insertion
/// order, so compress() is bitwise reproducible for a fixed insertion order.
class TripletList {
 public:
  TripletList(int rows, int cols) : rows_(rows), cols_(cols) {}

  void add(int i, int j, double v) { entries_.push_back({i, j, v}); }
  void reserve(std::size_t n) { entries_.reserve(n); }
  int rows() const { return rows_; }
  int cols() const { return cols_; }

  void append(const TripletList& o, int row_offset = 0, int col_offset = 0, double scale = 1.0) {
    for (const auto& e : o.entries_) entries_.push_back({e.i + row_offset, e.j + col_offset, scale * e.v});
  }

  CsrMatrix compress() const {
    std::vector<int> count(static_cast<std::size_t>(rows_) + 1, 0);
    for (const auto& e : entries_) ++count[static_cast<std::size_t>(e.i) + 1];
    for (int i = 0; i < rows_; ++i) count[static_cast<std::size_t>(i) + 1] += count[static_cast<std::size_t>(i)];
    // Counting sort by row keeps insertion order within a row.
    std::vector<Entry> sorted(entries_.size());
    std::vector<int> next(count.begin(), count.end() - 1);
    for (const auto& e : entries_) sorted[static_cast<std::size_t>(next[static_cast<std::size_t>(e.i)]++)] = e;

    std::vector<int> rp(static_cast<std::size_t>(rows_) + 1, 0), col;
    std::vector<double> val;
    col.reserve(entries_.size());
    val.reserve(entries_.size());
    for (int i = 0; i < rows_; ++i) {
      auto b = sorted.begin() + count[static_cast<std::size_t>(i)];
      auto e = sorted.begin() + count[static_cast<std::size_t>(i) + 1];
      std::stable_sort(b, e, [](const Entry& x, const Entry& y) { return x.j < y.j; });
      for (auto it = b; it != e; ++it) {
        if (!col.empty() && static_cast<int>(col.size()) > rp[static_cast<std::size_t>(i)] && col.back() == it->j)
          val.back() += it->v;
        else {
          col.push_back(it->j);
          val.push_back(it->v);
        }
      }
      rp[static_cast<std::size_t>(i) + 1] = static_cast<int>(col.size());
    }
    return CsrMatrix(rows_, cols_, std::move(rp), std::move(col), std::move(val));
  }

 private:
  struct Entry {
    int i;
    int j;
    double v;
  };
  int rows_;
  int cols_;
  std::vector<Entry> entries_;
};

inline CsrMatrix add(const CsrMatrix& a, const CsrMatrix& b, double sb = 1.0) {
  TripletList t(a.rows(), a.cols());
  t.reserve(a.nonzeros() + b.nonzeros());
  for (int i = 0; i < a.rows(); ++i)
    for (int p = a.row_ptr()[static_cast<std::size_t>(i)]; p < a.row_ptr()[static_cast<std::size_t>(i) + 1]; ++p)
      t.add(i, a.col()[static_cast<std::size_t>(p)], a.values()[static_cast<std::size_t>(p)]);
  for (int i = 0; i < b.rows(); ++i)
    for (int p = b.row_ptr()[static_cast<std::size_t>(i)]; p < b.row_ptr()[static_cast<std::size_t>(i) + 1]; ++p)
      t.add(i, b.col()[static_cast<std::size_t>(p)], sb * b.values()[static_cast<std::size_t>(p)]);
  return t.compress();
}

/// Elimination of pinned (Dirichlet) unknowns from K u = b. The reduced
/// system acts on the free unknowns only; the pinned values are moved to the
/// right-hand side.
class ConstrainedSystem {
 public:
  ConstrainedSystem(const CsrMatrix& full, std::span<const double> rhs, const std::vector<bool>& pinned,
                    std::span<const double> pinned_values)
      : n_(full.rows()), pinned_values_(pinned_values.begin(), pinned_values.end()) {
    map_.assign(static_cast<std::size_t>(n_), -1);
    for (int i = 0; i < n_; ++i)
      if (!pinned[static_cast<std::size_t>(i)]) {
        map_[static_cast<std::size_t>(i)] = static_cast<int>(free_.size());
        free_.push_back(i);
      }
    const int nf = static_cast<int>(free_.size());
    TripletList t(nf, nf);
    t.reserve(full.nonzeros());
    rhs_.assign(static_cast<std::size_t>(nf), 0.0);
    for (int r = 0; r < nf; ++r) {
      const int i = free_[static_cast<std::size_t>(r)];
      double b = rhs[static_cast<std::size_t>(i)];
      for (int p = full.row_ptr()[static_cast<std::size_t>(i)]; p < full.row_ptr()[static_cast<std::size_t>(i) + 1]; ++p) {
        const int j = full.col()[static_cast<std::size_t>(p)];
        const double v = full.values()[static_cast<std::size_t>(p)];
        const int c = map_[static_cast<std::size_t>(j)];
        if (c >= 0)
          t.add(r, c, v);
        else
          b -= v * pinned_values_[static_cast<std::size_t>(j)];
      }
      rhs_[static_cast<std::size_t>(r)] = b;
    }
    reduced_ = t.compress();
  }

  /// Convenience for homogeneous pins.
  ConstrainedSystem(const CsrMatrix& full, std::span<const double> rhs, const std::vector<bool>& pinned)
      : ConstrainedSystem(full, rhs, pinned, std::vector<double>(static_cast<std::size_t>(full.rows()), 0.0)) {}

  const CsrMatrix& matrix() const { return reduced_; }
  const std::vector<double>& rhs() const { return rhs_; }
  int free_count() const { return static_cast<int>(free_.size()); }

  std::vector<double> restrict_to_free(std::span<const double> full) const {
    std::vector<double> r(free_.size());
    for (std::size_t k = 0; k < free_.size(); ++k) r[k] = full[static_cast<std::size_t>(free_[k])];
    return r;
  }

  std::vector<double> expand(std::span<const double> reduced) const {
    std::vector<double> u = pinned_values_;
    u.resize(static_cast<std::size_t>(n_), 0.0);
    for (int i = 0; i < n_; ++i)
      if (map_[static_cast<std::size_t>(i)] < 0) u[static_cast<std::size_t>(i)] = pinned_values_[static_cast<std::size_t>(i)];
    for (std::size_t k = 0; k < free_.size(); ++k) u[static_cast<std::size_t>(free_[k])] = reduced[k];
    return u;
  }

 private:
  int n_;
  std::vector<double> pinned_values_;
  std::vector<int> map_;
  std::vector<int> free_;
  CsrMatrix reduced_;
  std::vector<double> rhs_;
};

struct CgOptions {
  double tolerance = 1e-10;
  int max_iterations = 50000;
  bool keep_history = true;
};

struct CgResult {
  std::vector<double> x;
  int iterations = 0;
  double relative_residual = 0.0;
  std::vector<double> history;
};

/// Conjugate gradients with diagonal (Jacobi) preconditioning. Converges when
/// ||b - A x|| <= tol ||b||. Throws NotPositiveDefinite on non-positive
/// curvature and SolverError (with the residual history) when the iteration
/// budget is exhausted.
inline CgResult solve_spd(const CsrMatrix& a, std::span<const double> b, const CgOptions& opt = {},
                          std::optional<std::span<const double>> guess = std::nullopt) {
  const std::size_t n = static_cast<std::size_t>(a.rows());
  if (a.rows() != a.cols() || b.size() != n) throw SolverError("solve_spd: dimension mismatch");
  CgResult res;
  res.x.assign(n, 0.0);
  const double bnorm = norm2(b);
  if (bnorm == 0.0) return res;

  std::vector<double> inv_diag = a.diagonal();
  for (std::size_t i = 0; i < n; ++i) {
    if (!(inv_diag[i] > 0.0))
      throw NotPositiveDefinite("solve_spd: non-positive diagonal entry at row " + std::to_string(i));
    inv_diag[i] = 1.0 / inv_diag[i];
  }

  std::vector<double> r(b.begin(), b.end()), z(n), p(n), q(n);
  if (guess && guess->size() == n) {
    res.x.assign(guess->begin(), guess->end());
    a.multiply(res.x, q);
    for (std::size_t i = 0; i < n; ++i) r[i] -= q[i];
  }
  double rnorm = norm2(r);
  if (rnorm <= opt.tolerance * bnorm) {
    res.relative_residual = rnorm / bnorm;
    return res;
  }
  for (std::size_t i = 0; i < n; ++i) z[i] = inv_diag[i] * r[i];
  p = z;
  double rz = dot(r, z);
  for (int it = 1; it <= opt.max_iterations; ++it) {
    a.multiply(p, q);
    const double pq = dot(p, q);
    if (!(pq > 0.0))
      throw NotPositiveDefinite("solve_spd: non-positive curvature p'Ap = " + std::to_string(pq) +
                                    " at iteration " + std::to_string(it),
                                std::move(res.history));
    const double alpha = rz / pq;
    for (std::size_t i = 0; i < n; ++i) {
      res.x[i] += alpha * p[i];
      r[i] -= alpha * q[i];
    }
    rnorm = norm2(r);
    res.iterations = it;
    res.relative_residual = rnorm / bnorm;
    if (opt.keep_history) res.history.push_back(res.relative_residual);
    if (res.relative_residual <= opt.tolerance) return res;
    for (std::size_t i = 0; i < n; ++i) z[i] = inv_diag[i] * r[i];
    const double rz_new = dot(r, z);
    const double beta = rz_new / rz;
    rz = rz_new;
    for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
  }
  throw SolverError("solve_spd: no convergence after " + std::to_string(opt.max_iterations) +
                        " iterations (relative residual " + std::to_string(res.relative_residual) + ")",
                    std::move(res.history));
}

/// Dense Cholesky factorization, row-major lower triangle.
class DenseCholesky {
 public:
  DenseCholesky() = default;
  explicit DenseCholesky(const CsrMatrix& a) : n_(a.rows()), l_(static_cast<std::size_t>(n_) * n_, 0.0) {
    for (int i = 0; i < n_; ++i)
      for (int p = a.row_ptr()[static_cast<std::size_t>(i)]; p < a.row_ptr()[static_cast<std::size_t>(i) + 1]; ++p)
        l_[idx(i, a.col()[static_cast<std::size_t>(p)])] = a.values()[static_cast<std::size_t>(p)];
    factor();
  }

  int size() const { return n_; }

  std::vector<double> solve(std::span<const double> b) const {
    std::vector<double> x(b.begin(), b.end());
    for (int i = 0; i < n_; ++i) {
      double s = x[static_cast<std::size_t>(i)];
      for (int k = 0; k < i; ++k) s -= l_[idx(i, k)] * x[static_cast<std::size_t>(k)];
      x[static_cast<std::size_t>(i)] = s / l_[idx(i, i)];
    }
    for (int i = n_ - 1; i >= 0; --i) {
      double s = x[static_cast<std::size_t>(i)];
      for (int k = i + 1; k < n_; ++k) s -= l_[idx(k, i)] * x[static_cast<std::size_t>(k)];
      x[static_cast<std::size_t>(i)] = s / l_[idx(i, i)];
    }
    return x;
  }

 private:
  std::size_t idx(int i, int j) const { return static_cast<std::size_t>(i) * static_cast<std::size_t>(n_) + static_cast<std::size_t>(j); }

  void factor() {
    for (int j = 0; j < n_; ++j) {
      double d = l_[idx(j, j)];
      for (int k = 0; k < j; ++k) d -= l_[idx(j, k)] * l_[idx(j, k)];
      if (!(d > 0.0)) throw NotPositiveDefinite("DenseCholesky: matrix is not positive definite");
      const double ljj = std::sqrt(d);
      l_[idx(j, j)] = ljj;
      for (int i = j + 1; i < n_; ++i) {
        double s = l_[idx(i, j)];
        for (int k = 0; k < j; ++k) s -= l_[idx(i, k)] * l_[idx(j, k)];
        l_[idx(i, j)] = s / ljj;
      }
    }
    for (int i = 0; i < n_; ++i)
      for (int j = i + 1; j < n_; ++j) l_[idx(i, j)] = 0.0;
  }

  int n_ = 0;
  std::vector<double> l_;
};

}  // namespace twoscale
