#pragma once

#include "stiga/common.hpp"

#include <Eigen/OrderingMethods>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include <algorithm>
#include <sstream>
#include <vector>

namespace stiga {

using Vector = Eigen::VectorXd;

/// Compressed sparse row matrix with sorted, duplicate-free columns per row.
class SparseMatrix {
 public:
  struct Triplet {
    Index row;
    Index col;
    double value;
  };

  SparseMatrix() = default;

  /// Pattern from per-row column lists; values start at zero.
  SparseMatrix(Index rows, Index cols, std::vector<std::vector<Index>> pattern) : rows_(rows), cols_(cols) {
    if (static_cast<Index>(pattern.size()) != rows) throw std::invalid_argument("SparseMatrix: pattern row count");
    row_ptr_.assign(rows + 1, 0);
    for (Index r = 0; r < rows; ++r) {
      auto& p = pattern[r];
      std::sort(p.begin(), p.end());
      p.erase(std::unique(p.begin(), p.end()), p.end());
      if (!p.empty() && (p.front() < 0 || p.back() >= cols)) throw std::out_of_range("SparseMatrix: column index");
      row_ptr_[r + 1] = row_ptr_[r] + static_cast<Index>(p.size());
    }
    col_idx_.reserve(row_ptr_.back());
    for (const auto& p : pattern) col_idx_.insert(col_idx_.end(), p.begin(), p.end());
    values_.assign(col_idx_.size(), 0.0);
  }

  /// Duplicates are summed.
  static SparseMatrix from_triplets(Index rows, Index cols, std::vector<Triplet> t) {
    std::sort(t.begin(), t.end(), [](const Triplet& a, const Triplet& b) {
      return a.row != b.row ? a.row < b.row : a.col < b.col;
    });
    std::vector<std::vector<Index>> pattern(rows);
    for (const auto& e : t) {
      if (e.row < 0 || e.row >= rows) throw std::out_of_range("SparseMatrix: row index");
      pattern[e.row].push_back(e.col);
    }
    SparseMatrix m(rows, cols, std::move(pattern));
    for (const auto& e : t) m.add(e.row, e.col, e.value);
    return m;
  }

  static SparseMatrix identity(Index n) {
    std::vector<Triplet> t;
    for (Index i = 0; i < n; ++i) t.push_back({i, i, 1.0});
    return from_triplets(n, n, std::move(t));
  }

  [[nodiscard]] Index rows() const { return rows_; }
  [[nodiscard]] Index cols() const { return cols_; }
  [[nodiscard]] Index nonzeros() const { return static_cast<Index>(values_.size()); }
  [[nodiscard]] const std::vector<Index>& row_ptr() const { return row_ptr_; }
  [[nodiscard]] const std::vector<Index>& col_idx() const { return col_idx_; }
  [[nodiscard]] const std::vector<double>& values() const { return values_; }
  [[nodiscard]] std::vector<double>& values() { return values_; }

  /// Position of (r, c) in the value array, or -1 if outside the pattern.
  [[nodiscard]] Index find(Index r, Index c) const {
    auto b = col_idx_.begin() + row_ptr_[r];
    auto e = col_idx_.begin() + row_ptr_[r + 1];
    auto it = std::lower_bound(b, e, c);
    return (it != e && *it == c) ? static_cast<Index>(it - col_idx_.begin()) : -1;
  }

  [[nodiscard]] double coeff(Index r, Index c) const {
    const Index k = find(r, c);
    return k < 0 ? 0.0 : values_[k];
  }

  void add(Index r, Index c, double v) {
    const Index k = find(r, c);
    if (k < 0) throw std::out_of_range("SparseMatrix: entry outside pattern");
    values_[k] += v;
  }

  [[nodiscard]] Vector multiply(const Vector& x) const {
    if (x.size() != cols_) throw std::invalid_argument("SparseMatrix: size mismatch in multiply");
    Vector y = Vector::Zero(rows_);
    for (Index r = 0; r < rows_; ++r) {
      double s = 0.0;
      for (Index k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) s += values_[k] * x(col_idx_[k]);
      y(r) = s;
    }
    return y;
  }

  [[nodiscard]] Eigen::SparseMatrix<double> to_eigen() const {
    std::vector<Eigen::Triplet<double>> t;
    t.reserve(values_.size());
    for (Index r = 0; r < rows_; ++r) {
      for (Index k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) t.emplace_back(r, col_idx_[k], values_[k]);
    }
    Eigen::SparseMatrix<double> m(rows_, cols_);
    m.setFromTriplets(t.begin(), t.end());
    return m;
  }

  [[nodiscard]] Eigen::MatrixXd to_dense() const {
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(rows_, cols_);
    for (Index r = 0; r < rows_; ++r) {
      for (Index k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) d(r, col_idx_[k]) += values_[k];
    }
    return d;
  }

  /// Rows `rsel` and columns `csel` (in the given order).
  [[nodiscard]] SparseMatrix submatrix(const std::vector<Index>& rsel, const std::vector<Index>& csel) const {
    std::vector<Index> cmap(cols_, -1);
    for (std::size_t j = 0; j < csel.size(); ++j) cmap[csel[j]] = static_cast<Index>(j);
    std::vector<Triplet> t;
    for (std::size_t i = 0; i < rsel.size(); ++i) {
      const Index r = rsel[i];
      for (Index k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) {
        const Index c = cmap[col_idx_[k]];
        if (c >= 0) t.push_back({static_cast<Index>(i), c, values_[k]});
      }
    }
    return from_triplets(static_cast<Index>(rsel.size()), static_cast<Index>(csel.size()), std::move(t));
  }

  /// (A + A^T) / 2.
  [[nodiscard]] SparseMatrix symmetric_part() const {
    std::vector<Triplet> t;
    t.reserve(2 * values_.size());
    for (Index r = 0; r < rows_; ++r) {
      for (Index k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) {
        t.push_back({r, col_idx_[k], 0.5 * values_[k]});
        t.push_back({col_idx_[k], r, 0.5 * values_[k]});
      }
    }
    return from_triplets(rows_, cols_, std::move(t));
  }

  /// Largest |A - A^T| entry.
  [[nodiscard]] double asymmetry() const {
    double worst = 0.0;
    for (Index r = 0; r < rows_; ++r) {
      for (Index k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) {
        worst = std::max(worst, std::abs(values_[k] - coeff(col_idx_[k], r)));
      }
    }
    return worst;
  }

  [[nodiscard]] double max_abs() const {
    double m = 0.0;
    for (double v : values_) m = std::max(m, std::abs(v));
    return m;
  }

 private:
  Index rows_ = 0;
  Index cols_ = 0;
  std::vector<Index> row_ptr_{0};
  std::vector<Index> col_idx_;
  std::vector<double> values_;
};

namespace detail {

inline double relative_residual(const SparseMatrix& A, const Vector& x, const Vector& b) {
  const double nb = b.norm();
  const double r = (A.multiply(x) - b).norm();
  return nb > 0.0 ? r / nb : r;
}

// One step of iterative refinement, then the residual contract.
template <class Solver>
Vector refine_and_check(const SparseMatrix& A, const Solver& solver, const Vector& b, Vector x, const char* name) {
  constexpr double kTol = 1e-10;
  if (detail::relative_residual(A, x, b) > kTol) {
    const Vector r = b - A.multiply(x);
    x += solver.solve(r);
  }
  const double res = detail::relative_residual(A, x, b);
  if (!(res <= kTol)) {
    std::ostringstream os;
    os << name << ": relative residual " << res << " exceeds " << kTol << " (matrix is singular or ill-conditioned)";
    throw SolverError(os.str());
  }
  return x;
}

}  // namespace detail

/// Sparse LU with COLAMD fill-reducing ordering.
inline Vector lu_solve(const SparseMatrix& A, const Vector& b) {
  if (A.rows() != A.cols()) throw std::invalid_argument("lu_solve: matrix is not square");
  if (b.size() != A.rows()) throw std::invalid_argument("lu_solve: size mismatch");
  if (A.rows() == 0) return Vector();
  Eigen::SparseMatrix<double> M = A.to_eigen();
  M.makeCompressed();
  Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> solver;
  solver.compute(M);
  if (solver.info() != Eigen::Success) throw SolverError("lu_solve: factorization failed: " + solver.lastErrorMessage());
  Vector x = solver.solve(b);
  if (solver.info() != Eigen::Success || !x.allFinite()) throw SolverError("lu_solve: singular pivot");
  return detail::refine_and_check(A, solver, b, std::move(x), "lu_solve");
}

/// LDL^T with AMD ordering for symmetric positive definite matrices. A pivot
/// that is not strictly positive raises SolverError.
inline Vector ldlt_solve(const SparseMatrix& A, const Vector& b) {
  if (A.rows() != A.cols()) throw std::invalid_argument("ldlt_solve: matrix is not square");
  if (b.size() != A.rows()) throw std::invalid_argument("ldlt_solve: size mismatch");
  if (A.rows() == 0) return Vector();
  if (A.asymmetry() > 1e-12 * std::max(1.0, A.max_abs())) throw SolverError("ldlt_solve: matrix is not symmetric");
  Eigen::SparseMatrix<double> M = A.to_eigen();
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>, Eigen::Lower, Eigen::AMDOrdering<int>> solver;
  solver.compute(M);
  if (solver.info() != Eigen::Success) throw SolverError("ldlt_solve: factorization failed");
  const Vector D = solver.vectorD();
  for (Index i = 0; i < D.size(); ++i) {
    if (!(D(i) > 0.0)) {
      std::ostringstream os;
      os << "ldlt_solve: matrix is not positive definite (pivot " << i << " = " << D(i) << ")";
      throw SolverError(os.str());
    }
  }
  Vector x = solver.solve(b);
  return detail::refine_and_check(A, solver, b, std::move(x), "ldlt_solve");
}

/// True when a sparse Cholesky factorization of the symmetric matrix succeeds
/// with positive pivots.
inline bool is_positive_definite(const SparseMatrix& A) {
  if (A.rows() == 0) return true;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>, Eigen::Lower, Eigen::AMDOrdering<int>> solver;
  solver.compute(A.to_eigen());
  if (solver.info() != Eigen::Success) return false;
  return (solver.vectorD().array() > 0.0).all();
}

}  // namespace stiga
