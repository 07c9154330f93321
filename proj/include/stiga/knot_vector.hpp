#pragma once

#include "stiga/common.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace stiga {

/// Highest spline degree supported by the stack-allocated evaluation kernels.
inline constexpr int kMaxDegree = 10;

/// Open knot vector on [0,1].
///
/// Invariants checked at construction: nondecreasing, first and last knots
/// repeated exactly degree+1 times, knots inside [0,1], at least degree+1
/// basis functions. Knots closer than 1e-14 are snapped onto the smaller one.
class KnotVector {
 public:
  KnotVector() = default;

  KnotVector(std::vector<double> knots, int degree) : knots_(std::move(knots)), degree_(degree) {
    if (degree_ < 0 || degree_ > kMaxDegree) {
      throw std::invalid_argument("KnotVector: degree out of range: " + std::to_string(degree_));
    }
    for (std::size_t i = 1; i < knots_.size(); ++i) {
      if (knots_[i] < knots_[i - 1] - 1e-14) {
        throw std::invalid_argument("KnotVector: knots must be nondecreasing");
      }
      if (knots_[i] - knots_[i - 1] < 1e-14) knots_[i] = knots_[i - 1];
    }
    const auto m = static_cast<int>(knots_.size());
    if (m < 2 * (degree_ + 1)) {
      throw std::invalid_argument("KnotVector: need at least degree+1 basis functions");
    }
    if (knots_.front() != 0.0 || knots_.back() != 1.0) {
      throw std::invalid_argument("KnotVector: knots must span [0,1]");
    }
    const auto front_mult = std::count(knots_.begin(), knots_.end(), knots_.front());
    const auto back_mult = std::count(knots_.begin(), knots_.end(), knots_.back());
    if (front_mult != degree_ + 1 || back_mult != degree_ + 1) {
      throw std::invalid_argument("KnotVector: end knots must have multiplicity degree+1 (open)");
    }
    for (int i = 0; i < m; ++i) {
      if (knots_[i] != knots_.front() && knots_[i] != knots_.back()) {
        const auto mult = std::count(knots_.begin(), knots_.end(), knots_[i]);
        if (mult > degree_) {
          throw std::invalid_argument("KnotVector: interior multiplicity exceeds degree");
        }
      }
    }
    build_cells();
  }

  /// Open knot vector with the given breakpoints (including 0 and 1) and a
  /// common interior multiplicity.
  static KnotVector from_breakpoints(const std::vector<double>& breakpoints, int degree,
                                     int interior_multiplicity = 1) {
    std::vector<double> knots;
    knots.insert(knots.end(), degree + 1, breakpoints.front());
    for (std::size_t i = 1; i + 1 < breakpoints.size(); ++i) {
      knots.insert(knots.end(), interior_multiplicity, breakpoints[i]);
    }
    knots.insert(knots.end(), degree + 1, breakpoints.back());
    return KnotVector(std::move(knots), degree);
  }

  static KnotVector uniform(int degree, int spans) {
    std::vector<double> bp(spans + 1);
    for (int i = 0; i <= spans; ++i) bp[i] = static_cast<double>(i) / spans;
    bp.back() = 1.0;
    return from_breakpoints(bp, degree);
  }

  [[nodiscard]] int degree() const { return degree_; }
  [[nodiscard]] const std::vector<double>& knots() const { return knots_; }
  [[nodiscard]] double operator[](int i) const { return knots_[i]; }
  /// Number of basis functions n.
  [[nodiscard]] int size() const { return static_cast<int>(knots_.size()) - degree_ - 1; }
  [[nodiscard]] const std::vector<double>& breakpoints() const { return breakpoints_; }
  [[nodiscard]] int num_cells() const { return static_cast<int>(cell_span_.size()); }

  /// Knot index s of cell c, i.e. [knots[s], knots[s+1]) is the cell.
  [[nodiscard]] int cell_span(int c) const { return cell_span_[c]; }
  /// Index of the first of the degree+1 functions nonzero on cell c.
  [[nodiscard]] int first_function(int c) const { return cell_span_[c] - degree_; }

  /// Multiplicity of each distinct breakpoint, in order.
  [[nodiscard]] std::vector<int> multiplicities() const {
    std::vector<int> out;
    for (double b : breakpoints_) {
      out.push_back(static_cast<int>(std::count(knots_.begin(), knots_.end(), b)));
    }
    return out;
  }

  /// Cell containing xi; the right endpoint belongs to the last cell.
  [[nodiscard]] int find_cell(double xi) const {
    if (xi < 0.0 || xi > 1.0 || std::isnan(xi)) {
      throw std::domain_error("parameter outside [0,1]: " + std::to_string(xi));
    }
    auto it = std::upper_bound(breakpoints_.begin(), breakpoints_.end(), xi);
    int c = static_cast<int>(it - breakpoints_.begin()) - 1;
    return std::clamp(c, 0, num_cells() - 1);
  }

  [[nodiscard]] int find_span(double xi) const { return cell_span_[find_cell(xi)]; }

  /// Cells [first, last] covered by the support of basis function i.
  [[nodiscard]] std::pair<int, int> support_cells(int i) const {
    return {cell_of_knot(knots_[i], false), cell_of_knot(knots_[i + degree_ + 1], true)};
  }

  friend bool operator==(const KnotVector& a, const KnotVector& b) {
    return a.degree_ == b.degree_ && a.knots_ == b.knots_;
  }

 private:
  void build_cells() {
    breakpoints_.clear();
    cell_span_.clear();
    for (std::size_t s = 0; s + 1 < knots_.size(); ++s) {
      if (knots_[s] < knots_[s + 1]) cell_span_.push_back(static_cast<int>(s));
    }
    breakpoints_.push_back(knots_.front());
    for (int s : cell_span_) breakpoints_.push_back(knots_[s + 1]);
  }

  // Index of the cell starting (or ending, if `ending`) at knot value v.
  [[nodiscard]] int cell_of_knot(double v, bool ending) const {
    auto it = std::lower_bound(breakpoints_.begin(), breakpoints_.end(), v);
    int b = static_cast<int>(it - breakpoints_.begin());
    return ending ? b - 1 : b;
  }

  std::vector<double> knots_;
  int degree_ = 0;
  std::vector<double> breakpoints_;
  std::vector<int> cell_span_;
};

/// Values and derivatives of the degree+1 functions nonzero on a knot span.
/// ders[k * (p+1) + j] holds the k-th derivative of function first + j.
struct UnivariateEval {
  int first = 0;
  int nderiv = 0;
  std::vector<double> ders;

  [[nodiscard]] double value(int j, int k = 0) const {
    return ders[static_cast<std::size_t>(k) * (ders.size() / (nderiv + 1)) + j];
  }
};

namespace detail {

inline double safe_div(double num, double den) { return den == 0.0 ? 0.0 : num / den; }

}  // namespace detail

/// Triangular de Boor scheme for the nonzero basis functions and their
/// derivatives on knot span `span`. Writes (nderiv+1)*(p+1) entries to out.
inline void eval_basis_ders(const KnotVector& kv, int span, double xi, int nderiv, std::span<double> out) {
  const int p = kv.degree();
  const auto& U = kv.knots();
  double ndu[kMaxDegree + 1][kMaxDegree + 1];
  double left[kMaxDegree + 1];
  double right[kMaxDegree + 1];
  double a[2][kMaxDegree + 1];

  ndu[0][0] = 1.0;
  for (int j = 1; j <= p; ++j) {
    left[j] = xi - U[span + 1 - j];
    right[j] = U[span + j] - xi;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      ndu[j][r] = right[r + 1] + left[j - r];
      const double temp = detail::safe_div(ndu[r][j - 1], ndu[j][r]);
      ndu[r][j] = saved + right[r + 1] * temp;
      saved = left[j - r] * temp;
    }
    ndu[j][j] = saved;
  }
  for (int j = 0; j <= p; ++j) out[j] = ndu[j][p];

  const int nd = std::min(nderiv, p);
  for (int r = 0; r <= p; ++r) {
    int s1 = 0;
    int s2 = 1;
    a[0][0] = 1.0;
    for (int k = 1; k <= nd; ++k) {
      double d = 0.0;
      const int rk = r - k;
      const int pk = p - k;
      if (r >= k) {
        a[s2][0] = detail::safe_div(a[s1][0], ndu[pk + 1][rk]);
        d = a[s2][0] * ndu[rk][pk];
      }
      const int j1 = rk >= -1 ? 1 : -rk;
      const int j2 = (r - 1 <= pk) ? k - 1 : p - r;
      for (int j = j1; j <= j2; ++j) {
        a[s2][j] = detail::safe_div(a[s1][j] - a[s1][j - 1], ndu[pk + 1][rk + j]);
        d += a[s2][j] * ndu[rk + j][pk];
      }
      if (r <= pk) {
        a[s2][k] = detail::safe_div(-a[s1][k - 1], ndu[pk + 1][r]);
        d += a[s2][k] * ndu[r][pk];
      }
      out[static_cast<std::size_t>(k) * (p + 1) + r] = d;
      std::swap(s1, s2);
    }
  }
  double factor = p;
  for (int k = 1; k <= nd; ++k) {
    for (int j = 0; j <= p; ++j) out[static_cast<std::size_t>(k) * (p + 1) + j] *= factor;
    factor *= (p - k);
  }
  for (int k = nd + 1; k <= nderiv; ++k) {
    for (int j = 0; j <= p; ++j) out[static_cast<std::size_t>(k) * (p + 1) + j] = 0.0;
  }
}

/// Values and up to `nderiv` derivatives of the p+1 functions nonzero at xi.
inline UnivariateEval eval_univariate(const KnotVector& kv, double xi, int nderiv) {
  if (nderiv < 0) throw std::invalid_argument("eval_univariate: negative derivative order");
  const int span = kv.find_span(xi);  // throws std::domain_error outside [0,1]
  UnivariateEval ev;
  ev.first = span - kv.degree();
  ev.nderiv = nderiv;
  ev.ders.resize(static_cast<std::size_t>(nderiv + 1) * (kv.degree() + 1));
  eval_basis_ders(kv, span, xi, nderiv, ev.ders);
  return ev;
}

/// Inserts the midpoint of every nonempty knot span once.
inline KnotVector dyadic_refine(const KnotVector& kv) {
  const auto& U = kv.knots();
  std::vector<double> out;
  out.reserve(U.size() + kv.num_cells());
  for (std::size_t s = 0; s < U.size(); ++s) {
    out.push_back(U[s]);
    if (s + 1 < U.size() && U[s] < U[s + 1]) out.push_back(0.5 * (U[s] + U[s + 1]));
  }
  return KnotVector(std::move(out), kv.degree());
}

/// i-th entry is the mean of knots i+1 .. i+p.
inline std::vector<double> greville_abscissae(const KnotVector& kv) {
  const int p = kv.degree();
  std::vector<double> g(kv.size());
  for (int i = 0; i < kv.size(); ++i) {
    if (p == 0) {
      g[i] = 0.5 * (kv[i] + kv[i + 1]);
      continue;
    }
    double s = 0.0;
    for (int k = 1; k <= p; ++k) s += kv[i + k];
    g[i] = s / p;
  }
  return g;
}

/// Sparse row of a two-scale relation: coarse function = sum_k coefs[k] * fine(first + k).
struct TwoScaleRow {
  int first = 0;
  std::vector<double> coefs;

  [[nodiscard]] double at(int fine_index) const {
    const int k = fine_index - first;
    return (k >= 0 && k < static_cast<int>(coefs.size())) ? coefs[k] : 0.0;
  }
};

/// Knot-insertion coefficients expressing each function of `coarse` in the
/// basis of `fine`, where fine = dyadic_refine(coarse). Coefficients are
/// obtained by collocation at the fine Greville points of the fine functions
/// supported inside the coarse support (Schoenberg-Whitney holds there).
inline std::vector<TwoScaleRow> two_scale(const KnotVector& coarse, const KnotVector& fine) {
  const int p = coarse.degree();
  if (fine.degree() != p) throw std::invalid_argument("two_scale: degree mismatch");
  const auto& U = coarse.knots();
  // Position in the fine knot vector of each coarse knot.
  std::vector<int> fine_pos(U.size());
  int inserted = 0;
  for (std::size_t i = 0; i < U.size(); ++i) {
    if (i > 0 && U[i - 1] < U[i]) ++inserted;
    fine_pos[i] = static_cast<int>(i) + inserted;
  }
  const auto greville = greville_abscissae(fine);
  std::vector<TwoScaleRow> rows(coarse.size());
  std::vector<double> buf(p + 1);
  for (int i = 0; i < coarse.size(); ++i) {
    const int a = fine_pos[i];
    const int b = fine_pos[i + p + 1] - p - 1;
    const int m = b - a + 1;
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(m, m);
    Eigen::VectorXd rhs(m);
    for (int r = 0; r < m; ++r) {
      const double g = greville[a + r];
      const int fspan = fine.find_span(g);
      eval_basis_ders(fine, fspan, g, 0, buf);
      for (int j = 0; j <= p; ++j) {
        const int col = fspan - p + j - a;
        if (col >= 0 && col < m) A(r, col) = buf[j];
      }
      const int cspan = coarse.find_span(g);
      eval_basis_ders(coarse, cspan, g, 0, buf);
      const int local = i - (cspan - p);
      rhs(r) = (local >= 0 && local <= p) ? buf[local] : 0.0;
    }
    Eigen::VectorXd c = A.partialPivLu().solve(rhs);
    rows[i].first = a;
    rows[i].coefs.assign(c.data(), c.data() + m);
    for (double& v : rows[i].coefs) {
      if (std::abs(v) < 1e-15) v = 0.0;
    }
  }
  return rows;
}

}  // namespace stiga
