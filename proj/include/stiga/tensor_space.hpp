#pragma once

#include "stiga/knot_vector.hpp"

#include <array>
#include <vector>

namespace stiga {

/// Values and parametric derivatives of the (p+1)^Dim tensor functions that
/// are nonzero at one point. Local function k has multi-index
/// start + unravel(k) with direction 0 running fastest.
template <int Dim>
struct BasisEval {
  std::array<int, Dim> start{};
  std::array<int, Dim> extent{};
  int nderiv = 0;
  std::vector<double> values;
  std::vector<Point<Dim>> grads;     // empty when nderiv < 1
  std::vector<Matrix<Dim>> hessians;  // empty when nderiv < 2

  [[nodiscard]] int count() const { return static_cast<int>(values.size()); }

  [[nodiscard]] std::array<int, Dim> multi_index(int k) const {
    std::array<int, Dim> m{};
    for (int a = 0; a < Dim; ++a) {
      m[a] = start[a] + k % extent[a];
      k /= extent[a];
    }
    return m;
  }
};

namespace detail {

/// Combines univariate evaluations (layout of eval_basis_ders) into tensor
/// values/derivatives. uni[a] points at (nderiv+1)*(ext[a]) doubles.
template <int Dim>
void tensor_combine(const std::array<const double*, Dim>& uni, const std::array<int, Dim>& ext, int nderiv,
                    double* values, Point<Dim>* grads, Matrix<Dim>* hessians) {
  int count = 1;
  for (int a = 0; a < Dim; ++a) count *= ext[a];
  std::array<int, Dim> idx{};
  for (int k = 0; k < count; ++k) {
    double v = 1.0;
    for (int a = 0; a < Dim; ++a) v *= uni[a][idx[a]];
    values[k] = v;
    if (nderiv >= 1) {
      for (int a = 0; a < Dim; ++a) {
        double g = 1.0;
        for (int b = 0; b < Dim; ++b) g *= uni[b][(b == a ? ext[b] : 0) + idx[b]];
        grads[k](a) = g;
      }
    }
    if (nderiv >= 2) {
      for (int a = 0; a < Dim; ++a) {
        for (int c = a; c < Dim; ++c) {
          double h = 1.0;
          for (int b = 0; b < Dim; ++b) {
            const int order = (b == a) + (b == c);
            h *= uni[b][order * ext[b] + idx[b]];
          }
          hessians[k](a, c) = h;
          hessians[k](c, a) = h;
        }
      }
    }
    for (int a = 0; a < Dim; ++a) {
      if (++idx[a] < ext[a]) break;
      idx[a] = 0;
    }
  }
}

}  // namespace detail

/// Tensor product of univariate open knot vectors.
template <int Dim>
class TensorSplineSpace {
 public:
  TensorSplineSpace() = default;
  explicit TensorSplineSpace(std::array<KnotVector, Dim> kvs) : kv_(std::move(kvs)) {}

  [[nodiscard]] const KnotVector& knot_vector(int a) const { return kv_[a]; }
  [[nodiscard]] const std::array<KnotVector, Dim>& knot_vectors() const { return kv_; }
  [[nodiscard]] int size(int a) const { return kv_[a].size(); }

  [[nodiscard]] Index dimension() const {
    Index n = 1;
    for (const auto& kv : kv_) n *= kv.size();
    return n;
  }

  [[nodiscard]] Index linear_index(const std::array<int, Dim>& m) const {
    Index li = 0;
    for (int a = Dim - 1; a >= 0; --a) li = li * kv_[a].size() + m[a];
    return li;
  }

  [[nodiscard]] std::array<int, Dim> multi_index(Index li) const {
    std::array<int, Dim> m{};
    for (int a = 0; a < Dim; ++a) {
      m[a] = static_cast<int>(li % kv_[a].size());
      li /= kv_[a].size();
    }
    return m;
  }

  /// Evaluates all functions nonzero at xi. Pass cell indices to force the
  /// knot span used in each direction (relevant on cell boundaries).
  [[nodiscard]] BasisEval<Dim> eval(const Point<Dim>& xi, int nderiv, const std::array<int, Dim>* cell = nullptr) const {
    if (nderiv < 0 || nderiv > 2) throw std::invalid_argument("tensor_eval: nderiv must be 0, 1 or 2");
    BasisEval<Dim> out;
    out.nderiv = nderiv;
    std::array<std::vector<double>, Dim> uni;
    std::array<const double*, Dim> ptr{};
    int count = 1;
    for (int a = 0; a < Dim; ++a) {
      const auto& kv = kv_[a];
      if (!(xi(a) >= 0.0 && xi(a) <= 1.0)) throw std::domain_error("tensor_eval: point outside parameter cube");
      const int span = cell ? kv.cell_span((*cell)[a]) : kv.find_span(xi(a));
      out.start[a] = span - kv.degree();
      out.extent[a] = kv.degree() + 1;
      uni[a].resize(static_cast<std::size_t>(nderiv + 1) * out.extent[a]);
      eval_basis_ders(kv, span, xi(a), nderiv, uni[a]);
      ptr[a] = uni[a].data();
      count *= out.extent[a];
    }
    out.values.resize(count);
    if (nderiv >= 1) out.grads.resize(count);
    if (nderiv >= 2) out.hessians.resize(count);
    detail::tensor_combine<Dim>(ptr, out.extent, nderiv, out.values.data(), out.grads.data(), out.hessians.data());
    return out;
  }

 private:
  std::array<KnotVector, Dim> kv_;
};

/// Free-function form used throughout the tests.
template <int Dim>
BasisEval<Dim> tensor_eval(const TensorSplineSpace<Dim>& space, const Point<Dim>& xi, int nderiv) {
  return space.eval(xi, nderiv);
}

/// Runtime-sized overload: rejects points whose dimension does not match.
template <int Dim>
BasisEval<Dim> tensor_eval(const TensorSplineSpace<Dim>& space, const std::vector<double>& xi, int nderiv) {
  if (static_cast<int>(xi.size()) != Dim) {
    throw std::invalid_argument("tensor_eval: dimension mismatch");
  }
  Point<Dim> p;
  for (int a = 0; a < Dim; ++a) p(a) = xi[a];
  return space.eval(p, nderiv);
}

}  // namespace stiga
