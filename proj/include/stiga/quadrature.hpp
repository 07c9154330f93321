#pragma once

#include "stiga/hierarchical.hpp"

#include <cmath>
#include <numbers>
#include <vector>

namespace stiga {

/// Gauss-Legendre nodes and weights on [0,1]; `dim` records the tensor dimension
/// the rule is meant for (the same 1D rule is used in every direction).
struct GaussRule {
  std::vector<double> nodes;
  std::vector<double> weights;
  int dim = 1;

  [[nodiscard]] int points() const { return static_cast<int>(nodes.size()); }
  [[nodiscard]] int exactness() const { return 2 * points() - 1; }
};

namespace detail {

// P_n(x) and P_n'(x) by the three-term recurrence.
inline std::pair<double, double> legendre(int n, double x) {
  double p0 = 1.0;
  double p1 = x;
  for (int k = 2; k <= n; ++k) {
    const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
    p0 = p1;
    p1 = p2;
  }
  return {p1, n * (x * p1 - p0) / (x * x - 1.0)};
}

}  // namespace detail

/// n-point rule by Newton iteration on the Legendre polynomial P_n.
inline GaussRule gauss_rule(int n, int dim = 1) {
  if (n < 1 || n > 30) throw std::invalid_argument("gauss_rule: n must be in [1, 30]");
  if (dim < 1) throw std::invalid_argument("gauss_rule: dim must be positive");
  GaussRule r;
  r.dim = dim;
  r.nodes.resize(n);
  r.weights.resize(n);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    for (int it = 0; it < 100; ++it) {
      const auto [pn, dpn] = detail::legendre(n, x);
      const double dx = pn / dpn;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    const double dpn = detail::legendre(n, x).second;
    const double w = 1.0 / ((1.0 - x * x) * dpn * dpn);
    r.nodes[i] = 0.5 * (1.0 - x);
    r.nodes[n - 1 - i] = 0.5 * (1.0 + x);
    r.weights[i] = w;
    r.weights[n - 1 - i] = w;
  }
  if (n % 2 == 1) r.nodes[n / 2] = 0.5;
  return r;
}

/// Parameter-space quadrature point; the weight includes the box measure.
template <int Dim>
struct QuadPoint {
  Point<Dim> xi;
  double w = 0.0;
};

/// Tensor Gauss points on a parameter box.
template <int Dim>
std::vector<QuadPoint<Dim>> box_points(const GaussRule& rule, const Box<Dim>& box) {
  const int n = rule.points();
  int total = 1;
  for (int a = 0; a < Dim; ++a) total *= n;
  std::vector<QuadPoint<Dim>> out(total);
  const Point<Dim> size = box.hi - box.lo;
  const double vol = box.volume();
  std::array<int, Dim> idx{};
  for (int k = 0; k < total; ++k) {
    double w = vol;
    for (int a = 0; a < Dim; ++a) {
      out[k].xi(a) = box.lo(a) + rule.nodes[idx[a]] * size(a);
      w *= rule.weights[idx[a]];
    }
    out[k].w = w;
    for (int a = 0; a < Dim; ++a) {
      if (++idx[a] < n) break;
      idx[a] = 0;
    }
  }
  return out;
}

/// Gauss points on the face of `box` where coordinate `dir` is fixed to its
/// lower or upper value. Weights carry the face's parameter measure.
template <int Dim>
std::vector<QuadPoint<Dim>> face_points(const GaussRule& rule, const Box<Dim>& box, int dir, bool upper) {
  const int n = rule.points();
  int total = 1;
  for (int a = 0; a < Dim - 1; ++a) total *= n;
  std::vector<QuadPoint<Dim>> out(total);
  const Point<Dim> size = box.hi - box.lo;
  double area = 1.0;
  for (int a = 0; a < Dim; ++a) {
    if (a != dir) area *= size(a);
  }
  std::array<int, Dim> idx{};
  for (int k = 0; k < total; ++k) {
    double w = area;
    int j = 0;
    for (int a = 0; a < Dim; ++a) {
      if (a == dir) {
        out[k].xi(a) = upper ? box.hi(a) : box.lo(a);
        continue;
      }
      out[k].xi(a) = box.lo(a) + rule.nodes[idx[j]] * size(a);
      w *= rule.weights[idx[j]];
      ++j;
    }
    out[k].w = w;
    for (int a = 0; a < Dim - 1; ++a) {
      if (++idx[a] < n) break;
      idx[a] = 0;
    }
  }
  return out;
}

}  // namespace stiga
