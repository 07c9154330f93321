#pragma once

#include "stiga/quadrature.hpp"

#include <cmath>
#include <functional>
#include <string>
#include <string_view>

namespace stiga {

/// Geometry data at one parameter point.
template <int Dim>
struct PointGeometry {
  Point<Dim> xi;
  Point<Dim> x;
  Matrix<Dim> J;      // J(k, a) = d x_k / d xi_a
  Matrix<Dim> JinvT;  // inverse transpose
  double detJ = 0.0;
  std::array<Matrix<Dim>, Dim> H{};  // parametric Hessian of each component x_k
  bool affine = true;                // all H vanish

  /// Physical gradient from a parametric one.
  [[nodiscard]] Point<Dim> grad(const Point<Dim>& g_xi) const { return JinvT * g_xi; }

  /// Physical Hessian from parametric value derivatives.
  [[nodiscard]] Matrix<Dim> hessian(const Point<Dim>& g_xi, const Matrix<Dim>& h_xi) const {
    Matrix<Dim> h = h_xi;
    if (!affine) {
      const Point<Dim> g = grad(g_xi);
      for (int k = 0; k < Dim; ++k) h -= g(k) * H[k];
    }
    return JinvT * h * JinvT.transpose();
  }
};

/// NURBS map from [0,1]^Dim onto the space-time cylinder. Control points are
/// stored by the linear index of the geometry space (direction 0 fastest).
template <int Dim>
class GeometryMap {
 public:
  GeometryMap() = default;

  GeometryMap(TensorSplineSpace<Dim> space, std::vector<Point<Dim>> control, std::vector<double> weights)
      : space_(std::move(space)), control_(std::move(control)), weights_(std::move(weights)) {
    if (static_cast<Index>(control_.size()) != space_.dimension() ||
        static_cast<Index>(weights_.size()) != space_.dimension()) {
      throw GeometryError("GeometryMap: control net size does not match the spline space");
    }
    for (double w : weights_) {
      if (!(w > 0.0)) throw GeometryError("GeometryMap: weights must be positive");
    }
  }

  [[nodiscard]] const TensorSplineSpace<Dim>& space() const { return space_; }
  [[nodiscard]] const std::vector<Point<Dim>>& control_points() const { return control_; }
  [[nodiscard]] const std::vector<double>& weights() const { return weights_; }
  /// Breakpoints of the geometry knot vectors; they seed the analysis mesh.
  [[nodiscard]] std::array<std::vector<double>, Dim> breakpoints() const {
    std::array<std::vector<double>, Dim> bp;
    for (int a = 0; a < Dim; ++a) bp[a] = space_.knot_vector(a).breakpoints();
    return bp;
  }

  /// Value, Jacobian and (if nderiv >= 2) component Hessians.
  [[nodiscard]] PointGeometry<Dim> evaluate(const Point<Dim>& xi, int nderiv = 1) const {
    const auto e = space_.eval(xi, std::max(1, nderiv));
    Point<Dim> A = Point<Dim>::Zero();
    Matrix<Dim> dA = Matrix<Dim>::Zero();  // dA(k, a)
    std::array<Matrix<Dim>, Dim> ddA{};
    for (auto& m : ddA) m.setZero();
    double W = 0.0;
    Point<Dim> dW = Point<Dim>::Zero();
    Matrix<Dim> ddW = Matrix<Dim>::Zero();
    for (int k = 0; k < e.count(); ++k) {
      const Index id = space_.linear_index(e.multi_index(k));
      const double w = weights_[id];
      const Point<Dim>& P = control_[id];
      W += w * e.values[k];
      A += (w * e.values[k]) * P;
      dW += w * e.grads[k];
      dA += (w * P) * e.grads[k].transpose();
      if (nderiv >= 2) {
        ddW += w * e.hessians[k];
        for (int c = 0; c < Dim; ++c) ddA[c] += (w * P(c)) * e.hessians[k];
      }
    }
    PointGeometry<Dim> g;
    g.xi = xi;
    g.x = A / W;
    g.J = (dA - g.x * dW.transpose()) / W;
    g.detJ = g.J.determinant();
    if (!(std::abs(g.detJ) >= 1e-14)) throw GeometryError("singular Jacobian at parameter point");
    g.JinvT = g.J.inverse().transpose();
    g.affine = true;
    if (nderiv >= 2) {
      for (int c = 0; c < Dim; ++c) {
        const Point<Dim> gx = g.J.row(c).transpose();
        g.H[c] = (ddA[c] - gx * dW.transpose() - dW * gx.transpose() - g.x(c) * ddW) / W;
        if (g.H[c].cwiseAbs().maxCoeff() > 0.0) g.affine = false;
      }
    } else {
      for (auto& m : g.H) m.setZero();
    }
    return g;
  }

 private:
  TensorSplineSpace<Dim> space_;
  std::vector<Point<Dim>> control_;
  std::vector<double> weights_;
};

/// (Φ(ξ), ∇_ξΦ(ξ)); throws GeometryError on a singular Jacobian.
template <int Dim>
std::pair<Point<Dim>, Matrix<Dim>> map_and_jacobian(const GeometryMap<Dim>& geo, const Point<Dim>& xi) {
  const auto g = geo.evaluate(xi, 1);
  return {g.x, g.J};
}

/// Largest singular value of the spatial rows of J.
template <int Dim>
double spatial_jacobian_norm(const Matrix<Dim>& J) {
  const Eigen::Matrix<double, Dim - 1, Dim> S = J.template topRows<Dim - 1>();
  const Eigen::Matrix<double, Dim - 1, Dim - 1> SSt = S * S.transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, Dim - 1, Dim - 1>> es(SSt, Eigen::EigenvaluesOnly);
  return std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff()));
}

/// h_K = sup_K ‖∇xΦ‖ · diam(K̂), the sup sampled at Gauss points and corners.
template <int Dim>
double element_size(const GeometryMap<Dim>& geo, const Box<Dim>& box, int gauss_points = 3) {
  double sup = 0.0;
  for (const auto& q : box_points(gauss_rule(gauss_points, Dim), box)) {
    sup = std::max(sup, spatial_jacobian_norm<Dim>(geo.evaluate(q.xi, 1).J));
  }
  for (int corner = 0; corner < (1 << Dim); ++corner) {
    Point<Dim> xi;
    for (int a = 0; a < Dim; ++a) xi(a) = ((corner >> a) & 1) ? box.hi(a) : box.lo(a);
    sup = std::max(sup, spatial_jacobian_norm<Dim>(geo.evaluate(xi, 1).J));
  }
  return sup * box.diameter();
}

/// Quadrature data of one active cell pulled back through the map.
template <int Dim>
struct MappedElement {
  Cell<Dim> cell;
  Box<Dim> box;
  double h = 0.0;
  std::vector<QuadPoint<Dim>> points;
  std::vector<PointGeometry<Dim>> geometry;
};

template <int Dim>
MappedElement<Dim> map_element(const GeometryMap<Dim>& geo, const HierarchicalMesh<Dim>& mesh, const Cell<Dim>& cell,
                               const GaussRule& rule, int nderiv = 2) {
  MappedElement<Dim> el;
  el.cell = cell;
  el.box = mesh.cell_box(cell);
  el.points = box_points(rule, el.box);
  el.geometry.reserve(el.points.size());
  for (const auto& q : el.points) el.geometry.push_back(geo.evaluate(q.xi, nderiv));
  el.h = element_size(geo, el.box, std::min(rule.points(), 4));
  return el;
}

/// Σ_q w_q f(geometry_q) |det J_q|.
template <int Dim, class F>
double integrate_element(F&& f, const MappedElement<Dim>& el) {
  double s = 0.0;
  for (std::size_t q = 0; q < el.points.size(); ++q) {
    s += el.points[q].w * f(el.geometry[q]) * std::abs(el.geometry[q].detJ);
  }
  return s;
}

/// Surface measure factor on a face where parameter `dir` is fixed.
template <int Dim>
double face_measure(const PointGeometry<Dim>& g, int dir) {
  return std::abs(g.detJ) * g.JinvT.col(dir).norm();
}

enum class PatchId { unit_interval_time, unit_square_time, quarter_annulus_time };

inline PatchId parse_patch_id(std::string_view s) {
  if (s == "unit_interval_time") return PatchId::unit_interval_time;
  if (s == "unit_square_time") return PatchId::unit_square_time;
  if (s == "quarter_annulus_time") return PatchId::quarter_annulus_time;
  throw std::invalid_argument("unknown patch id: " + std::string(s));
}

inline std::string to_string(PatchId id) {
  switch (id) {
    case PatchId::unit_interval_time:
      return "unit_interval_time";
    case PatchId::unit_square_time:
      return "unit_square_time";
    case PatchId::quarter_annulus_time:
      return "quarter_annulus_time";
  }
  return "?";
}

inline int patch_dimension(PatchId id) { return id == PatchId::unit_interval_time ? 2 : 3; }

namespace detail {

template <int Dim>
GeometryMap<Dim> box_patch(double T) {
  std::array<KnotVector, Dim> kv;
  for (int a = 0; a < Dim; ++a) kv[a] = KnotVector({0, 0, 1, 1}, 1);
  TensorSplineSpace<Dim> space(kv);
  std::vector<Point<Dim>> P(space.dimension());
  for (Index i = 0; i < space.dimension(); ++i) {
    const auto m = space.multi_index(i);
    for (int a = 0; a < Dim; ++a) P[i](a) = m[a];
    P[i](Dim - 1) *= T;
  }
  return GeometryMap<Dim>(space, P, std::vector<double>(space.dimension(), 1.0));
}

// Radial direction linear, angular direction a quadratic rational arc,
// time linear. Φ(0,0,·) = (1,0), Φ(1,1,·) = (0,2).
inline GeometryMap<3> quarter_annulus(double T) {
  TensorSplineSpace<3> space({KnotVector({0, 0, 1, 1}, 1), KnotVector({0, 0, 0, 1, 1, 1}, 2),
                              KnotVector({0, 0, 1, 1}, 1)});
  std::vector<Point<3>> P(space.dimension());
  std::vector<double> w(space.dimension());
  const double s = std::sqrt(0.5);
  for (Index i = 0; i < space.dimension(); ++i) {
    const auto m = space.multi_index(i);
    const double r = 1.0 + m[0];
    const double t = m[2] * T;
    switch (m[1]) {
      case 0:
        P[i] = Point<3>(r, 0.0, t);
        w[i] = 1.0;
        break;
      case 1:
        P[i] = Point<3>(r, r, t);
        w[i] = s;
        break;
      default:
        P[i] = Point<3>(0.0, r, t);
        w[i] = 1.0;
        break;
    }
  }
  return GeometryMap<3>(space, P, w);
}

}  // namespace detail

/// Exact-geometry benchmark patches; time is the last coordinate on [0, T].
template <int Dim>
GeometryMap<Dim> benchmark_patch(PatchId id, double T) {
  if (!(T > 0.0)) throw std::invalid_argument("benchmark_patch: T must be positive");
  if (patch_dimension(id) != Dim) throw std::invalid_argument("benchmark_patch: dimension mismatch for " + to_string(id));
  if constexpr (Dim == 3) {
    if (id == PatchId::quarter_annulus_time) return detail::quarter_annulus(T);
  }
  return detail::box_patch<Dim>(T);
}

}  // namespace stiga
