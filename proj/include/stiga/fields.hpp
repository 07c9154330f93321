#pragma once

#include "stiga/geometry.hpp"
#include "stiga/sparse.hpp"

#include <unordered_map>

namespace stiga {

/// Physical values and derivatives of the THB functions of one cell at a set
/// of points. Entry (q, r) is stored at q * size() + r.
template <int Dim>
struct ElementBasis {
  std::vector<Index> dofs;
  int npoints = 0;
  int nderiv = 0;
  std::vector<double> val;
  std::vector<Point<Dim>> grad;
  std::vector<Matrix<Dim>> hess;

  [[nodiscard]] int size() const { return static_cast<int>(dofs.size()); }
  [[nodiscard]] std::size_t at(int q, int r) const { return static_cast<std::size_t>(q) * dofs.size() + r; }

  /// Δx of function r at point q.
  [[nodiscard]] double lap_x(int q, int r) const {
    const auto& H = hess[at(q, r)];
    double s = 0.0;
    for (int a = 0; a < Dim - 1; ++a) s += H(a, a);
    return s;
  }
};

/// Evaluates the functions of cell basis `cb` at the given geometry points
/// (which must lie in the closure of cb.cell).
template <int Dim>
ElementBasis<Dim> physical_basis(const HierarchicalSplineSpace<Dim>& space, const CellBasis<Dim>& cb,
                                 const std::vector<PointGeometry<Dim>>& pts, int nderiv) {
  ElementBasis<Dim> eb;
  eb.dofs = cb.dofs;
  eb.npoints = static_cast<int>(pts.size());
  eb.nderiv = nderiv;
  const int n = eb.size();
  const std::size_t total = static_cast<std::size_t>(n) * pts.size();
  eb.val.resize(total);
  if (nderiv >= 1) eb.grad.resize(total);
  if (nderiv >= 2) eb.hess.resize(total);
  const Index m = cb.coef.cols();
  Eigen::VectorXd tv(m);
  Eigen::MatrixXd tg(m, Dim);
  Eigen::MatrixXd th(m, Dim * Dim);
  for (int q = 0; q < eb.npoints; ++q) {
    const auto& g = pts[q];
    const auto te = space.local_tensor_eval(cb.cell, g.xi, nderiv);
    for (Index k = 0; k < m; ++k) {
      tv(k) = te.values[k];
      if (nderiv >= 1) tg.row(k) = te.grads[k].transpose();
      if (nderiv >= 2) th.row(k) = Eigen::Map<const Eigen::Matrix<double, 1, Dim * Dim>>(te.hessians[k].data());
    }
    const Eigen::VectorXd v = cb.coef * tv;
    Eigen::MatrixXd gr;
    Eigen::MatrixXd hs;
    if (nderiv >= 1) gr = cb.coef * tg;
    if (nderiv >= 2) hs = cb.coef * th;
    for (int r = 0; r < n; ++r) {
      const std::size_t i = eb.at(q, r);
      eb.val[i] = v(r);
      if (nderiv >= 1) {
        const Point<Dim> gxi = gr.row(r).transpose();
        eb.grad[i] = g.grad(gxi);
        if (nderiv >= 2) {
          const Matrix<Dim> hxi = Eigen::Map<const Matrix<Dim>>(hs.row(r).eval().data());
          eb.hess[i] = g.hessian(gxi, hxi);
        }
      }
    }
  }
  return eb;
}

/// Evaluates a THB space on cells of another, finer-or-equal mesh. The
/// active cell of `space` containing a bound box is located once and its cell
/// basis is cached.
template <int Dim>
class BasisSampler {
 public:
  explicit BasisSampler(const HierarchicalSplineSpace<Dim>& space) : space_(&space) {}

  [[nodiscard]] const HierarchicalSplineSpace<Dim>& space() const { return *space_; }

  /// Binds to the active cell of the sampled space containing `box`.
  const CellBasis<Dim>& bind(const Box<Dim>& box) {
    const Cell<Dim> c = space_->mesh().locate(box.center());
    const auto key = std::make_pair(c.level, space_->mesh().key(c));
    auto it = cache_.find(key);
    if (it == cache_.end()) it = cache_.emplace(key, space_->cell_basis(c)).first;
    current_ = &it->second;
    return *current_;
  }

  [[nodiscard]] ElementBasis<Dim> evaluate(const std::vector<PointGeometry<Dim>>& pts, int nderiv) const {
    return physical_basis(*space_, *current_, pts, nderiv);
  }

  void clear() { cache_.clear(); }

 private:
  struct KeyHash {
    std::size_t operator()(const std::pair<int, std::uint64_t>& k) const {
      return std::hash<std::uint64_t>()(k.second * 31u + static_cast<std::uint64_t>(k.first));
    }
  };

  const HierarchicalSplineSpace<Dim>* space_;
  std::unordered_map<std::pair<int, std::uint64_t>, CellBasis<Dim>, KeyHash> cache_;
  const CellBasis<Dim>* current_ = nullptr;
};

/// Value and physical derivatives of a discrete field at one point.
template <int Dim>
struct FieldValue {
  double v = 0.0;
  Point<Dim> grad = Point<Dim>::Zero();
  Matrix<Dim> hess = Matrix<Dim>::Zero();

  [[nodiscard]] double dt() const { return grad(Dim - 1); }
  [[nodiscard]] double lap_x() const {
    double s = 0.0;
    for (int a = 0; a < Dim - 1; ++a) s += hess(a, a);
    return s;
  }
};

template <int Dim>
FieldValue<Dim> field_at(const ElementBasis<Dim>& eb, const Vector& coef, int q) {
  FieldValue<Dim> f;
  for (int r = 0; r < eb.size(); ++r) {
    const double c = coef(eb.dofs[r]);
    if (c == 0.0) continue;
    const std::size_t i = eb.at(q, r);
    f.v += c * eb.val[i];
    if (eb.nderiv >= 1) f.grad += c * eb.grad[i];
    if (eb.nderiv >= 2) f.hess += c * eb.hess[i];
  }
  return f;
}

/// Geometry at face quadrature points of a cell.
template <int Dim>
std::vector<PointGeometry<Dim>> face_geometry(const GeometryMap<Dim>& geo, const std::vector<QuadPoint<Dim>>& pts,
                                              int nderiv) {
  std::vector<PointGeometry<Dim>> out;
  out.reserve(pts.size());
  for (const auto& q : pts) out.push_back(geo.evaluate(q.xi, nderiv));
  return out;
}

}  // namespace stiga
