#pragma once

#include "stiga/assembly.hpp"
#include "stiga/problems.hpp"

#include <limits>
#include <optional>

namespace stiga {

/// Primal data at one estimator quadrature point.
template <int Dim>
struct EstimatorSample {
  SamplePoint<Dim> s;
  Matrix<Dim> JinvT;
  double W = 0.0;  // weight times |det J| (or the face measure)
  double v = 0.0;
  Point<Dim> grad = Point<Dim>::Zero();
  double lap = 0.0;  // Δx u_h
  double f = 0.0;

  [[nodiscard]] PointGeometry<Dim> geometry() const {
    PointGeometry<Dim> g;
    g.xi = s.xi;
    g.x = s.x;
    g.JinvT = JinvT;
    return g;
  }
};

/// u_h, f and the geometry sampled once per active cell of the primal mesh,
/// plus the top (t = T) and bottom (t = 0) faces.
template <int Dim>
class EstimatorContext {
 public:
  static constexpr int d = Dim - 1;

  EstimatorContext(const Discretization<Dim>& disc, const Vector& u_h, const ScalarField<Dim>& f, int quad_points)
      : disc_(&disc), u_(u_h) {
    if (u_h.size() != disc.dimension()) throw std::invalid_argument("EstimatorContext: coefficient length mismatch");
    const auto& mesh = disc.mesh();
    rule_ = gauss_rule(quad_points, Dim);
    const auto face_rule = gauss_rule(quad_points, Dim - 1);
    const std::size_t nc = disc.num_cells();
    cells_.resize(nc);
    top_.resize(nc);
    bottom_.resize(nc);
    parallel_for(nc, [&](std::size_t i) {
      const Cell<Dim>& c = disc.cell(i);
      const auto box = mesh.cell_box(c);
      const auto cb = disc.space().cell_basis(c);
      const auto pts = box_points(rule_, box);
      const auto geo = face_geometry(disc.geometry(), pts, 2);
      const auto eb = physical_basis(disc.space(), cb, geo, 2);
      auto& out = cells_[i];
      out.resize(pts.size());
      for (int q = 0; q < eb.npoints; ++q) {
        const auto fv = field_at(eb, u_, q);
        auto& smp = out[q];
        smp.s = {geo[q].x, geo[q].xi};
        smp.JinvT = geo[q].JinvT;
        smp.W = pts[q].w * std::abs(geo[q].detJ);
        smp.v = fv.v;
        smp.grad = fv.grad;
        smp.lap = fv.lap_x();
        smp.f = f(smp.s);
      }
      for (int side = 0; side < 2; ++side) {
        const bool upper = side == 1;
        if (upper ? !touches_top(mesh, c) : !touches_bottom(c)) continue;
        const auto fp = face_points(face_rule, box, Dim - 1, upper);
        const auto fg = face_geometry(disc.geometry(), fp, 1);
        const auto fb = physical_basis(disc.space(), cb, fg, 1);
        auto& face = upper ? top_[i] : bottom_[i];
        face.resize(fp.size());
        for (int q = 0; q < fb.npoints; ++q) {
          const auto fv = field_at(fb, u_, q);
          auto& smp = face[q];
          smp.s = {fg[q].x, fg[q].xi};
          smp.JinvT = fg[q].JinvT;
          smp.W = fp[q].w * face_measure(fg[q], Dim - 1);
          smp.v = fv.v;
          smp.grad = fv.grad;
        }
      }
    });
  }

  [[nodiscard]] const Discretization<Dim>& disc() const { return *disc_; }
  [[nodiscard]] const Vector& u() const { return u_; }
  [[nodiscard]] const GaussRule& rule() const { return rule_; }
  [[nodiscard]] std::size_t num_cells() const { return cells_.size(); }
  [[nodiscard]] const std::vector<EstimatorSample<Dim>>& cell(std::size_t i) const { return cells_[i]; }
  [[nodiscard]] const std::vector<EstimatorSample<Dim>>& top(std::size_t i) const { return top_[i]; }
  [[nodiscard]] const std::vector<EstimatorSample<Dim>>& bottom(std::size_t i) const { return bottom_[i]; }

 private:
  const Discretization<Dim>* disc_;
  Vector u_;
  GaussRule rule_;
  std::vector<std::vector<EstimatorSample<Dim>>> cells_;
  std::vector<std::vector<EstimatorSample<Dim>>> top_;
  std::vector<std::vector<EstimatorSample<Dim>>> bottom_;
};

namespace detail {

inline double sum(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

}  // namespace detail

/// Exact error norms; `cell_grad_sq` holds ‖∇x e‖²_K per active cell.
struct ErrorNorms {
  double grad_x = 0.0;  // ‖∇x e‖_Q
  double energy = 0.0;  // (‖∇x e‖²_Q + ‖e‖²_ΣT)^½
  double loc_h = 0.0;   // |||e|||_loc,h
  double L = 0.0;       // (‖Δx e‖²_Q + ‖∂t e‖²_Q + ‖∇x e‖²_ΣT)^½
  std::vector<double> cell_grad_sq;
};

template <int Dim>
ErrorNorms exact_error_norms(const EstimatorContext<Dim>& ctx, const ProblemCase<Dim>& pc) {
  if (!pc.has_exact()) throw std::invalid_argument("exact_error_norms: problem has no exact solution");
  constexpr int d = Dim - 1;
  const std::size_t nc = ctx.num_cells();
  std::vector<std::array<double, 6>> part(nc);
  ErrorNorms out;
  out.cell_grad_sq.resize(nc);
  parallel_for(nc, [&](std::size_t i) {
    std::array<double, 6> acc{};  // grad, dt, lap, δ dt, top value, top grad
    for (const auto& smp : ctx.cell(i)) {
      const Point<Dim> g = pc.grad_u(smp.s) - smp.grad;
      const double lap = pc.lap_u(smp.s) - smp.lap;
      acc[0] += smp.W * g.template head<d>().squaredNorm();
      acc[1] += smp.W * g(d) * g(d);
      acc[2] += smp.W * lap * lap;
    }
    acc[3] = ctx.disc().delta(i) * acc[1];
    for (const auto& smp : ctx.top(i)) {
      const double e = pc.u(smp.s) - smp.v;
      const Point<Dim> g = pc.grad_u(smp.s) - smp.grad;
      acc[4] += smp.W * e * e;
      acc[5] += smp.W * g.template head<d>().squaredNorm();
    }
    part[i] = acc;
    out.cell_grad_sq[i] = acc[0];
  });
  std::array<double, 6> t{};
  for (const auto& a : part) {
    for (int k = 0; k < 6; ++k) t[k] += a[k];
  }
  out.grad_x = std::sqrt(t[0]);
  out.energy = std::sqrt(t[0] + t[4]);
  out.loc_h = std::sqrt(t[0] + 0.5 * t[4] + t[3]);
  out.L = std::sqrt(t[2] + t[1] + t[5]);
  return out;
}

/// EId² = ‖∇x(u_0 - u_h)‖²_Σ0 + ‖Δx u_h + f - ∂t u_h‖²_Q.
template <int Dim>
double error_identity(const EstimatorContext<Dim>& ctx,
                      const std::function<Point<Dim>(const SamplePoint<Dim>&)>& grad_u0) {
  constexpr int d = Dim - 1;
  std::vector<double> part(ctx.num_cells());
  parallel_for(ctx.num_cells(), [&](std::size_t i) {
    double s = 0.0;
    for (const auto& smp : ctx.cell(i)) {
      const double r = smp.lap + smp.f - smp.grad(d);
      s += smp.W * r * r;
    }
    for (const auto& smp : ctx.bottom(i)) {
      s += smp.W * (grad_u0(smp.s) - smp.grad).template head<d>().squaredNorm();
    }
    part[i] = s;
  });
  return std::sqrt(detail::sum(part));
}

/// d spatial flux components, each in a THB space of degree q on the primal
/// mesh coarsened by ⌊log2 M⌋ levels.
template <int Dim>
struct FluxSpace {
  HierarchicalSplineSpace<Dim> space;
  int components = Dim - 1;

  [[nodiscard]] Index scalar_dimension() const { return space.dimension(); }
  [[nodiscard]] Index dimension() const { return components * space.dimension(); }
};

inline int coarsening_shift(int M) {
  if (M < 1) throw std::invalid_argument("flux mesh factor M must be >= 1");
  int s = 0;
  while ((2 << s) <= M) ++s;
  return s;
}

template <int Dim>
FluxSpace<Dim> make_flux_space(const HierarchicalMesh<Dim>& primal, int q, int M) {
  if (q < 1) throw std::invalid_argument("flux degree must be >= 1");
  std::array<int, Dim> deg;
  deg.fill(q);
  return {HierarchicalSplineSpace<Dim>(primal.coarsened(coarsening_shift(M)), deg), Dim - 1};
}

/// Target data of a flux problem at the estimator samples: the flux should
/// approximate `a` and satisfy div y + b = 0.
template <int Dim>
struct FluxTarget {
  std::vector<std::vector<Point<Dim - 1>>> a;
  std::vector<std::vector<double>> b;
};

/// a = ∇x u_h, b = f - ∂t u_h.
template <int Dim>
FluxTarget<Dim> primal_flux_target(const EstimatorContext<Dim>& ctx) {
  constexpr int d = Dim - 1;
  FluxTarget<Dim> t;
  t.a.resize(ctx.num_cells());
  t.b.resize(ctx.num_cells());
  for (std::size_t i = 0; i < ctx.num_cells(); ++i) {
    for (const auto& smp : ctx.cell(i)) {
      t.a[i].push_back(smp.grad.template head<d>());
      t.b[i].push_back(smp.f - smp.grad(d));
    }
  }
  return t;
}

/// Flux basis on every primal cell, evaluated through the containing flux cell.
template <int Dim>
class FluxEvaluator {
 public:
  FluxEvaluator(const EstimatorContext<Dim>& ctx, const FluxSpace<Dim>& flux) : ctx_(&ctx), flux_(&flux) {
    const auto& fmesh = flux.space.mesh();
    const auto& fcells = fmesh.active_cells();
    bases_.resize(fcells.size());
    parallel_for(fcells.size(), [&](std::size_t k) { bases_[k] = flux.space.cell_basis(fcells[k]); });
    owner_.resize(ctx.num_cells());
    for (std::size_t i = 0; i < ctx.num_cells(); ++i) {
      const auto box = ctx.disc().mesh().cell_box(ctx.disc().cell(i));
      const Index k = fmesh.find_active(fmesh.locate(box.center()));
      if (k < 0) throw std::logic_error("FluxEvaluator: flux mesh is not coarser than the primal mesh");
      owner_[i] = k;
    }
  }

  [[nodiscard]] const FluxSpace<Dim>& flux() const { return *flux_; }
  [[nodiscard]] const std::vector<CellBasis<Dim>>& flux_cell_bases() const { return bases_; }

  /// Physical values and gradients of the flux scalar basis at the samples of primal cell i.
  [[nodiscard]] ElementBasis<Dim> basis(std::size_t i) const {
    const auto& smp = ctx_->cell(i);
    std::vector<PointGeometry<Dim>> geo;
    geo.reserve(smp.size());
    for (const auto& s : smp) geo.push_back(s.geometry());
    return physical_basis(flux_->space, bases_[owner_[i]], geo, 1);
  }

 private:
  const EstimatorContext<Dim>* ctx_;
  const FluxSpace<Dim>* flux_;
  std::vector<CellBasis<Dim>> bases_;
  std::vector<Index> owner_;
};

/// Div_h, M_h (sharing one pattern) and the vectors z_h, g_h of a flux problem.
struct FluxSystem {
  SparseMatrix Div;
  SparseMatrix Mass;
  Vector z;
  Vector g;
  double assembly_seconds = 0.0;
};

template <int Dim>
FluxSystem assemble_flux_system(const EstimatorContext<Dim>& ctx, const FluxEvaluator<Dim>& ev,
                                const FluxTarget<Dim>& target) {
  constexpr int d = Dim - 1;
  const auto t0 = std::chrono::steady_clock::now();
  const Index N = ev.flux().scalar_dimension();
  const Index n = d * N;
  std::vector<std::vector<Index>> rows(n);
  for (const auto& cb : ev.flux_cell_bases()) {
    std::vector<Index> cols;
    for (int e = 0; e < d; ++e) {
      for (Index j : cb.dofs) cols.push_back(e * N + j);
    }
    for (int c = 0; c < d; ++c) {
      for (Index i : cb.dofs) rows[c * N + i].insert(rows[c * N + i].end(), cols.begin(), cols.end());
    }
  }
  FluxSystem sys;
  sys.Div = SparseMatrix(n, n, rows);
  sys.Mass = SparseMatrix(n, n, std::move(rows));
  sys.z = Vector::Zero(n);
  sys.g = Vector::Zero(n);
  struct Local {
    std::vector<Index> dofs;
    Eigen::MatrixXd D, M;
    Eigen::VectorXd z, g;
  };
  constexpr std::size_t kBatch = 64;
  const std::size_t nc = ctx.num_cells();
  std::vector<Local> batch;
  for (std::size_t b0 = 0; b0 < nc; b0 += kBatch) {
    const std::size_t nb = std::min(kBatch, nc - b0);
    batch.assign(nb, Local{});
    parallel_for(nb, [&](std::size_t k) {
      const std::size_t i = b0 + k;
      const auto eb = ev.basis(i);
      const int m = eb.size();
      Eigen::MatrixXd B(eb.npoints, d * m), V(eb.npoints, m);
      Eigen::VectorXd W(eb.npoints), bq(eb.npoints);
      Eigen::MatrixXd A(eb.npoints, d);
      for (int q = 0; q < eb.npoints; ++q) {
        W(q) = ctx.cell(i)[q].W;
        bq(q) = target.b[i][q];
        A.row(q) = target.a[i][q].transpose();
        for (int r = 0; r < m; ++r) {
          V(q, r) = eb.val[eb.at(q, r)];
          for (int c = 0; c < d; ++c) B(q, c * m + r) = eb.grad[eb.at(q, r)](c);
        }
      }
      auto& L = batch[k];
      L.dofs = eb.dofs;
      L.D = B.transpose() * W.asDiagonal() * B;
      L.M = V.transpose() * W.asDiagonal() * V;
      L.z = B.transpose() * W.cwiseProduct(bq);
      L.g.resize(d * m);
      for (int c = 0; c < d; ++c) L.g.segment(c * m, m) = V.transpose() * W.cwiseProduct(A.col(c));
    });
    for (const auto& L : batch) {
      const int m = static_cast<int>(L.dofs.size());
      for (int c = 0; c < d; ++c) {
        for (int r = 0; r < m; ++r) {
          const Index I = c * N + L.dofs[r];
          sys.z(I) += L.z(c * m + r);
          sys.g(I) += L.g(c * m + r);
          for (int s = 0; s < m; ++s) sys.Mass.add(I, c * N + L.dofs[s], L.M(r, s));
          for (int e = 0; e < d; ++e) {
            for (int s = 0; s < m; ++s) sys.Div.add(I, e * N + L.dofs[s], L.D(c * m + r, e * m + s));
          }
        }
      }
    }
  }
  sys.assembly_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return sys;
}

/// Per-cell ‖y - a‖²_K and ‖div y + b‖²_K.
struct FluxResiduals {
  std::vector<double> dual;
  std::vector<double> eq;
  [[nodiscard]] double md() const { return std::sqrt(detail::sum(dual)); }
  [[nodiscard]] double meq() const { return std::sqrt(detail::sum(eq)); }
};

template <int Dim>
FluxResiduals flux_residuals(const EstimatorContext<Dim>& ctx, const FluxEvaluator<Dim>& ev,
                             const FluxTarget<Dim>& target, const Vector& y) {
  constexpr int d = Dim - 1;
  const Index N = ev.flux().scalar_dimension();
  if (y.size() != d * N) throw std::invalid_argument("flux_residuals: flux coefficient length mismatch");
  FluxResiduals out;
  out.dual.resize(ctx.num_cells());
  out.eq.resize(ctx.num_cells());
  parallel_for(ctx.num_cells(), [&](std::size_t i) {
    const auto eb = ev.basis(i);
    double sd = 0.0, se = 0.0;
    for (int q = 0; q < eb.npoints; ++q) {
      Point<d> yv = Point<d>::Zero();
      double div = 0.0;
      for (int r = 0; r < eb.size(); ++r) {
        const std::size_t k = eb.at(q, r);
        for (int c = 0; c < d; ++c) {
          const double yc = y(c * N + eb.dofs[r]);
          yv(c) += yc * eb.val[k];
          div += yc * eb.grad[k](c);
        }
      }
      const double W = ctx.cell(i)[q].W;
      sd += W * (yv - target.a[i][q]).squaredNorm();
      const double req = div + target.b[i][q];
      se += W * req * req;
    }
    out.dual[i] = sd;
    out.eq[i] = se;
  });
  return out;
}

inline constexpr double kBetaMin = 1e-8;
inline constexpr double kBetaMax = 1e8;

/// β = C_F m_eq / m_d clamped to [1e-8, 1e8]; m_d = 0 gives the upper cap.
inline double optimal_beta(double C_F, double md, double meq) {
  if (!(md > 0.0)) return kBetaMax;
  return std::clamp(C_F * meq / md, kBetaMin, kBetaMax);
}

inline double majorant_value(double beta, double C_F, double md, double meq) {
  return (1.0 + beta) * md * md + (1.0 + 1.0 / beta) * C_F * C_F * meq * meq;
}

struct MajorantReport {
  double md = 0.0;
  double meq = 0.0;
  double beta = 1.0;
  double value = 0.0;
  int iterations = 0;
  Vector y;
  std::vector<double> indicators;  // ‖y - a‖²_K
  std::vector<double> history;     // value after each round
  double solve_seconds = 0.0;
};

/// Solves (C_F² Div + β M) y = -C_F² z + β g.
inline Vector solve_flux(const FluxSystem& sys, double C_F, double beta) {
  SparseMatrix A = sys.Div;
  const double c2 = C_F * C_F;
  auto& av = A.values();
  const auto& mv = sys.Mass.values();
  for (std::size_t k = 0; k < av.size(); ++k) av[k] = c2 * av[k] + beta * mv[k];
  return ldlt_solve(A, -c2 * sys.z + beta * sys.g);
}

/// Alternating minimization over y (linear solve) and β (closed form).
template <int Dim>
MajorantReport minimize_majorant(const EstimatorContext<Dim>& ctx, const FluxEvaluator<Dim>& ev,
                                 const FluxTarget<Dim>& target, const FluxSystem& sys, double C_F, int iters) {
  if (iters < 1) throw std::invalid_argument("majorant: iteration count must be >= 1");
  if (!(C_F > 0.0)) throw std::invalid_argument("majorant: Friedrichs constant must be positive");
  MajorantReport rep;
  rep.beta = 1.0;
  for (int it = 0; it < iters; ++it) {
    const auto t0 = std::chrono::steady_clock::now();
    Vector y;
    try {
      y = solve_flux(sys, C_F, rep.beta);
    } catch (const SolverError&) {
      // Only reachable for extreme β once a residual has vanished.
      if (it == 0) throw;
      break;
    }
    rep.solve_seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    auto res = flux_residuals(ctx, ev, target, y);
    const double md = res.md();
    const double meq = res.meq();
    const double beta = optimal_beta(C_F, md, meq);
    const double value = majorant_value(beta, C_F, md, meq);
    rep.y = std::move(y);
    rep.md = md;
    rep.meq = meq;
    rep.beta = beta;
    rep.value = value;
    rep.indicators = std::move(res.dual);
    rep.history.push_back(value);
    rep.iterations = it + 1;
  }
  return rep;
}

/// Derivative data of the advanced approximation w_h at the estimator samples.
template <int Dim>
struct SampledField {
  std::vector<std::vector<double>> v;
  std::vector<std::vector<Point<Dim>>> grad;
  std::vector<std::vector<double>> top;  // values on t = T
};

/// Samples a field of another THB space whose mesh is coarser than the primal mesh.
template <int Dim>
SampledField<Dim> sample_field(const EstimatorContext<Dim>& ctx, const HierarchicalSplineSpace<Dim>& space,
                               const Vector& coef) {
  const auto& mesh = space.mesh();
  SampledField<Dim> out;
  const std::size_t nc = ctx.num_cells();
  out.v.resize(nc);
  out.grad.resize(nc);
  out.top.resize(nc);
  std::vector<Index> owner(nc);
  for (std::size_t i = 0; i < nc; ++i) {
    const auto box = ctx.disc().mesh().cell_box(ctx.disc().cell(i));
    owner[i] = mesh.find_active(mesh.locate(box.center()));
    if (owner[i] < 0) throw std::logic_error("sample_field: mesh is not coarser than the primal mesh");
  }
  std::vector<CellBasis<Dim>> bases(mesh.num_active());
  parallel_for(bases.size(), [&](std::size_t k) { bases[k] = space.cell_basis(mesh.active_cells()[k]); });
  parallel_for(nc, [&](std::size_t i) {
    const auto& cb = bases[owner[i]];
    std::vector<PointGeometry<Dim>> geo;
    for (const auto& s : ctx.cell(i)) geo.push_back(s.geometry());
    const auto eb = physical_basis(space, cb, geo, 1);
    for (int q = 0; q < eb.npoints; ++q) {
      const auto fv = field_at(eb, coef, q);
      out.v[i].push_back(fv.v);
      out.grad[i].push_back(fv.grad);
    }
    if (!ctx.top(i).empty()) {
      std::vector<PointGeometry<Dim>> tg;
      for (const auto& s : ctx.top(i)) tg.push_back(s.geometry());
      const auto tb = physical_basis(space, cb, tg, 0);
      for (int q = 0; q < tb.npoints; ++q) out.top[i].push_back(field_at(tb, coef, q).v);
    }
  });
  return out;
}

/// a = 2∇x u_h - ∇x w_h, b = f - ∂t w_h, so that ‖y - a‖ = ‖r_d‖ and ‖div y + b‖ = ‖r_eq‖.
template <int Dim>
FluxTarget<Dim> advanced_flux_target(const EstimatorContext<Dim>& ctx, const SampledField<Dim>& w) {
  constexpr int d = Dim - 1;
  FluxTarget<Dim> t;
  t.a.resize(ctx.num_cells());
  t.b.resize(ctx.num_cells());
  for (std::size_t i = 0; i < ctx.num_cells(); ++i) {
    const auto& cs = ctx.cell(i);
    for (std::size_t q = 0; q < cs.size(); ++q) {
      t.a[i].push_back((2.0 * cs[q].grad - w.grad[i][q]).template head<d>());
      t.b[i].push_back(cs[q].f - w.grad[i][q](d));
    }
  }
  return t;
}

struct MajorantIIReport {
  double value = 0.0;
  double top = 0.0;  // ‖w_h - u_h‖²_ΣT
  double F = 0.0;
  double rd = 0.0;
  double req = 0.0;
  double beta = 1.0;
};

/// M^II = ‖w - u‖²_ΣT + 2F(u, w) + (1+β)‖r_d‖² + C_F²(1+1/β)‖r_eq‖² with
/// F(u, w) = (∇x u, ∇x(w - u)) + (∂t u - f, w - u) and β = C_F‖r_eq‖/‖r_d‖.
template <int Dim>
MajorantIIReport majorant_II(const EstimatorContext<Dim>& ctx, const SampledField<Dim>& w, const FluxEvaluator<Dim>& ev,
                             const Vector& y, double C_F) {
  constexpr int d = Dim - 1;
  const auto target = advanced_flux_target(ctx, w);
  const auto res = flux_residuals(ctx, ev, target, y);
  std::vector<std::array<double, 2>> part(ctx.num_cells());
  parallel_for(ctx.num_cells(), [&](std::size_t i) {
    double F = 0.0, top = 0.0;
    const auto& cs = ctx.cell(i);
    for (std::size_t q = 0; q < cs.size(); ++q) {
      const auto& s = cs[q];
      const Point<Dim> dg = w.grad[i][q] - s.grad;
      F += s.W * (s.grad.template head<d>().dot(dg.template head<d>()) + (s.grad(d) - s.f) * (w.v[i][q] - s.v));
    }
    const auto& ts = ctx.top(i);
    for (std::size_t q = 0; q < ts.size(); ++q) {
      const double e = w.top[i][q] - ts[q].v;
      top += ts[q].W * e * e;
    }
    part[i] = {F, top};
  });
  MajorantIIReport rep;
  for (const auto& p : part) {
    rep.F += p[0];
    rep.top += p[1];
  }
  rep.rd = res.md();
  rep.req = res.meq();
  rep.beta = optimal_beta(C_F, rep.rd, rep.req);
  rep.value = rep.top + 2.0 * rep.F + majorant_value(rep.beta, C_F, rep.rd, rep.req);
  return rep;
}

/// Square-root effectivity indices; NaN when the error norm vanishes.
struct Effectivity {
  double majorant_I = std::numeric_limits<double>::quiet_NaN();
  double majorant_II = std::numeric_limits<double>::quiet_NaN();
  double identity = std::numeric_limits<double>::quiet_NaN();
};

inline Effectivity effectivity(const ErrorNorms& e, double MI, double MII, double EId) {
  Effectivity out;
  if (e.energy > 0.0) out.majorant_I = std::sqrt(std::max(MI, 0.0)) / e.energy;
  if (e.grad_x > 0.0 && !std::isnan(MII)) out.majorant_II = std::sqrt(std::max(MII, 0.0)) / e.grad_x;
  if (e.L > 0.0) out.identity = EId / e.L;
  return out;
}

}  // namespace stiga
