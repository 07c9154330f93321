#pragma once

#include "stiga/fields.hpp"
#include "stiga/parallel.hpp"

#include <chrono>
#include <functional>
#include <map>
#include <mutex>

namespace stiga {

enum class StabilizationMode { local, global, off };

inline StabilizationMode parse_stabilization(std::string_view s) {
  if (s == "local") return StabilizationMode::local;
  if (s == "global") return StabilizationMode::global;
  if (s == "off") return StabilizationMode::off;
  throw std::invalid_argument("unknown stabilization mode: " + std::string(s));
}

inline std::string to_string(StabilizationMode m) {
  switch (m) {
    case StabilizationMode::local:
      return "local";
    case StabilizationMode::global:
      return "global";
    case StabilizationMode::off:
      return "off";
  }
  return "?";
}

/// δ_K = θ_K h_K with θ_K = min(θ, h_K / (d C_int1²)) when the bound is on.
struct StabilizationConfig {
  StabilizationMode mode = StabilizationMode::local;
  double theta = 0.1;
  bool bound_theta = true;
  double C_int1 = 0.0;  // <= 0: estimated from the degree
  int d = 1;
};

/// Inverse-inequality constant C with ‖∇v‖ <= C h^-1 ‖v‖ for Q_p polynomials
/// on a spatial cube of side `width` and diameter h = width √d. Computed from
/// the largest generalized eigenvalue of stiffness against mass.
inline double inverse_constant(int p, int d, double width = 1.0) {
  if (p < 1 || p > kMaxDegree) throw std::invalid_argument("inverse_constant: degree out of range");
  if (d < 1 || d > 3) throw std::invalid_argument("inverse_constant: dimension out of range");
  if (!(width > 0.0)) throw std::invalid_argument("inverse_constant: width must be positive");
  static std::mutex mtx;
  static std::map<std::pair<int, int>, double> cache;
  if (width == 1.0) {
    std::lock_guard<std::mutex> lock(mtx);
    if (auto it = cache.find({p, d}); it != cache.end()) return it->second;
  }
  // 1D Bernstein mass and stiffness on [0, width].
  const KnotVector kv = KnotVector::uniform(p, 1);
  const auto rule = gauss_rule(p + 1);
  const int n = p + 1;
  Eigen::MatrixXd M1 = Eigen::MatrixXd::Zero(n, n);
  Eigen::MatrixXd S1 = Eigen::MatrixXd::Zero(n, n);
  for (int q = 0; q < rule.points(); ++q) {
    const auto e = eval_univariate(kv, rule.nodes[q], 1);
    const double w = rule.weights[q] * width;
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        M1(i, j) += w * e.value(i) * e.value(j);
        S1(i, j) += w * e.value(i, 1) * e.value(j, 1) / (width * width);
      }
    }
  }
  auto kron = [](const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
    Eigen::MatrixXd K(A.rows() * B.rows(), A.cols() * B.cols());
    for (Index i = 0; i < A.rows(); ++i) {
      for (Index j = 0; j < A.cols(); ++j) K.block(i * B.rows(), j * B.cols(), B.rows(), B.cols()) = A(i, j) * B;
    }
    return K;
  };
  Eigen::MatrixXd M = M1;
  Eigen::MatrixXd S = S1;
  for (int a = 1; a < d; ++a) {
    S = (kron(S, M1) + kron(M, S1)).eval();
    M = kron(M, M1).eval();
  }
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(S, M, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw SolverError("inverse_constant: eigen-solve failed");
  const double C = std::sqrt(es.eigenvalues().maxCoeff()) * width * std::sqrt(static_cast<double>(d));
  if (width == 1.0) {
    std::lock_guard<std::mutex> lock(mtx);
    cache[{p, d}] = C;
  }
  return C;
}

/// Same constant under the name used by the solver configuration.
inline double estimate_cinv(int p, int d) { return inverse_constant(p, d); }

/// δ for an element of size h_K; `global_h` is used in global mode.
inline double compute_delta(double h_K, const StabilizationConfig& cfg, double global_h) {
  auto theta_for = [&](double h) {
    if (!cfg.bound_theta) return cfg.theta;
    if (!(cfg.C_int1 > 0.0)) throw std::invalid_argument("compute_delta: C_int1 must be resolved");
    return std::min(cfg.theta, h / (cfg.d * cfg.C_int1 * cfg.C_int1));
  };
  switch (cfg.mode) {
    case StabilizationMode::off:
      return 0.0;
    case StabilizationMode::local:
      return theta_for(h_K) * h_K;
    case StabilizationMode::global:
      return theta_for(global_h) * global_h;
  }
  return 0.0;
}

template <int Dim>
double compute_delta(const MappedElement<Dim>& el, const StabilizationConfig& cfg, double global_h = 0.0) {
  return compute_delta(el.h, cfg, global_h > 0.0 ? global_h : el.h);
}

/// Space, map, stabilization and quadrature bundled with per-cell h_K and δ_K.
template <int Dim>
class Discretization {
 public:
  Discretization(HierarchicalSplineSpace<Dim> space, GeometryMap<Dim> geo, StabilizationConfig cfg,
                 int quad_points = 0)
      : space_(std::move(space)), geo_(std::move(geo)), cfg_(cfg) {
    int pmax = 0;
    for (int a = 0; a < Dim; ++a) pmax = std::max(pmax, space_.degree()[a]);
    cfg_.d = Dim - 1;
    if (!(cfg_.theta > 0.0)) throw std::invalid_argument("stabilization theta must be positive");
    if (!(cfg_.C_int1 > 0.0)) cfg_.C_int1 = inverse_constant(pmax, Dim - 1);
    rule_ = gauss_rule(quad_points > 0 ? quad_points : pmax + 2, Dim);
    const auto& cells = space_.mesh().active_cells();
    h_.resize(cells.size());
    parallel_for(cells.size(), [&](std::size_t i) {
      h_[i] = element_size(geo_, space_.mesh().cell_box(cells[i]), std::min(rule_.points(), 4));
    });
    global_h_ = h_.empty() ? 0.0 : *std::max_element(h_.begin(), h_.end());
    delta_.resize(cells.size());
    for (std::size_t i = 0; i < cells.size(); ++i) delta_[i] = compute_delta(h_[i], cfg_, global_h_);
  }

  [[nodiscard]] const HierarchicalSplineSpace<Dim>& space() const { return space_; }
  [[nodiscard]] const HierarchicalMesh<Dim>& mesh() const { return space_.mesh(); }
  [[nodiscard]] const GeometryMap<Dim>& geometry() const { return geo_; }
  [[nodiscard]] const StabilizationConfig& config() const { return cfg_; }
  [[nodiscard]] const GaussRule& rule() const { return rule_; }
  [[nodiscard]] std::size_t num_cells() const { return h_.size(); }
  [[nodiscard]] const Cell<Dim>& cell(std::size_t i) const { return space_.mesh().active_cells()[i]; }
  [[nodiscard]] double h(std::size_t i) const { return h_[i]; }
  [[nodiscard]] double delta(std::size_t i) const { return delta_[i]; }
  [[nodiscard]] const std::vector<double>& deltas() const { return delta_; }
  [[nodiscard]] double global_h() const { return global_h_; }
  [[nodiscard]] Index dimension() const { return space_.dimension(); }

  /// Quadrature points and geometry of cell i (h filled from the cache).
  [[nodiscard]] MappedElement<Dim> element(std::size_t i, const GaussRule* rule = nullptr) const {
    MappedElement<Dim> el;
    el.cell = cell(i);
    el.box = space_.mesh().cell_box(el.cell);
    el.points = box_points(rule ? *rule : rule_, el.box);
    el.geometry = face_geometry(geo_, el.points, 2);
    el.h = h_[i];
    return el;
  }

 private:
  HierarchicalSplineSpace<Dim> space_;
  GeometryMap<Dim> geo_;
  StabilizationConfig cfg_;
  GaussRule rule_;
  std::vector<double> h_;
  std::vector<double> delta_;
  double global_h_ = 0.0;
};

/// Space of the given degree on the patch breakpoints after `refinements`
/// uniform dyadic refinements.
template <int Dim>
HierarchicalSplineSpace<Dim> uniform_space(const GeometryMap<Dim>& geo, int degree, int refinements,
                                           int max_level = HierarchicalMesh<Dim>::kDefaultMaxLevel) {
  std::array<int, Dim> deg;
  deg.fill(degree);
  HierarchicalMesh<Dim> mesh(geo.breakpoints(), deg, max_level);
  for (int r = 0; r < refinements; ++r) {
    const std::vector<Cell<Dim>> all = mesh.active_cells();
    mesh = mesh.refine_marked(all);
  }
  return HierarchicalSplineSpace<Dim>(std::move(mesh), deg);
}

template <int Dim>
using ScalarField = std::function<double(const SamplePoint<Dim>&)>;

/// Fixed (boundary) and free coefficient partition with the fixed values.
struct DirichletData {
  std::vector<Index> fixed;
  std::vector<Index> free;
  Vector values;  // full length; only fixed entries are meaningful
  bool interpolated = true;  // false if the L2 face projection fallback was used
};

/// Functions with a nonzero trace on the lateral boundary or on t = 0.
template <int Dim>
std::vector<char> boundary_functions(const HierarchicalSplineSpace<Dim>& space) {
  std::vector<char> flag(space.dimension(), 0);
  const auto& mesh = space.mesh();
  for (const auto& c : mesh.active_cells()) {
    std::vector<std::pair<int, int>> faces;  // (direction, local index on the face)
    for (int a = 0; a < Dim; ++a) {
      const int n = space.level_space(c.level).size(a);
      if (c.index[a] == 0) faces.push_back({a, 0});
      if (a < Dim - 1 && c.index[a] == mesh.cells_per_dir(c.level, a) - 1) faces.push_back({a, n - 1});
    }
    if (faces.empty()) continue;
    const auto cb = space.cell_basis(c);
    const auto start = space.tensor_window(c);
    for (Index k = 0; k < cb.coef.cols(); ++k) {
      std::array<int, Dim> m{};
      Index rem = k;
      for (int a = 0; a < Dim; ++a) {
        m[a] = start[a] + static_cast<int>(rem % (space.degree()[a] + 1));
        rem /= (space.degree()[a] + 1);
      }
      bool on_face = false;
      for (const auto& [a, idx] : faces) on_face = on_face || m[a] == idx;
      if (!on_face) continue;
      for (Index r = 0; r < cb.coef.rows(); ++r) {
        if (cb.coef(r, k) != 0.0) flag[cb.dofs[r]] = 1;
      }
    }
  }
  return flag;
}

/// Fixes boundary coefficients by collocation at the Greville points of the
/// generating B-splines: u_D on lateral faces, u_0 on t = 0.
template <int Dim>
DirichletData impose_dirichlet(const Discretization<Dim>& disc, const ScalarField<Dim>& u_D,
                               const ScalarField<Dim>& u_0) {
  const auto& space = disc.space();
  const auto flag = boundary_functions(space);
  DirichletData dd;
  dd.values = Vector::Zero(space.dimension());
  std::vector<Index> pos(space.dimension(), -1);
  for (Index i = 0; i < space.dimension(); ++i) {
    if (flag[i]) {
      pos[i] = static_cast<Index>(dd.fixed.size());
      dd.fixed.push_back(i);
    } else {
      dd.free.push_back(i);
    }
  }
  const Index nf = static_cast<Index>(dd.fixed.size());
  if (nf == 0) return dd;
  auto data_at = [&](const Point<Dim>& xi) {
    SamplePoint<Dim> s{disc.geometry().evaluate(xi, 1).x, xi};
    bool lateral = false;
    for (int a = 0; a < Dim - 1; ++a) lateral = lateral || xi(a) == 0.0 || xi(a) == 1.0;
    return lateral ? u_D(s) : u_0(s);
  };
  std::vector<SparseMatrix::Triplet> t;
  Vector rhs(nf);
  bool all_zero = true;
  for (Index k = 0; k < nf; ++k) {
    const Point<Dim> g = space.greville_point(dd.fixed[k]);
    rhs(k) = data_at(g);
    all_zero = all_zero && rhs(k) == 0.0;
    const auto e = space.eval_active(g, 0);
    for (std::size_t r = 0; r < e.dofs.size(); ++r) {
      const Index j = pos[e.dofs[r]];
      if (j >= 0 && e.values[r] != 0.0) t.push_back({k, j, e.values[r]});
    }
  }
  if (all_zero) return dd;
  Vector c;
  try {
    c = lu_solve(SparseMatrix::from_triplets(nf, nf, std::move(t)), rhs);
  } catch (const SolverError&) {
    // L2 projection of the data onto the boundary traces.
    dd.interpolated = false;
    std::vector<SparseMatrix::Triplet> mt;
    Vector b = Vector::Zero(nf);
    const auto rule = gauss_rule(disc.rule().points(), Dim - 1);
    const auto& mesh = space.mesh();
    for (const auto& cell : mesh.active_cells()) {
      const auto box = mesh.cell_box(cell);
      for (int a = 0; a < Dim; ++a) {
        for (int side = 0; side < (a < Dim - 1 ? 2 : 1); ++side) {
          const int boundary_index = side == 0 ? 0 : mesh.cells_per_dir(cell.level, a) - 1;
          if (cell.index[a] != boundary_index) continue;
          const auto pts = face_points(rule, box, a, side == 1);
          const auto geo = face_geometry(disc.geometry(), pts, 0);
          const auto eb = physical_basis(space, space.cell_basis(cell), geo, 0);
          for (int q = 0; q < eb.npoints; ++q) {
            const double w = pts[q].w * face_measure(geo[q], a);
            const double val = data_at(pts[q].xi);
            for (int r = 0; r < eb.size(); ++r) {
              const Index i = pos[eb.dofs[r]];
              if (i < 0) continue;
              b(i) += w * val * eb.val[eb.at(q, r)];
              for (int s = 0; s < eb.size(); ++s) {
                const Index j = pos[eb.dofs[s]];
                if (j >= 0) mt.push_back({i, j, w * eb.val[eb.at(q, r)] * eb.val[eb.at(q, s)]});
              }
            }
          }
        }
      }
    }
    c = ldlt_solve(SparseMatrix::from_triplets(nf, nf, std::move(mt)), b);
  }
  for (Index k = 0; k < nf; ++k) dd.values(dd.fixed[k]) = c(k);
  return dd;
}

/// Bit mask selecting the terms of the element form (used to test them one by one).
enum AssemblyTerm : unsigned {
  kTimeDerivative = 1u,  // (∂t u, v)
  kStiffness = 2u,       // (∇x u, ∇x v)
  kUpwindTime = 4u,      // δ (∂t u, ∂t v)
  kUpwindLaplace = 8u,   // -δ (Δx u, ∂t v), or δ (∇x u, ∂t ∇x v) in global mode
  kAllTerms = 15u,
};

/// Element matrix (rows = test functions) and load of one active cell.
struct ElementSystem {
  std::vector<Index> dofs;
  Eigen::MatrixXd K;
  Eigen::VectorXd f;
};

template <int Dim>
ElementSystem element_system(const Discretization<Dim>& disc, std::size_t i, const ScalarField<Dim>* f,
                             unsigned terms = kAllTerms) {
  const auto el = disc.element(i);
  const auto eb = physical_basis(disc.space(), disc.space().cell_basis(el.cell), el.geometry, 2);
  const int n = eb.size();
  const double delta = disc.delta(i);
  const bool global = disc.config().mode == StabilizationMode::global;
  constexpr int d = Dim - 1;
  ElementSystem es;
  es.dofs = eb.dofs;
  es.K = Eigen::MatrixXd::Zero(n, n);
  es.f = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd v(n), dt(n), lap(n);
  Eigen::MatrixXd gx(n, d), dtgx(n, d);
  for (int q = 0; q < eb.npoints; ++q) {
    const auto& g = el.geometry[q];
    const double W = el.points[q].w * std::abs(g.detJ);
    for (int r = 0; r < n; ++r) {
      const std::size_t k = eb.at(q, r);
      v(r) = eb.val[k];
      dt(r) = eb.grad[k](d);
      lap(r) = eb.lap_x(q, r);
      for (int a = 0; a < d; ++a) {
        gx(r, a) = eb.grad[k](a);
        dtgx(r, a) = eb.hess[k](a, d);
      }
    }
    if (terms & kTimeDerivative) es.K.noalias() += W * v * dt.transpose();
    if (terms & kStiffness) es.K.noalias() += W * gx * gx.transpose();
    if (delta != 0.0) {
      if (terms & kUpwindTime) es.K.noalias() += (W * delta) * dt * dt.transpose();
      if (terms & kUpwindLaplace) {
        if (global) {
          es.K.noalias() += (W * delta) * dtgx * gx.transpose();
        } else {
          es.K.noalias() -= (W * delta) * dt * lap.transpose();
        }
      }
    }
    if (f) {
      const double fv = (*f)(SamplePoint<Dim>{g.x, g.xi});
      es.f += (W * fv) * (v + delta * dt);
    }
  }
  return es;
}

/// K_h, f_h and the Dirichlet partition.
struct StabilizedSystem {
  SparseMatrix K;
  Vector f;
  DirichletData dirichlet;
  std::vector<double> delta;
  double assembly_seconds = 0.0;

  /// K_ff and f_f - K_fd g.
  [[nodiscard]] std::pair<SparseMatrix, Vector> reduced() const {
    const auto& fr = dirichlet.free;
    SparseMatrix Kff = K.submatrix(fr, fr);
    const Vector Kg = K.multiply(dirichlet.values);
    Vector rhs(static_cast<Index>(fr.size()));
    for (std::size_t i = 0; i < fr.size(); ++i) rhs(static_cast<Index>(i)) = f(fr[i]) - Kg(fr[i]);
    return {std::move(Kff), std::move(rhs)};
  }
};

/// Sparsity from the cell dof lists: row i holds every j sharing a cell with i.
template <int Dim>
SparseMatrix allocate_pattern(const std::vector<std::vector<Index>>& cell_dofs, Index n) {
  std::vector<std::vector<Index>> rows(n);
  for (const auto& dofs : cell_dofs) {
    for (Index i : dofs) rows[i].insert(rows[i].end(), dofs.begin(), dofs.end());
  }
  return SparseMatrix(n, n, std::move(rows));
}

/// Assembles the stabilized space-time system; element contributions are
/// computed in parallel batches and added in cell order.
template <int Dim>
StabilizedSystem assemble_stabilized_system(const Discretization<Dim>& disc, const ScalarField<Dim>& f,
                                            unsigned terms = kAllTerms) {
  for (int a = 0; a < Dim; ++a) {
    if (disc.space().degree()[a] < 2) throw std::invalid_argument("assembly: the stabilized form needs degree >= 2");
  }
  const auto t0 = std::chrono::steady_clock::now();
  const std::size_t nc = disc.num_cells();
  const Index n = disc.dimension();
  StabilizedSystem sys;
  sys.f = Vector::Zero(n);
  sys.delta = disc.deltas();
  std::vector<ElementSystem> all(nc);
  parallel_for(nc, [&](std::size_t i) { all[i] = element_system(disc, i, &f, terms); });
  std::vector<std::vector<Index>> cell_dofs(nc);
  for (std::size_t i = 0; i < nc; ++i) cell_dofs[i] = all[i].dofs;
  sys.K = allocate_pattern<Dim>(cell_dofs, n);
  for (std::size_t i = 0; i < nc; ++i) {
    const auto& es = all[i];
    for (std::size_t r = 0; r < es.dofs.size(); ++r) {
      sys.f(es.dofs[r]) += es.f(static_cast<Index>(r));
      for (std::size_t s = 0; s < es.dofs.size(); ++s) {
        sys.K.add(es.dofs[r], es.dofs[s], es.K(static_cast<Index>(r), static_cast<Index>(s)));
      }
    }
  }
  sys.assembly_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return sys;
}

/// Solves with the fixed values imposed; returns the full coefficient vector.
inline Vector solve(const StabilizedSystem& sys, double* seconds = nullptr) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto [Kff, rhs] = sys.reduced();
  const Vector uf = lu_solve(Kff, rhs);
  Vector u = sys.dirichlet.values;
  for (std::size_t i = 0; i < sys.dirichlet.free.size(); ++i) u(sys.dirichlet.free[i]) = uf(static_cast<Index>(i));
  if (seconds) *seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return u;
}

/// A solved stabilized problem with its timings.
template <int Dim>
struct PrimalSolution {
  Discretization<Dim> disc;
  StabilizedSystem system;
  Vector u;
  double assembly_seconds = 0.0;
  double solve_seconds = 0.0;
};

/// Assembles, imposes the boundary and initial data, and solves.
template <int Dim>
PrimalSolution<Dim> solve_stabilized(HierarchicalSplineSpace<Dim> space, const GeometryMap<Dim>& geo,
                                     const StabilizationConfig& cfg, const ScalarField<Dim>& f,
                                     const ScalarField<Dim>& u_D, const ScalarField<Dim>& u_0) {
  const auto t0 = std::chrono::steady_clock::now();
  Discretization<Dim> disc(std::move(space), geo, cfg);
  auto sys = assemble_stabilized_system(disc, f);
  sys.dirichlet = impose_dirichlet(disc, u_D, u_0);
  const double t_as = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  double t_sol = 0.0;
  Vector u = solve(sys, &t_sol);
  return {std::move(disc), std::move(sys), std::move(u), t_as, t_sol};
}

/// Symmetric part of the free block is positive definite (sparse Cholesky).
inline bool free_block_positive_definite(const StabilizedSystem& sys) {
  return is_positive_definite(sys.K.submatrix(sys.dirichlet.free, sys.dirichlet.free).symmetric_part());
}

/// a_loc,h(u, v) (or a_h in global mode) by element quadrature.
template <int Dim>
double apply_bilinear(const Discretization<Dim>& disc, const Vector& u, const Vector& v) {
  if (u.size() != disc.dimension() || v.size() != disc.dimension()) {
    throw std::invalid_argument("apply_bilinear: coefficient length mismatch");
  }
  constexpr int d = Dim - 1;
  const bool global = disc.config().mode == StabilizationMode::global;
  std::vector<double> part(disc.num_cells(), 0.0);
  parallel_for(disc.num_cells(), [&](std::size_t i) {
    const auto el = disc.element(i);
    const auto eb = physical_basis(disc.space(), disc.space().cell_basis(el.cell), el.geometry, 2);
    const double delta = disc.delta(i);
    double s = 0.0;
    for (int q = 0; q < eb.npoints; ++q) {
      const auto U = field_at(eb, u, q);
      const auto V = field_at(eb, v, q);
      const Point<d> gu = U.grad.template head<d>();
      const Point<d> gv = V.grad.template head<d>();
      double val = U.dt() * V.v + gu.dot(gv) + delta * U.dt() * V.dt();
      if (global) {
        val += delta * gu.dot(V.hess.col(d).template head<d>());
      } else {
        val -= delta * U.lap_x() * V.dt();
      }
      s += el.points[q].w * std::abs(el.geometry[q].detJ) * val;
    }
    part[i] = s;
  });
  double total = 0.0;
  for (double p : part) total += p;
  return total;
}

/// Indices of the active cells touching the top face t = T.
template <int Dim>
bool touches_top(const HierarchicalMesh<Dim>& mesh, const Cell<Dim>& c) {
  return c.index[Dim - 1] == mesh.cells_per_dir(c.level, Dim - 1) - 1;
}

template <int Dim>
bool touches_bottom(const Cell<Dim>& c) {
  return c.index[Dim - 1] == 0;
}

/// |||v|||²_loc,h = ‖∇x v‖²_Q + ½‖v‖²_ΣT + Σ_K δ_K ‖∂t v‖²_K.
template <int Dim>
double norm_loc_h_squared(const Discretization<Dim>& disc, const Vector& v) {
  if (v.size() != disc.dimension()) throw std::invalid_argument("norm_loc_h: coefficient length mismatch");
  constexpr int d = Dim - 1;
  const auto face_rule = gauss_rule(disc.rule().points(), Dim - 1);
  std::vector<double> part(disc.num_cells(), 0.0);
  parallel_for(disc.num_cells(), [&](std::size_t i) {
    const auto el = disc.element(i);
    const auto cb = disc.space().cell_basis(el.cell);
    const auto eb = physical_basis(disc.space(), cb, el.geometry, 1);
    double s = 0.0;
    for (int q = 0; q < eb.npoints; ++q) {
      const auto V = field_at(eb, v, q);
      s += el.points[q].w * std::abs(el.geometry[q].detJ) *
           (V.grad.template head<d>().squaredNorm() + disc.delta(i) * V.dt() * V.dt());
    }
    if (touches_top(disc.mesh(), el.cell)) {
      const auto pts = face_points(face_rule, el.box, Dim - 1, true);
      const auto geo = face_geometry(disc.geometry(), pts, 1);
      const auto fb = physical_basis(disc.space(), cb, geo, 0);
      for (int q = 0; q < fb.npoints; ++q) {
        const double val = field_at(fb, v, q).v;
        s += 0.5 * pts[q].w * face_measure(geo[q], Dim - 1) * val * val;
      }
    }
    part[i] = s;
  });
  double total = 0.0;
  for (double p : part) total += p;
  return total;
}

template <int Dim>
double norm_loc_h(const Discretization<Dim>& disc, const Vector& v) {
  return std::sqrt(norm_loc_h_squared(disc, v));
}

}  // namespace stiga
