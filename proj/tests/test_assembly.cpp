#include "stiga/assembly.hpp"
#include "stiga/problems.hpp"

#include <gtest/gtest.h>

#include <numbers>
#include <random>

using namespace stiga;

namespace {

template <int Dim>
struct Solved {
  Discretization<Dim> disc;
  StabilizedSystem sys;
  Vector u;
};

template <int Dim>
Solved<Dim> solve_case(const ProblemCase<Dim>& pc, int degree, int refinements,
                       StabilizationConfig cfg = {}) {
  const auto geo = pc.geometry();
  Discretization<Dim> disc(uniform_space(geo, degree, refinements), geo, cfg);
  auto sys = assemble_stabilized_system(disc, pc.f);
  sys.dirichlet = impose_dirichlet(disc, pc.u_D, pc.u_0);
  Vector u = solve(sys);
  return {std::move(disc), std::move(sys), std::move(u)};
}

template <int Dim>
double eval_field(const HierarchicalSplineSpace<Dim>& space, const Vector& c, const Point<Dim>& xi) {
  const auto e = space.eval_active(xi, 0);
  double s = 0.0;
  for (std::size_t r = 0; r < e.dofs.size(); ++r) s += c(e.dofs[r]) * e.values[r];
  return s;
}

template <int Dim>
Point<Dim> random_point(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> U(0.0, 1.0);
  Point<Dim> x;
  for (int a = 0; a < Dim; ++a) x(a) = U(rng);
  return x;
}

// Gram matrix of the norm |||.|||_loc,h: stiffness, δ-weighted time
// derivative and half the top-face mass.
template <int Dim>
Eigen::MatrixXd norm_gram(const Discretization<Dim>& disc) {
  const Index n = disc.dimension();
  Eigen::MatrixXd N = Eigen::MatrixXd::Zero(n, n);
  const auto face_rule = gauss_rule(disc.rule().points(), Dim - 1);
  for (std::size_t i = 0; i < disc.num_cells(); ++i) {
    const auto es = element_system<Dim>(disc, i, nullptr, kStiffness | kUpwindTime);
    for (std::size_t r = 0; r < es.dofs.size(); ++r) {
      for (std::size_t s = 0; s < es.dofs.size(); ++s) N(es.dofs[r], es.dofs[s]) += es.K(r, s);
    }
    const auto c = disc.cell(i);
    if (!touches_top(disc.mesh(), c)) continue;
    const auto pts = face_points(face_rule, disc.mesh().cell_box(c), Dim - 1, true);
    const auto geo = face_geometry(disc.geometry(), pts, 1);
    const auto fb = physical_basis(disc.space(), disc.space().cell_basis(c), geo, 0);
    for (int q = 0; q < fb.npoints; ++q) {
      const double w = 0.5 * pts[q].w * face_measure(geo[q], Dim - 1);
      for (int r = 0; r < fb.size(); ++r) {
        for (int s = 0; s < fb.size(); ++s) {
          N(fb.dofs[r], fb.dofs[s]) += w * fb.val[fb.at(q, r)] * fb.val[fb.at(q, s)];
        }
      }
    }
  }
  return N;
}

template <int Dim>
Eigen::MatrixXd restrict_dense(const Eigen::MatrixXd& A, const std::vector<Index>& idx) {
  Eigen::MatrixXd B(idx.size(), idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    for (std::size_t j = 0; j < idx.size(); ++j) B(i, j) = A(idx[i], idx[j]);
  }
  return B;
}

// Smallest generalized eigenvalue of sym(K_ff) against the norm Gram matrix.
template <int Dim>
double coercivity_constant(const Discretization<Dim>& disc) {
  const auto sys = assemble_stabilized_system<Dim>(disc, [](const SamplePoint<Dim>&) { return 0.0; });
  const auto flag = boundary_functions(disc.space());
  std::vector<Index> fr;
  for (Index i = 0; i < disc.dimension(); ++i) {
    if (!flag[i]) fr.push_back(i);
  }
  const Eigen::MatrixXd K = sys.K.to_dense();
  const Eigen::MatrixXd Ks = restrict_dense<Dim>(0.5 * (K + K.transpose()), fr);
  const Eigen::MatrixXd N = restrict_dense<Dim>(norm_gram(disc), fr);
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(Ks, N, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

}  // namespace

TEST(InverseConstant, LinearCase) {
  EXPECT_NEAR(inverse_constant(1, 1), 2.0 * std::sqrt(3.0), 1e-12);
  // Q1 in 2D: λmax adds over directions, diameter √2.
  EXPECT_NEAR(inverse_constant(1, 2), std::sqrt(24.0) * std::sqrt(2.0), 1e-10);
}

TEST(InverseConstant, ScaleInvariantAndMonotone) {
  for (int d = 1; d <= 2; ++d) {
    double prev = 0.0;
    for (int p = 1; p <= 5; ++p) {
      const double c = inverse_constant(p, d);
      EXPECT_GT(c, prev);
      EXPECT_NEAR(inverse_constant(p, d, 0.125), c, 1e-9 * c);
      prev = c;
    }
  }
  EXPECT_THROW(inverse_constant(0, 1), std::invalid_argument);
  EXPECT_THROW(inverse_constant(2, 1, -1.0), std::invalid_argument);
}

TEST(ComputeDelta, Examples) {
  StabilizationConfig cfg;
  cfg.C_int1 = 2.0 * std::sqrt(3.0);
  cfg.d = 1;
  // θ_K = min(0.1, 0.25 / 12).
  EXPECT_NEAR(compute_delta(0.25, cfg, 0.5), 0.25 * 0.25 / 12.0, 1e-15);
  // Large cell: θ is the active bound.
  EXPECT_NEAR(compute_delta(4.0, cfg, 4.0), 0.4, 1e-15);
  cfg.bound_theta = false;
  EXPECT_NEAR(compute_delta(0.25, cfg, 0.5), 0.025, 1e-15);
  cfg.mode = StabilizationMode::global;
  EXPECT_NEAR(compute_delta(0.25, cfg, 0.5), 0.05, 1e-15);
  cfg.mode = StabilizationMode::off;
  EXPECT_EQ(compute_delta(0.25, cfg, 0.5), 0.0);
  EXPECT_THROW(parse_stabilization("none"), std::invalid_argument);
}

TEST(Discretization, DeltaIsMonotoneInCellSize) {
  const auto pc = example_case<2>("ex2");
  const auto geo = pc.geometry();
  auto space = uniform_space(geo, 2, 1);
  std::vector<Cell<2>> mark{space.mesh().active_cells()[0]};
  HierarchicalSplineSpace<2> fine(space.mesh().refine_marked(mark), space.degree());
  Discretization<2> disc(std::move(fine), geo, {});
  for (std::size_t i = 0; i < disc.num_cells(); ++i) {
    for (std::size_t j = 0; j < disc.num_cells(); ++j) {
      if (disc.h(i) <= disc.h(j)) EXPECT_LE(disc.delta(i), disc.delta(j));
    }
  }
}

TEST(BoundaryFunctions, TensorCount) {
  const auto geo = benchmark_patch<2>(PatchId::unit_interval_time, 1.0);
  for (int r = 0; r < 3; ++r) {
    const auto space = uniform_space(geo, 2, r);
    const Index N = (1 << r) + 2;
    const auto flag = boundary_functions(space);
    EXPECT_EQ(std::count(flag.begin(), flag.end(), 1), 3 * N - 2);
  }
  const auto geo3 = benchmark_patch<3>(PatchId::quarter_annulus_time, 1.0);
  const auto space3 = uniform_space(geo3, 2, 1);
  const auto flag3 = boundary_functions(space3);
  const Index N3 = 4;  // annulus patch has no interior knots
  // Complement: interior in both spatial directions and not on t = 0.
  EXPECT_EQ(std::count(flag3.begin(), flag3.end(), 0), (N3 - 2) * (N3 - 2) * (N3 - 1));
}

TEST(Dirichlet, ReproducesSplineData) {
  // Data that is itself a spline of the space is recovered exactly.
  const auto geo = benchmark_patch<2>(PatchId::unit_interval_time, 1.0);
  Discretization<2> disc(uniform_space(geo, 2, 2), geo, {});
  auto g = [](const SamplePoint<2>& s) { return 1.0 + s.x(0) * s.x(0) - 0.5 * s.x(1) + s.x(0) * s.x(1); };
  const auto dd = impose_dirichlet<2>(disc, g, g);
  EXPECT_TRUE(dd.interpolated);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int k = 0; k < 50; ++k) {
    const double s = U(rng);
    for (const Point<2>& xi : {Point<2>(0.0, s), Point<2>(1.0, s), Point<2>(s, 0.0)}) {
      EXPECT_NEAR(eval_field(disc.space(), dd.values, xi), g({xi, xi}), 1e-12);
    }
  }
}

TEST(Dirichlet, ZeroDataGivesZeroSolution) {
  auto pc = example_case<2>("ex1");
  pc.f = [](const SamplePoint<2>&) { return 0.0; };
  pc.u_D = pc.u_0 = pc.f;
  const auto res = solve_case(pc, 2, 2);
  EXPECT_EQ(res.u.lpNorm<Eigen::Infinity>(), 0.0);
}

TEST(Solve, ReproducesSolutionInSpace) {
  // ex1 is cubic in x and quadratic in t.
  const auto pc = example_case<2>("ex1");
  for (auto mode : {StabilizationMode::local, StabilizationMode::global, StabilizationMode::off}) {
    StabilizationConfig cfg;
    cfg.mode = mode;
    const auto res = solve_case(pc, 3, 2, cfg);
    std::mt19937_64 rng(11);
    for (int k = 0; k < 200; ++k) {
      const Point<2> xi = random_point<2>(rng);
      EXPECT_NEAR(eval_field(res.disc.space(), res.u, xi), pc.u({xi, xi}), 1e-11) << to_string(mode);
    }
  }
}

TEST(Solve, ReproducesSolutionInSpaceOnAnnulus) {
  // ex5 is polynomial in the parameter coordinates with degree <= 3.
  const auto pc = example_case<3>("ex5");
  const auto res = solve_case(pc, 3, 0);
  std::mt19937_64 rng(12);
  for (int k = 0; k < 50; ++k) {
    const Point<3> xi = random_point<3>(rng);
    const auto g = res.disc.geometry().evaluate(xi, 0);
    EXPECT_NEAR(eval_field(res.disc.space(), res.u, xi), pc.u({g.x, xi}), 1e-10);
  }
}

TEST(Assembly, ConsistencyWithExactSolution) {
  // a(u, v) = l(v) for the exact u and every free test function.
  const auto pc = example_case<2>("ex2");
  const auto geo = pc.geometry();
  Discretization<2> disc(uniform_space(geo, 2, 2), geo, {}, 8);
  const auto flag = boundary_functions(disc.space());
  Vector residual = Vector::Zero(disc.dimension());
  for (std::size_t i = 0; i < disc.num_cells(); ++i) {
    const auto el = disc.element(i);
    const auto eb = physical_basis(disc.space(), disc.space().cell_basis(el.cell), el.geometry, 1);
    for (int q = 0; q < eb.npoints; ++q) {
      const auto& g = el.geometry[q];
      const SamplePoint<2> s{g.x, g.xi};
      const Point<2> gu = pc.grad_u(s);
      const double W = el.points[q].w * std::abs(g.detJ);
      for (int r = 0; r < eb.size(); ++r) {
        const double v = eb.val[eb.at(q, r)];
        const Point<2>& gv = eb.grad[eb.at(q, r)];
        const double a = gu(1) * v + gu(0) * gv(0) + disc.delta(i) * (gu(1) - pc.lap_u(s)) * gv(1);
        const double l = pc.f(s) * (v + disc.delta(i) * gv(1));
        residual(eb.dofs[r]) += W * (a - l);
      }
    }
  }
  for (Index i = 0; i < disc.dimension(); ++i) {
    if (!flag[i]) EXPECT_NEAR(residual(i), 0.0, 1e-11);
  }
}

TEST(Assembly, LocalAndGlobalFormsAgreeOnFreeRows) {
  // With equal δ the two forms differ by an integration by parts whose
  // boundary terms vanish for test functions that vanish on the lateral faces.
  const auto pc = example_case<2>("ex2");
  const auto geo = pc.geometry();
  StabilizationConfig local;
  local.bound_theta = false;
  StabilizationConfig global = local;
  global.mode = StabilizationMode::global;
  Discretization<2> dl(uniform_space(geo, 2, 2), geo, local);
  Discretization<2> dg(uniform_space(geo, 2, 2), geo, global);
  ASSERT_NEAR(dl.delta(0), dg.delta(0), 1e-15);
  const Eigen::MatrixXd Kl = assemble_stabilized_system(dl, pc.f).K.to_dense();
  const Eigen::MatrixXd Kg = assemble_stabilized_system(dg, pc.f).K.to_dense();
  const auto flag = boundary_functions(dl.space());
  double lateral_difference = 0.0;
  for (Index i = 0; i < dl.dimension(); ++i) {
    const double diff = (Kl.row(i) - Kg.row(i)).cwiseAbs().maxCoeff();
    const Point<2> g = dl.space().greville_point(i);
    const bool lateral = g(0) == 0.0 || g(0) == 1.0;
    if (!flag[i]) EXPECT_LT(diff, 1e-12) << "row " << i;
    if (lateral) lateral_difference = std::max(lateral_difference, diff);
  }
  // The forms are not identical on lateral boundary rows.
  EXPECT_GT(lateral_difference, 1e-6);
}

TEST(Assembly, ElementTermsMatchBruteForce) {
  // One cell, T = 2: x = ξ0, t = 2 ξ1, THB functions are tensor Bernstein polynomials.
  const double T = 2.0;
  const auto geo = benchmark_patch<2>(PatchId::unit_interval_time, T);
  StabilizationConfig cfg;
  cfg.bound_theta = false;
  cfg.theta = 0.3;
  for (int p = 2; p <= 3; ++p) {
    Discretization<2> disc(uniform_space(geo, p, 0), geo, cfg);
    ASSERT_EQ(disc.num_cells(), 1u);
    const double delta = disc.delta(0);
    EXPECT_NEAR(delta, 0.3 * disc.h(0), 1e-15);
    const int n = p + 1;
    const KnotVector kv = KnotVector::uniform(p, 1);
    const auto rule = gauss_rule(p + 3);
    std::array<Eigen::MatrixXd, 4> ref;
    for (auto& m : ref) m = Eigen::MatrixXd::Zero(n * n, n * n);
    for (int qa = 0; qa < rule.points(); ++qa) {
      for (int qb = 0; qb < rule.points(); ++qb) {
        const auto ex = eval_univariate(kv, rule.nodes[qa], 2);
        const auto et = eval_univariate(kv, rule.nodes[qb], 2);
        const double W = rule.weights[qa] * rule.weights[qb] * T;
        for (int i = 0; i < n * n; ++i) {
          const int ix = i % n, it = i / n;
          const double vi = ex.value(ix) * et.value(it);
          const double dti = ex.value(ix) * et.value(it, 1) / T;
          const double dxi = ex.value(ix, 1) * et.value(it);
          for (int j = 0; j < n * n; ++j) {
            const int jx = j % n, jt = j / n;
            const double dtj = ex.value(jx) * et.value(jt, 1) / T;
            const double dxj = ex.value(jx, 1) * et.value(jt);
            const double lapj = ex.value(jx, 2) * et.value(jt);
            ref[0](i, j) += W * dtj * vi;
            ref[1](i, j) += W * dxj * dxi;
            ref[2](i, j) += W * delta * dtj * dti;
            ref[3](i, j) -= W * delta * lapj * dti;
          }
        }
      }
    }
    const std::array<unsigned, 4> masks{kTimeDerivative, kStiffness, kUpwindTime, kUpwindLaplace};
    for (int t = 0; t < 4; ++t) {
      const auto es = element_system<2>(disc, 0, nullptr, masks[t]);
      Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n * n, n * n);
      for (int r = 0; r < n * n; ++r) {
        for (int s = 0; s < n * n; ++s) K(es.dofs[r], es.dofs[s]) = es.K(r, s);
      }
      EXPECT_LT((K - ref[t]).cwiseAbs().maxCoeff(), 1e-12) << "term " << t << " p=" << p;
    }
  }
}

TEST(Assembly, MatrixMatchesBilinearForm) {
  const auto pc = example_case<2>("ex3");
  const auto geo = pc.geometry();
  for (auto mode : {StabilizationMode::local, StabilizationMode::global}) {
    StabilizationConfig cfg;
    cfg.mode = mode;
    Discretization<2> disc(uniform_space(geo, 2, 2), geo, cfg);
    const auto sys = assemble_stabilized_system(disc, pc.f);
    std::mt19937_64 rng(5);
    std::normal_distribution<double> N(0.0, 1.0);
    for (int k = 0; k < 5; ++k) {
      Vector u(disc.dimension()), v(disc.dimension());
      for (Index i = 0; i < u.size(); ++i) {
        u(i) = N(rng);
        v(i) = N(rng);
      }
      const double a = apply_bilinear(disc, u, v);
      EXPECT_NEAR(v.dot(sys.K.multiply(u)), a, 1e-11 * std::max(1.0, std::abs(a)));
    }
  }
}

TEST(Assembly, CoercivityOnDiscreteSpace) {
  // a_loc,h(v, v) >= 1/2 |||v|||²_loc,h for v vanishing on the Dirichlet boundary.
  for (int p = 2; p <= 4; ++p) {
    const auto geo = benchmark_patch<2>(PatchId::unit_interval_time, 1.0);
    for (int r = 1; r <= 3; ++r) {
      Discretization<2> disc(uniform_space(geo, p, r), geo, {});
      EXPECT_GE(coercivity_constant(disc), 0.5 - 1e-10) << "p=" << p << " r=" << r;
    }
  }
  const auto geo4 = benchmark_patch<2>(PatchId::unit_interval_time, 2.0);
  Discretization<2> d4(uniform_space(geo4, 2, 2), geo4, {});
  EXPECT_GE(coercivity_constant(d4), 0.5 - 1e-10);
  const auto geo3 = benchmark_patch<3>(PatchId::quarter_annulus_time, 1.0);
  Discretization<3> d3(uniform_space(geo3, 2, 1), geo3, {});
  EXPECT_GE(coercivity_constant(d3), 0.5 - 1e-10);
}

TEST(Assembly, FreeBlockPositiveDefinite) {
  const auto res = solve_case(example_case<2>("ex2"), 2, 3);
  EXPECT_TRUE(free_block_positive_definite(res.sys));
  EXPECT_GT(norm_loc_h(res.disc, res.u), 0.0);
}

TEST(Assembly, DeterministicAcrossThreadCounts) {
  const auto pc = example_case<2>("ex3");
  const auto geo = pc.geometry();
  Discretization<2> disc(uniform_space(geo, 2, 3), geo, {});
  set_thread_count(1);
  const auto a = assemble_stabilized_system(disc, pc.f);
  set_thread_count(3);
  const auto b = assemble_stabilized_system(disc, pc.f);
  set_thread_count(0);
  EXPECT_EQ(a.K.values(), b.K.values());
  EXPECT_TRUE((a.f.array() == b.f.array()).all());
}

TEST(Assembly, RejectsLinearDegree) {
  const auto pc = example_case<2>("ex2");
  const auto geo = pc.geometry();
  Discretization<2> disc(uniform_space(geo, 1, 1), geo, {});
  EXPECT_THROW(assemble_stabilized_system(disc, pc.f), std::invalid_argument);
}

TEST(Solve, ErrorDecreasesUnderUniformRefinement) {
  const auto pc = example_case<2>("ex2");
  double prev = 1e300;
  for (int r = 1; r <= 4; ++r) {
    const auto res = solve_case(pc, 2, r);
    std::mt19937_64 rng(21);
    double err = 0.0;
    for (int k = 0; k < 200; ++k) {
      const Point<2> xi = random_point<2>(rng);
      err = std::max(err, std::abs(eval_field(res.disc.space(), res.u, xi) - pc.u({xi, xi})));
    }
    EXPECT_LT(err, prev);
    prev = err;
  }
  EXPECT_LT(prev, 1e-3);
}

TEST(Dirichlet, InitialTraceInterpolatesAtGrevillePoints) {
  const auto pc = example_case<2>("ex4", {1.0, 1.0, 0.5});
  const auto geo = pc.geometry();
  Discretization<2> disc(uniform_space(geo, 2, 3), geo, {});
  const auto dd = impose_dirichlet(disc, pc.u_D, pc.u_0);
  int checked = 0;
  for (Index id : dd.fixed) {
    const Point<2> g = disc.space().greville_point(id);
    if (g(1) != 0.0) continue;
    EXPECT_NEAR(eval_field(disc.space(), dd.values, g), std::sin(std::numbers::pi * g(0)), 1e-12);
    ++checked;
  }
  EXPECT_EQ(checked, (1 << 3) + 2);
}

TEST(Dirichlet, TraceErrorConvergesAtOptimalRate) {
  const auto pc = example_case<2>("ex2");
  const auto geo = pc.geometry();
  std::vector<double> err;
  for (int r = 2; r <= 5; ++r) {
    Discretization<2> disc(uniform_space(geo, 2, r), geo, {});
    const auto dd = impose_dirichlet(disc, pc.u_D, pc.u_0);
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    double e = 0.0;
    for (int k = 0; k < 100; ++k) {
      const double s = U(rng);
      const Point<2> xi = k % 3 == 0 ? Point<2>(0.0, s) : (k % 3 == 1 ? Point<2>(1.0, s) : Point<2>(s, 0.0));
      e = std::max(e, std::abs(eval_field(disc.space(), dd.values, xi) - pc.u({xi, xi})));
    }
    err.push_back(e);
  }
  for (std::size_t i = 1; i < err.size(); ++i) EXPECT_GT(std::log2(err[i - 1] / err[i]), 2.5);
}
