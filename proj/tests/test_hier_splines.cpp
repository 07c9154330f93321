#include "stiga/hierarchical.hpp"

#include <gtest/gtest.h>

#include <map>
#include <random>

using namespace stiga;

namespace {

template <int Dim>
std::vector<Cell<Dim>> random_marks(const HierarchicalMesh<Dim>& mesh, std::mt19937_64& rng, double fraction) {
  std::uniform_real_distribution<double> U(0.0, 1.0);
  std::vector<Cell<Dim>> marks;
  for (const auto& c : mesh.active_cells()) {
    if (U(rng) < fraction) marks.push_back(c);
  }
  if (marks.empty()) marks.push_back(mesh.active_cells()[rng() % mesh.num_active()]);
  return marks;
}

template <int Dim>
Point<Dim> random_point(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> U(0.0, 1.0);
  Point<Dim> x;
  for (int a = 0; a < Dim; ++a) x(a) = U(rng);
  return x;
}

// Reference THB evaluation: each active function is expanded to the finest
// level by global two-scale relations, truncating after every step.
template <int Dim>
class GlobalTruncationOracle {
 public:
  explicit GlobalTruncationOracle(const HierarchicalSplineSpace<Dim>& space) : space_(space) {
    const int L = space.num_levels();
    const auto& fine = space.level_space(L - 1);
    coef_.resize(space.dimension());
    for (Index id = 0; id < space.dimension(); ++id) {
      const auto& f = space.functions()[id];
      const auto& sp = space.level_space(f.level);
      Eigen::VectorXd c = Eigen::VectorXd::Zero(sp.dimension());
      c(sp.linear_index(f.index)) = 1.0;
      for (int m = f.level; m < L - 1; ++m) {
        const auto& coarse = space.level_space(m);
        const auto& next = space.level_space(m + 1);
        std::array<std::vector<TwoScaleRow>, Dim> ts;
        for (int a = 0; a < Dim; ++a) ts[a] = two_scale(coarse.knot_vector(a), next.knot_vector(a));
        Eigen::VectorXd cn = Eigen::VectorXd::Zero(next.dimension());
        for (Index i = 0; i < coarse.dimension(); ++i) {
          if (c(i) == 0.0) continue;
          const auto mi = coarse.multi_index(i);
          for (Index j = 0; j < next.dimension(); ++j) {
            const auto mj = next.multi_index(j);
            double w = c(i);
            for (int a = 0; a < Dim && w != 0.0; ++a) w *= ts[a][mi[a]].at(mj[a]);
            cn(j) += w;
          }
        }
        for (Index j = 0; j < next.dimension(); ++j) {
          if (space.support_in_domain(m + 1, next.multi_index(j))) cn(j) = 0.0;
        }
        c = cn;
      }
      coef_[id] = c;
    }
    (void)fine;
  }

  [[nodiscard]] double value(Index id, const Point<Dim>& x) const {
    const auto& fine = space_.level_space(space_.num_levels() - 1);
    const auto e = fine.eval(x, 0);
    double v = 0.0;
    for (int k = 0; k < e.count(); ++k) v += coef_[id](fine.linear_index(e.multi_index(k))) * e.values[k];
    return v;
  }

 private:
  const HierarchicalSplineSpace<Dim>& space_;
  std::vector<Eigen::VectorXd> coef_;
};

}  // namespace

TEST(HierarchicalMesh, EmptyMarksKeepMesh) {
  auto mesh = HierarchicalMesh<2>::uniform(4, 2);
  auto out = mesh.refine_marked(std::span<const Cell<2>>{});
  EXPECT_EQ(out.active_cells(), mesh.active_cells());
}

TEST(HierarchicalMesh, SingleCellRefinementGives19Cells) {
  auto mesh = HierarchicalMesh<2>::uniform(4, 2);
  std::vector<Cell<2>> marks{Cell<2>{0, {1, 2}}};
  auto out = mesh.refine_marked(marks);
  EXPECT_EQ(out.num_active(), 19u);
  EXPECT_TRUE(out.is_admissible());
}

TEST(HierarchicalMesh, MarkAllGivesUniformNextLevel) {
  auto mesh = HierarchicalMesh<2>::uniform(4, 2);
  auto out = mesh.refine_marked(mesh.active_cells());
  EXPECT_EQ(out.num_active(), 64u);
  for (const auto& c : out.active_cells()) EXPECT_EQ(c.level, 1);
}

TEST(HierarchicalMesh, ActiveCellsPartitionCube) {
  std::mt19937_64 rng(1);
  auto mesh = HierarchicalMesh<2>::uniform(2, 2);
  for (int step = 0; step < 5; ++step) {
    mesh = mesh.refine_marked(random_marks(mesh, rng, 0.2));
    double vol = 0.0;
    for (const auto& c : mesh.active_cells()) vol += mesh.cell_box(c).volume();
    EXPECT_NEAR(vol, 1.0, 1e-14);
    EXPECT_TRUE(mesh.is_admissible());
    for (int s = 0; s < 100; ++s) {
      const auto x = random_point<2>(rng);
      const auto c = mesh.locate(x);
      EXPECT_TRUE(mesh.is_active(c));
      const auto b = mesh.cell_box(c);
      for (int a = 0; a < 2; ++a) {
        EXPECT_LE(b.lo(a), x(a));
        EXPECT_GE(b.hi(a), x(a));
      }
    }
  }
}

TEST(HierarchicalMesh, ClosureKeepsLevelGapsBounded) {
  // Repeatedly refining one corner cell forces grading.
  auto mesh = HierarchicalMesh<2>::uniform(4, 2);
  for (int step = 0; step < 6; ++step) {
    std::vector<Cell<2>> marks{mesh.locate(Point<2>(0.0, 0.0))};
    mesh = mesh.refine_marked(marks);
    EXPECT_TRUE(mesh.is_admissible());
  }
  EXPECT_EQ(mesh.locate(Point<2>(0.0, 0.0)).level, 6);
}

TEST(HierarchicalMesh, MaxLevelMarksIgnored) {
  auto mesh = HierarchicalMesh<2>::uniform(1, 2, 1);
  mesh = mesh.refine_marked(mesh.active_cells());
  const auto before = mesh.num_active();
  mesh = mesh.refine_marked(mesh.active_cells());
  EXPECT_EQ(mesh.num_active(), before);
}

TEST(HierarchicalMesh, CoarsenedMeshIsNestedPartition) {
  std::mt19937_64 rng(2);
  auto mesh = HierarchicalMesh<2>::uniform(2, 2);
  for (int step = 0; step < 4; ++step) mesh = mesh.refine_marked(random_marks(mesh, rng, 0.3));
  for (int shift = 0; shift <= 3; ++shift) {
    const auto coarse = mesh.coarsened(shift);
    double vol = 0.0;
    for (const auto& c : coarse.active_cells()) vol += coarse.cell_box(c).volume();
    EXPECT_NEAR(vol, 1.0, 1e-14);
    EXPECT_LE(coarse.num_active(), mesh.num_active());
    // Every fine cell lies inside one coarse cell.
    for (const auto& c : mesh.active_cells()) {
      const auto k = coarse.locate(mesh.cell_box(c).center());
      EXPECT_LE(k.level, c.level);
      EXPECT_EQ(c.ancestor(k.level), k);
    }
  }
}

TEST(HierarchicalSpace, UnrefinedMatchesTensorSpace) {
  auto space = HierarchicalSplineSpace<2>(HierarchicalMesh<2>::uniform(4, 2), 2);
  EXPECT_EQ(space.dimension(), 36);
  std::mt19937_64 rng(4);
  for (const auto& c : space.mesh().active_cells()) {
    EXPECT_GE(space.active_functions_on_cell(c).size(), 9u);
  }
  for (int s = 0; s < 100; ++s) {
    const auto x = random_point<2>(rng);
    const auto a = space.eval_active(x, 2);
    const auto t = tensor_eval(space.level_space(0), x, 2);
    ASSERT_EQ(a.dofs.size(), static_cast<std::size_t>(t.count()));
    std::map<Index, int> pos;
    for (int k = 0; k < t.count(); ++k) pos[space.level_space(0).linear_index(t.multi_index(k))] = k;
    for (std::size_t r = 0; r < a.dofs.size(); ++r) {
      const int k = pos.at(a.dofs[r]);
      EXPECT_DOUBLE_EQ(a.values[r], t.values[k]);
      EXPECT_TRUE(a.grads[r].isApprox(t.grads[k]));
    }
  }
}

TEST(HierarchicalSpace, DimensionNeverDecreasesUnderRefinement) {
  std::mt19937_64 rng(5);
  auto mesh = HierarchicalMesh<2>::uniform(4, 2);
  Index dim = HierarchicalSplineSpace<2>(mesh, 2).dimension();
  for (int step = 0; step < 4; ++step) {
    mesh = mesh.refine_marked(random_marks(mesh, rng, 0.15));
    const Index next = HierarchicalSplineSpace<2>(mesh, 2).dimension();
    EXPECT_GE(next, dim);
    dim = next;
  }
}

TEST(HierarchicalSpace, SingleCellAddsNoQuadraticFunction) {
  // A finer quadratic B-spline spans 1.5 coarse cells, so one refined cell
  // cannot hold its support.
  auto mesh = HierarchicalMesh<2>::uniform(4, 2);
  std::vector<Cell<2>> one{Cell<2>{0, {1, 1}}};
  EXPECT_EQ(HierarchicalSplineSpace<2>(mesh.refine_marked(one), 2).dimension(), 36);
}

TEST(HierarchicalSpace, BlockRefinementStrictlyGrows) {
  auto mesh = HierarchicalMesh<2>::uniform(4, 2);
  std::vector<Cell<2>> block{Cell<2>{0, {1, 1}}, Cell<2>{0, {2, 1}}, Cell<2>{0, {1, 2}}, Cell<2>{0, {2, 2}}};
  // Two level-1 quadratics per direction fit inside [0.25,0.75]; no coarse
  // function has its whole support refined.
  const Index fine = HierarchicalSplineSpace<2>(mesh.refine_marked(block), 2).dimension();
  EXPECT_EQ(fine, 40);
}

TEST(HierarchicalSpace, PartitionOfUnityUnderRandomRefinement) {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    std::mt19937_64 rng(seed);
    const int p = 2 + static_cast<int>(seed % 2);
    auto mesh = HierarchicalMesh<2>::uniform(2, p);
    for (int step = 0; step < 4; ++step) {
      mesh = mesh.refine_marked(random_marks(mesh, rng, 0.25));
      HierarchicalSplineSpace<2> space(mesh, p);
      for (int s = 0; s < 100; ++s) {
        const auto e = space.eval_active(random_point<2>(rng), 1);
        double sum = 0.0;
        Point<2> g = Point<2>::Zero();
        for (std::size_t r = 0; r < e.values.size(); ++r) {
          EXPECT_GE(e.values[r], -1e-14);
          sum += e.values[r];
          g += e.grads[r];
        }
        EXPECT_NEAR(sum, 1.0, 1e-12);
        EXPECT_LT(g.norm(), 1e-9);
      }
    }
  }
}

TEST(HierarchicalSpace, PartitionOfUnity3D) {
  std::mt19937_64 rng(9);
  auto mesh = HierarchicalMesh<3>::uniform(2, 2);
  for (int step = 0; step < 3; ++step) mesh = mesh.refine_marked(random_marks(mesh, rng, 0.2));
  HierarchicalSplineSpace<3> space(mesh, 2);
  for (int s = 0; s < 200; ++s) {
    const auto e = space.eval_active(random_point<3>(rng), 0);
    double sum = 0.0;
    for (double v : e.values) sum += v;
    EXPECT_NEAR(sum, 1.0, 1e-12);
  }
}

TEST(HierarchicalSpace, MatchesGlobalTruncationOracle) {
  std::mt19937_64 rng(21);
  auto mesh = HierarchicalMesh<2>::uniform(2, 2);
  for (int step = 0; step < 3; ++step) mesh = mesh.refine_marked(random_marks(mesh, rng, 0.3));
  HierarchicalSplineSpace<2> space(mesh, 2);
  ASSERT_LE(space.dimension(), 400);
  GlobalTruncationOracle<2> oracle(space);
  for (int s = 0; s < 100; ++s) {
    const auto x = random_point<2>(rng);
    const auto e = space.eval_active(x, 0);
    std::vector<double> full(space.dimension(), 0.0);
    for (std::size_t r = 0; r < e.dofs.size(); ++r) full[e.dofs[r]] = e.values[r];
    for (Index id = 0; id < space.dimension(); ++id) {
      EXPECT_NEAR(full[id], oracle.value(id, x), 1e-12) << "function " << id;
    }
  }
}

namespace {

// Least-squares fit of `target` in the THB space, sampled at Gauss-like points.
template <int Dim, class F>
double fit_residual(const HierarchicalSplineSpace<Dim>& space, F&& target, std::mt19937_64& rng) {
  const int samples = static_cast<int>(space.dimension()) * 4 + 50;
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(samples, space.dimension());
  Eigen::VectorXd b(samples);
  for (int s = 0; s < samples; ++s) {
    const auto x = random_point<Dim>(rng);
    const auto e = space.eval_active(x, 0);
    for (std::size_t r = 0; r < e.dofs.size(); ++r) A(s, e.dofs[r]) = e.values[r];
    b(s) = target(x);
  }
  const Eigen::VectorXd c = A.colPivHouseholderQr().solve(b);
  double worst = 0.0;
  for (int s = 0; s < 200; ++s) {
    const auto x = random_point<Dim>(rng);
    const auto e = space.eval_active(x, 0);
    double v = 0.0;
    for (std::size_t r = 0; r < e.dofs.size(); ++r) v += c(e.dofs[r]) * e.values[r];
    worst = std::max(worst, std::abs(v - target(x)));
  }
  return worst;
}

}  // namespace

TEST(HierarchicalSpace, ReproducesPolynomials) {
  std::mt19937_64 rng(31);
  auto mesh = HierarchicalMesh<2>::uniform(2, 2);
  for (int step = 0; step < 3; ++step) mesh = mesh.refine_marked(random_marks(mesh, rng, 0.3));
  HierarchicalSplineSpace<2> space(mesh, 2);
  auto poly = [](const Point<2>& x) { return 1.0 - 2.0 * x(0) + 3.0 * x(0) * x(0) * x(1) * x(1) - x(1) * x(1); };
  EXPECT_LT(fit_residual(space, poly, rng), 1e-10);
}

TEST(HierarchicalSpace, CoarseSpaceIsNested) {
  std::mt19937_64 rng(37);
  auto coarse_mesh = HierarchicalMesh<2>::uniform(3, 2);
  HierarchicalSplineSpace<2> coarse(coarse_mesh, 2);
  HierarchicalSplineSpace<2> fine(coarse_mesh.refine_marked(random_marks(coarse_mesh, rng, 0.3)), 2);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  Eigen::VectorXd c(coarse.dimension());
  for (Index i = 0; i < c.size(); ++i) c(i) = U(rng);
  auto target = [&](const Point<2>& x) {
    const auto e = coarse.eval_active(x, 0);
    double v = 0.0;
    for (std::size_t r = 0; r < e.dofs.size(); ++r) v += c(e.dofs[r]) * e.values[r];
    return v;
  };
  EXPECT_LT(fit_residual(fine, target, rng), 1e-10);
}

TEST(HierarchicalSpace, GramMatrixIsNonsingular) {
  std::mt19937_64 rng(41);
  auto mesh = HierarchicalMesh<2>::uniform(2, 2);
  for (int step = 0; step < 3; ++step) mesh = mesh.refine_marked(random_marks(mesh, rng, 0.3));
  HierarchicalSplineSpace<2> space(mesh, 2);
  ASSERT_LE(space.dimension(), 200);
  const Index n = space.dimension();
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(n, n);
  // Three-point Gauss rule (exact for the degree-4 products).
  const double gp[3] = {0.5 - std::sqrt(0.15), 0.5, 0.5 + std::sqrt(0.15)};
  const double gw[3] = {5.0 / 18, 8.0 / 18, 5.0 / 18};
  for (const auto& cell : mesh.active_cells()) {
    const auto box = mesh.cell_box(cell);
    const auto cb = space.cell_basis(cell);
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        Point<2> x(box.lo(0) + gp[i] * (box.hi(0) - box.lo(0)), box.lo(1) + gp[j] * (box.hi(1) - box.lo(1)));
        const auto e = space.eval_on_cell(cb, x, 0);
        const double w = gw[i] * gw[j] * box.volume();
        for (std::size_t a = 0; a < e.dofs.size(); ++a) {
          for (std::size_t b = 0; b < e.dofs.size(); ++b) G(e.dofs[a], e.dofs[b]) += w * e.values[a] * e.values[b];
        }
      }
    }
  }
  const Eigen::VectorXd s = G.diagonal().cwiseSqrt().cwiseInverse();
  const Eigen::MatrixXd S = s.asDiagonal() * G * s.asDiagonal();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
  EXPECT_GT(es.eigenvalues().minCoeff(), 1e-12);
}
