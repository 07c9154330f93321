#include "stiga/adaptivity.hpp"

#include <gtest/gtest.h>

#include <random>
#include <set>

using namespace stiga;

namespace {

// Oracle: walk the sorted list and stop as soon as the running sum reaches
// the target. Written independently of bulk_mark's index bookkeeping.
std::vector<std::size_t> greedy_oracle(const std::vector<double>& eta2, double sigma) {
  std::vector<std::pair<double, std::size_t>> v;
  double total = 0.0;
  for (std::size_t i = 0; i < eta2.size(); ++i) {
    v.emplace_back(-eta2[i], i);
    total += eta2[i];
  }
  std::sort(v.begin(), v.end());
  std::vector<std::size_t> out;
  double acc = 0.0;
  for (const auto& [neg, i] : v) {
    if (acc >= sigma * total && !out.empty()) break;
    out.push_back(i);
    acc -= neg;
  }
  return out;
}

LoopConfig quick_config() {
  LoopConfig c;
  c.n_ref0 = 1;
  c.n_ref = 3;
  c.p = 2;
  c.q = 3;
  c.M = 1;
  c.advanced = false;
  return c;
}

}  // namespace

TEST(BulkMark, Examples) {
  const std::vector<double> eta2{4, 3, 2, 1};
  EXPECT_EQ(bulk_mark(eta2, 0.4), (std::vector<std::size_t>{0}));
  EXPECT_EQ(bulk_mark(eta2, 0.6), (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(bulk_mark(eta2, 1.0).size(), 4u);
  EXPECT_EQ(bulk_mark(eta2, 0.0), (std::vector<std::size_t>{0}));
  EXPECT_EQ(bulk_mark({1, 3, 2, 4}, 0.6), (std::vector<std::size_t>{3, 1}));
}

TEST(BulkMark, TiesAndZeros) {
  EXPECT_EQ(bulk_mark({1, 1, 1, 1}, 0.5), (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(bulk_mark({0, 2, 0, 2}, 1.0), (std::vector<std::size_t>{1, 3}));
  EXPECT_TRUE(bulk_mark({0, 0, 0}, 0.5).empty());
}

TEST(BulkMark, Errors) {
  EXPECT_THROW(bulk_mark({}, 0.4), std::invalid_argument);
  EXPECT_THROW(bulk_mark({1, -1}, 0.4), std::invalid_argument);
  EXPECT_THROW(bulk_mark({1, 2}, 1.5), std::invalid_argument);
  EXPECT_THROW(bulk_mark({1, std::nan("")}, 0.4), std::invalid_argument);
}

TEST(BulkMark, MatchesOracleAndIsMinimal) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng() % 60;
    std::vector<double> eta2(n);
    for (auto& e : eta2) e = U(rng) * U(rng);
    const double sigma = U(rng);
    const auto marked = bulk_mark(eta2, sigma);
    EXPECT_EQ(marked, greedy_oracle(eta2, sigma));
    double total = 0.0, sum = 0.0;
    for (double e : eta2) total += e;
    for (std::size_t i : marked) sum += eta2[i];
    EXPECT_GE(sum, sigma * total);
    for (std::size_t i : marked) EXPECT_LT(sum - eta2[i], sigma * total);
  }
}

TEST(Eoc, Examples) {
  const auto r = eoc({1.0, 0.25}, {1.0, 0.5});
  ASSERT_EQ(r.size(), 1u);
  EXPECT_NEAR(r[0], 2.0, 1e-15);
  EXPECT_NEAR(eoc({1.0, 1.0}, {0.3, 0.1})[0], 0.0, 1e-15);
  EXPECT_TRUE(eoc({1.0}, {1.0}).empty());
  EXPECT_THROW(eoc({1.0, 0.0}, {1.0, 0.5}), std::domain_error);
  EXPECT_THROW(eoc({1.0}, {1.0, 0.5}), std::invalid_argument);
}

TEST(Loop, ZeroStepsGivesOneReport) {
  auto cfg = quick_config();
  cfg.n_ref = 0;
  const auto res = adaptive_loop(example_case<2>("ex2"), cfg);
  EXPECT_TRUE(res.error.empty());
  ASSERT_EQ(res.steps.size(), 1u);
  EXPECT_TRUE(res.steps[0].marked.empty());
}

TEST(Loop, InvalidConfig) {
  auto cfg = quick_config();
  cfg.p = 1;
  EXPECT_THROW(adaptive_loop(example_case<2>("ex1"), cfg), std::invalid_argument);
  cfg = quick_config();
  cfg.marking.sigma = 1.2;
  EXPECT_THROW(adaptive_loop(example_case<2>("ex1"), cfg), std::invalid_argument);
}

TEST(Loop, MonotoneGrowthBoundAndDeterminism) {
  const auto pc = example_case<2>("ex2");
  const auto cfg = quick_config();
  int callbacks = 0;
  const auto a = adaptive_loop(pc, cfg, [&](const StepReport<2>&) { ++callbacks; });
  const auto b = adaptive_loop(pc, cfg);
  ASSERT_TRUE(a.error.empty()) << a.error;
  ASSERT_EQ(a.steps.size(), 4u);
  EXPECT_EQ(callbacks, 4);
  for (std::size_t k = 0; k < a.steps.size(); ++k) {
    const auto& s = a.steps[k];
    EXPECT_EQ(s.step, static_cast<int>(k));
    EXPECT_GE(s.MI, s.norms->energy * s.norms->energy * (1 - 1e-8));
    EXPECT_NEAR(s.eff.identity, 1.0, 1e-5);
    EXPECT_EQ(s.marked, b.steps[k].marked);
    EXPECT_EQ(s.MI, b.steps[k].MI);
    EXPECT_EQ(s.levels.size(), s.mesh.num_active());
    if (k > 0) EXPECT_GT(s.dofs_u, a.steps[k - 1].dofs_u);
  }
  EXPECT_TRUE(a.steps.back().marked.empty());
}

TEST(Loop, UniformModeMarksEverything) {
  auto cfg = quick_config();
  cfg.uniform = true;
  cfg.n_ref = 2;
  const auto res = adaptive_loop(example_case<2>("ex1"), cfg);
  ASSERT_EQ(res.steps.size(), 3u);
  EXPECT_EQ(res.steps[0].marked.size(), res.steps[0].mesh.num_active());
  EXPECT_EQ(res.steps[1].mesh.num_active(), 4 * res.steps[0].mesh.num_active());
  const auto s = eoc_scale(res.steps, true);
  EXPECT_NEAR(s[0] / s[1], 2.0, 1e-12);
}

TEST(Loop, DimensionCap) {
  auto cfg = quick_config();
  cfg.uniform = true;
  cfg.n_ref = 5;
  cfg.max_dofs = 100;
  const auto res = adaptive_loop(example_case<2>("ex1"), cfg);
  EXPECT_TRUE(res.capped);
  for (const auto& s : res.steps) EXPECT_LE(s.dofs_u, 100);
}

TEST(Loop, AdvancedMajorantBoundsGradientError) {
  auto cfg = quick_config();
  cfg.advanced = true;
  cfg.M = 2;
  const auto res = adaptive_loop(example_case<2>("ex1"), cfg);
  ASSERT_TRUE(res.error.empty()) << res.error;
  for (const auto& s : res.steps) {
    EXPECT_GE(s.MII, s.norms->grad_x * s.norms->grad_x * (1 - 1e-8));
    EXPECT_GT(s.dofs_w, 0);
    EXPECT_GE(s.t.ratio(), 0.0);
  }
}

TEST(Loop, PeakIsLocalized) {
  auto cfg = quick_config();
  cfg.n_ref = 4;
  const auto res = adaptive_loop(example_case<2>("ex3"), cfg);
  ASSERT_TRUE(res.error.empty()) << res.error;
  for (std::size_t k = 3; k < res.steps.size(); ++k) {
    const auto& s = res.steps[k];
    if (s.marked.empty()) continue;
    int near = 0;
    for (std::size_t i : s.marked) {
      const auto box = s.mesh.cell_box(s.mesh.active_cells()[i]);
      const Point<2> c = 0.5 * (box.lo + box.hi);
      if (std::hypot(c(0) - 0.8, c(1) - 0.05) <= 0.25) ++near;
    }
    EXPECT_GE(2 * near, static_cast<int>(s.marked.size())) << "step " << k;
  }
}

// Marks gather around the time singularity once the mesh resolves it. The
// stronger finest-level criterion is checked by the acceptance binary.
TEST(Loop, TimeSingularityAttractsMarks) {
  auto cfg = quick_config();
  cfg.n_ref = 8;
  for (double lambda : {0.5, 1.0, 1.5}) {
    const auto pc = example_case<2>("ex4", {1.0, 1.0, lambda});
    const auto res = adaptive_loop(pc, cfg);
    ASSERT_TRUE(res.error.empty()) << res.error;
    int total = 0, near = 0;
    for (std::size_t k = 6; k < res.steps.size(); ++k) {
      const auto& s = res.steps[k];
      for (std::size_t i : s.marked) {
        const auto box = s.mesh.cell_box(s.mesh.active_cells()[i]);
        const double t = 0.5 * (box.lo(1) + box.hi(1)) * pc.T;
        ++total;
        if (std::abs(t - 1.0) <= 0.5) ++near;
      }
    }
    EXPECT_GT(2 * near, total) << "lambda " << lambda;
  }
}
