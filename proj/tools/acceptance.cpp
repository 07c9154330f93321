// Acceptance suite: one PASS/FAIL line per criterion, exit status 0 only if
// every criterion passes within its time budget.

#include "stiga/stiga.hpp"

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>

using namespace stiga;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << "[fail: " << what << "] ";
    }
  }
};

std::string fmt(double v, int digits = 3) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

LoopConfig base_loop(int p, int n_ref, bool uniform) {
  LoopConfig c;
  c.n_ref0 = 1;
  c.n_ref = n_ref;
  c.p = p;
  c.q = p + 1;
  c.M = 1;
  c.uniform = uniform;
  c.advanced = false;
  c.marking.sigma = 0.4;
  return c;
}

template <int Dim>
LoopResult<Dim> run(const ProblemCase<Dim>& pc, const LoopConfig& cfg, Outcome& o, const std::string& label) {
  auto res = adaptive_loop(pc, cfg);
  o.require(res.error.empty(), label + " error: " + res.error);
  o.require(!res.capped, label + " hit the dimension cap");
  return res;
}

// ---------------------------------------------------------------------------
// 1. Guaranteed bound

void guaranteed_bound(Outcome& o) {
  double worst = std::numeric_limits<double>::infinity();
  std::size_t checked = 0;
  for (const char* id : {"ex1", "ex2", "ex3"}) {
    const auto pc = example_case<2>(id, {1.0, 1.0, 0.5});
    for (bool uniform : {true, false}) {
      const auto res = run(pc, base_loop(2, uniform ? 4 : 6, uniform), o, id);
      for (const auto& s : res.steps) {
        const double e2 = s.norms->energy * s.norms->energy;
        worst = std::min(worst, s.MI / e2);
        o.require(s.MI >= e2 * (1.0 - 1e-8), std::string(id) + " step " + std::to_string(s.step));
        ++checked;
      }
    }
  }
  o.detail << checked << " steps, min M^I/|||e|||^2 = " << fmt(worst, 6);
}

// ---------------------------------------------------------------------------
// 2. Error identity

void error_identity_check(Outcome& o) {
  double dev = 0.0;
  std::size_t checked = 0;
  for (const char* id : {"ex1", "ex2"}) {
    const auto pc = example_case<2>(id, {1.0, 1.0, 0.5});
    for (bool uniform : {true, false}) {
      const auto res = run(pc, base_loop(2, uniform ? 4 : 6, uniform), o, id);
      for (const auto& s : res.steps) {
        dev = std::max(dev, std::abs(s.eff.identity - 1.0));
        ++checked;
      }
    }
  }
  o.require(dev <= 1e-5, "identity deviation");
  o.detail << checked << " steps, max |I_eff(EId) - 1| = " << fmt(dev, 3);
}

// ---------------------------------------------------------------------------
// 3. Exactness for a solution in the space

void exactness(Outcome& o) {
  auto cfg = base_loop(3, 0, true);
  cfg.n_ref0 = 2;  // 4 x 4 cells
  const auto res = run(example_case<2>("ex1"), cfg, o, "ex1");
  if (res.steps.empty()) return;
  const auto& s = res.steps[0];
  o.require(s.mesh.num_active() == 16, "mesh is not 4x4");
  o.require(s.norms->grad_x <= 1e-10, "gradient error");
  o.require(s.MI <= 1e-12, "majorant");
  o.detail << "||grad_x e|| = " << fmt(s.norms->grad_x) << ", M^I = " << fmt(s.MI);
}

// ---------------------------------------------------------------------------
// 4. Convergence rates

void rates(Outcome& o) {
  const auto pc = example_case<2>("ex2", {1.0, 1.0, 0.5});
  for (int p : {2, 3}) {
    const auto res = run(pc, base_loop(p, 4, true), o, "ex2");
    if (res.steps.size() != 5) {
      o.require(false, "expected five steps");
      return;
    }
    std::vector<double> loc, L;
    for (const auto& s : res.steps) {
      loc.push_back(s.norms->loc_h);
      L.push_back(s.norms->L);
    }
    const auto h = eoc_scale(res.steps, true);
    const auto r_loc = eoc(loc, h);
    const auto r_L = eoc(L, h);
    const double loc_target = p, L_target = p - 1;
    const double loc_tol = p == 2 ? 0.2 : 0.3, L_tol = p == 2 ? 0.2 : 0.3;
    o.detail << "p=" << p << " eoc loc_h";
    for (std::size_t k = r_loc.size() - 3; k < r_loc.size(); ++k) {
      o.detail << ' ' << fmt(r_loc[k], 4);
      o.require(std::abs(r_loc[k] - loc_target) <= loc_tol, "loc_h rate p=" + std::to_string(p));
    }
    o.detail << ", L";
    for (std::size_t k = r_L.size() - 3; k < r_L.size(); ++k) {
      o.detail << ' ' << fmt(r_L[k], 4);
      o.require(std::abs(r_L[k] - L_target) <= L_tol, "L rate p=" + std::to_string(p));
    }
    o.detail << "; ";
  }
}

// ---------------------------------------------------------------------------
// 5. Majorant sharpness on the Example 1 protocol

void sharpness(Outcome& o) {
  LoopConfig cfg;
  cfg.n_ref0 = 1;
  cfg.n_ref = 8;
  cfg.p = 2;
  cfg.q = 3;
  cfg.r = 3;
  cfg.M = 5;
  cfg.advanced = true;
  cfg.marking.sigma = 0.4;
  const auto res = run(example_case<2>("ex1"), cfg, o, "ex1");
  if (res.steps.size() != 9) {
    o.require(false, "expected nine steps");
    return;
  }
  const auto& s = res.steps.back();
  o.require(s.eff.majorant_I >= 1.0 && s.eff.majorant_I <= 3.0, "I_eff(M^I) outside [1, 3]");
  o.require(s.eff.majorant_II >= 1.0 && s.eff.majorant_II <= 2.0, "I_eff(M^II) outside [1, 2]");
  o.detail << "step 8: I_eff(M^I) = " << fmt(s.eff.majorant_I, 4) << ", I_eff(M^II) = " << fmt(s.eff.majorant_II, 4);
}

// ---------------------------------------------------------------------------
// 6. Coercivity and positive definiteness

template <int Dim>
void coercivity_on(const Discretization<Dim>& disc, Outcome& o, double& worst_ratio, int& meshes, std::mt19937_64& rng,
                   const std::string& label) {
  if (disc.dimension() > 2000) return;
  const auto sys = assemble_stabilized_system<Dim>(disc, [](const SamplePoint<Dim>&) { return 0.0; });
  StabilizedSystem s = sys;
  s.dirichlet.free.clear();
  const auto flag = boundary_functions(disc.space());
  for (Index i = 0; i < disc.dimension(); ++i) {
    if (!flag[i]) s.dirichlet.free.push_back(i);
  }
  o.require(free_block_positive_definite(s), label + " free block not positive definite");
  std::normal_distribution<double> N(0.0, 1.0);
  for (int k = 0; k < 100; ++k) {
    Vector v = Vector::Zero(disc.dimension());
    for (Index i : s.dirichlet.free) v(i) = N(rng);
    const double a = apply_bilinear(disc, v, v);
    const double n2 = norm_loc_h_squared(disc, v);
    worst_ratio = std::min(worst_ratio, a / n2);
    o.require(a >= 0.5 * n2, label + " a(v,v) < |||v|||^2/2");
  }
  ++meshes;
}

void coercivity(Outcome& o) {
  std::mt19937_64 rng(2025);
  double worst = std::numeric_limits<double>::infinity();
  int meshes = 0;
  const StabilizationConfig cfg;  // bounded θ_K
  for (double T : {1.0, 2.0}) {
    const auto geo = benchmark_patch<2>(PatchId::unit_interval_time, T);
    for (int p : {2, 3}) {
      for (int r = 0; r <= 4; ++r) {
        Discretization<2> disc(uniform_space(geo, p, r), geo, cfg);
        coercivity_on(disc, o, worst, meshes, rng, "T=" + fmt(T) + " p=" + std::to_string(p));
      }
    }
  }
  {
    const auto geo = benchmark_patch<3>(PatchId::quarter_annulus_time, 1.0);
    for (int r = 0; r <= 1; ++r) {
      Discretization<3> disc(uniform_space(geo, 2, r), geo, cfg);
      coercivity_on(disc, o, worst, meshes, rng, "annulus");
    }
  }
  // Graded meshes from adaptive runs.
  for (const char* id : {"ex3", "ex4"}) {
    const auto pc = example_case<2>(id, {1.0, 1.0, 0.5});
    const auto geo = pc.geometry();
    const auto res = run(pc, base_loop(2, 6, false), o, id);
    for (const auto& s : res.steps) {
      Discretization<2> disc(HierarchicalSplineSpace<2>(s.mesh, 2), geo, cfg);
      coercivity_on(disc, o, worst, meshes, rng, std::string(id) + " step " + std::to_string(s.step));
    }
  }
  o.detail << meshes << " meshes, min a(v,v)/|||v|||^2 over random v = " << fmt(worst, 5);
}

// ---------------------------------------------------------------------------
// 7. Flux stationarity

void stationarity(Outcome& o) {
  const auto pc = example_case<2>("ex2", {1.0, 1.0, 0.5});
  const auto geo = pc.geometry();
  HierarchicalMesh<2> mesh({std::vector<double>{0.0, 0.5, 1.0}, std::vector<double>{0.0, 1.0}}, {2, 2});
  const auto sol = solve_stabilized(HierarchicalSplineSpace<2>(mesh, 2), geo, StabilizationConfig{}, pc.f, pc.u_D,
                                    pc.u_0);
  EstimatorContext<2> ctx(sol.disc, sol.u, pc.f, 5);
  o.require(ctx.num_cells() == 2, "two elements");
  const auto flux = make_flux_space(mesh, 3, 1);
  FluxEvaluator<2> ev(ctx, flux);
  const auto target = primal_flux_target(ctx);
  const auto sys = assemble_flux_system(ctx, ev, target);
  const auto rep = minimize_majorant(ctx, ev, target, sys, pc.friedrichs, 40);
  auto value_at = [&](const Vector& y) {
    const auto res = flux_residuals(ctx, ev, target, y);
    return majorant_value(rep.beta, pc.friedrichs, res.md(), res.meq());
  };
  const double base = value_at(rep.y);
  double max_grad = 0.0;
  for (Index k = 0; k < rep.y.size(); ++k) {
    const double eps = 1e-5;
    Vector yp = rep.y, ym = rep.y;
    yp(k) += eps;
    ym(k) -= eps;
    const double fp = value_at(yp), fm = value_at(ym);
    max_grad = std::max(max_grad, std::abs(fp - fm) / (2 * eps));
    o.require(fp > base && fm > base, "coefficient " + std::to_string(k) + " is not a local minimum");
  }
  // The central difference of a quadratic is exact up to rounding.
  o.require(max_grad <= 1e-6 * std::max(1.0, base), "finite-difference gradient");
  o.detail << rep.y.size() << " flux coefficients, max |dM/dy| = " << fmt(max_grad) << ", M^I = " << fmt(base, 6);
}

// ---------------------------------------------------------------------------
// 8. Adaptive localization

void localization(Outcome& o) {
  {
    const auto pc = example_case<2>("ex3");
    const auto res = run(pc, base_loop(2, 6, false), o, "ex3");
    o.detail << "ex3 near-peak share:";
    for (const auto& s : res.steps) {
      if (s.step < 3 || s.marked.empty()) continue;
      int near = 0;
      for (std::size_t i : s.marked) {
        const auto b = s.mesh.cell_box(s.mesh.active_cells()[i]);
        const Point<2> c = 0.5 * (b.lo + b.hi);
        if (std::hypot(c(0) - 0.8, c(1) - 0.05) <= 0.25) ++near;
      }
      const double share = static_cast<double>(near) / static_cast<double>(s.marked.size());
      o.detail << ' ' << fmt(share, 2);
      o.require(share >= 0.5, "ex3 step " + std::to_string(s.step));
    }
    o.detail << "; ";
  }
  for (double lambda : {0.5, 1.0, 1.5}) {
    const auto pc = example_case<2>("ex4", {1.0, 1.0, lambda});
    const auto res = run(pc, base_loop(2, 8, false), o, "ex4");
    const double t1 = 1.0 / pc.T;
    o.detail << "ex4 lambda=" << fmt(lambda) << " finest touching t=1:";
    for (const auto& s : res.steps) {
      if (s.step < 4) continue;
      const int finest = *std::max_element(s.levels.begin(), s.levels.end());
      int total = 0, touching = 0;
      for (const auto& c : s.mesh.active_cells()) {
        if (c.level != finest) continue;
        ++total;
        const auto b = s.mesh.cell_box(c);
        if (b.lo(1) <= t1 + 1e-14 && b.hi(1) >= t1 - 1e-14) ++touching;
      }
      o.detail << ' ' << touching << '/' << total;
      o.require(2 * touching > total, "ex4 lambda=" + fmt(lambda) + " step " + std::to_string(s.step));
    }
    o.detail << "; ";
  }
  {
    const auto pc = example_case<2>("ex2", {1.0, 1.0, 0.5});
    const auto res = run(pc, base_loop(2, 7, false), o, "ex2");
    o.detail << "ex2 marked overlap:";
    for (const auto& s : res.steps) {
      if (s.step < 3 || s.step > 6) continue;
      std::vector<std::size_t> a = s.marked, b = s.marked_exact, both;
      std::sort(a.begin(), a.end());
      std::sort(b.begin(), b.end());
      std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(both));
      const double share = b.empty() ? 0.0 : static_cast<double>(both.size()) / static_cast<double>(b.size());
      o.detail << ' ' << fmt(share, 2);
      o.require(share >= 0.6, "ex2 overlap step " + std::to_string(s.step));
    }
  }
}

// ---------------------------------------------------------------------------
// 9. Element matrices against an independent brute-force quadrature

// Gauss-Legendre nodes and weights on [0, 1] from the Jacobi matrix.
std::pair<std::vector<double>, std::vector<double>> golub_welsch(int n) {
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
  for (int k = 1; k < n; ++k) {
    const double b = k / std::sqrt(4.0 * k * k - 1.0);
    J(k, k - 1) = J(k - 1, k) = b;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
  std::vector<double> x(n), w(n);
  for (int k = 0; k < n; ++k) {
    x[k] = 0.5 * (es.eigenvalues()(k) + 1.0);
    w[k] = es.eigenvectors()(0, k) * es.eigenvectors()(0, k);  // sums to 1
  }
  return {x, w};
}

// Bernstein polynomial B_{i,p} and its first two derivatives at s.
std::array<double, 3> bernstein(int i, int p, double s) {
  auto B = [&](int j, int q) {
    if (j < 0 || j > q) return 0.0;
    double c = 1.0;
    for (int k = 1; k <= j; ++k) c = c * (q - j + k) / k;
    return c * std::pow(s, j) * std::pow(1.0 - s, q - j);
  };
  const double d1 = p * (B(i - 1, p - 1) - B(i, p - 1));
  const double d2 = p >= 2 ? p * (p - 1) * (B(i - 2, p - 2) - 2 * B(i - 1, p - 2) + B(i, p - 2)) : 0.0;
  return {B(i, p), d1, d2};
}

template <int Dim>
double brute_force_element(int p, Outcome& o) {
  constexpr int d = Dim - 1;
  const double T = 2.0;
  const auto geo = benchmark_patch<Dim>(Dim == 2 ? PatchId::unit_interval_time : PatchId::unit_square_time, T);
  StabilizationConfig cfg;
  cfg.bound_theta = false;
  cfg.theta = 0.3;
  Discretization<Dim> disc(uniform_space(geo, p, 0), geo, cfg);
  const double delta = disc.delta(0);
  const int n = p + 1;
  int nf = 1;
  for (int a = 0; a < Dim; ++a) nf *= n;
  const auto [x, w] = golub_welsch(p + 3);
  std::array<Eigen::MatrixXd, 4> ref;
  for (auto& m : ref) m = Eigen::MatrixXd::Zero(nf, nf);
  // Basis values at one tensor quadrature point, multi-index first-fastest.
  std::array<int, Dim> q{};
  const int nq = static_cast<int>(x.size());
  int total_q = 1;
  for (int a = 0; a < Dim; ++a) total_q *= nq;
  std::vector<double> v(nf), dt(nf), lap(nf);
  std::vector<std::array<double, Dim>> grad(nf);
  for (int qi = 0; qi < total_q; ++qi) {
    int rest = qi;
    double W = T;  // |det J| = T on the unit box with t scaled
    for (int a = 0; a < Dim; ++a) {
      q[a] = rest % nq;
      rest /= nq;
      W *= w[q[a]];
    }
    for (int f = 0; f < nf; ++f) {
      int r = f;
      std::array<std::array<double, 3>, Dim> b;
      for (int a = 0; a < Dim; ++a) {
        b[a] = bernstein(r % n, p, x[q[a]]);
        r /= n;
      }
      auto prod = [&](int a_deriv, int order) {
        double s = 1.0;
        for (int a = 0; a < Dim; ++a) s *= b[a][a == a_deriv ? order : 0];
        return s;
      };
      v[f] = prod(-1, 0);
      dt[f] = prod(Dim - 1, 1) / T;
      lap[f] = 0.0;
      for (int a = 0; a < d; ++a) {
        grad[f][a] = prod(a, 1);
        lap[f] += prod(a, 2);
      }
    }
    for (int i = 0; i < nf; ++i) {
      for (int j = 0; j < nf; ++j) {
        double gg = 0.0;
        for (int a = 0; a < d; ++a) gg += grad[i][a] * grad[j][a];
        ref[0](i, j) += W * dt[j] * v[i];
        ref[1](i, j) += W * gg;
        ref[2](i, j) += W * delta * dt[j] * dt[i];
        ref[3](i, j) -= W * delta * lap[j] * dt[i];
      }
    }
  }
  const std::array<unsigned, 4> masks{kTimeDerivative, kStiffness, kUpwindTime, kUpwindLaplace};
  double worst = 0.0;
  for (int t = 0; t < 4; ++t) {
    const auto es = element_system<Dim>(disc, 0, nullptr, masks[t]);
    o.require(static_cast<int>(es.dofs.size()) == nf, "element size");
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(nf, nf);
    for (int r = 0; r < nf; ++r) {
      for (int s = 0; s < nf; ++s) K(es.dofs[r], es.dofs[s]) = es.K(r, s);
    }
    const double err = (K - ref[t]).cwiseAbs().maxCoeff();
    worst = std::max(worst, err);
    o.require(err <= 1e-12, "term " + std::to_string(t) + " p=" + std::to_string(p) + " d=" + std::to_string(d));
  }
  return worst;
}

void oracle_equivalence(Outcome& o) {
  double worst = 0.0;
  for (int p : {2, 3}) {
    worst = std::max(worst, brute_force_element<2>(p, o));
    worst = std::max(worst, brute_force_element<3>(p, o));
  }
  o.detail << "4 terms x (p=2,3) x (d=1,2), max entry difference = " << fmt(worst);
}

// ---------------------------------------------------------------------------
// 10. Three-dimensional smoke test

void annulus_smoke(Outcome& o) {
  const auto pc = example_case<3>("ex5");
  auto cfg = base_loop(2, 3, false);
  cfg.q = 3;
  const auto res = run(pc, cfg, o, "ex5");
  o.require(res.steps.size() == 4, "expected four steps");
  for (const auto& s : res.steps) {
    const double e2 = s.norms->energy * s.norms->energy;
    o.require(s.MI >= e2 * (1.0 - 1e-8), "bound at step " + std::to_string(s.step));
    o.require(std::abs(s.eff.identity - 1.0) <= 1e-5, "identity at step " + std::to_string(s.step));
    if (s.marked.empty()) continue;
    double total = 0.0, sum = 0.0, smallest = std::numeric_limits<double>::infinity();
    for (double e : s.indicators) total += e;
    for (std::size_t i : s.marked) {
      sum += s.indicators[i];
      smallest = std::min(smallest, s.indicators[i]);
    }
    o.require(sum >= cfg.marking.sigma * total, "marked mass below sigma");
    o.require(sum - smallest < cfg.marking.sigma * total, "marked set not minimal");
  }
  if (!res.steps.empty()) {
    const auto& s = res.steps.back();
    o.detail << "dofs " << res.steps.front().dofs_u << " -> " << s.dofs_u << ", final I_eff(M^I) = "
             << fmt(s.eff.majorant_I, 4) << ", I_eff(EId) = " << fmt(s.eff.identity, 8);
  }
}

struct Criterion {
  int id;
  const char* name;
  double budget;  // seconds
  std::function<void(Outcome&)> fn;
};

}  // namespace

int main() {
  const std::vector<Criterion> all{
      {1, "guaranteed bound", 120.0, guaranteed_bound},
      {2, "error identity", 60.0, error_identity_check},
      {3, "exactness in space", 5.0, exactness},
      {4, "convergence rates", 180.0, rates},
      {5, "majorant sharpness", 180.0, sharpness},
      {6, "coercivity", 60.0, coercivity},
      {7, "flux stationarity", 5.0, stationarity},
      {8, "adaptive localization", 300.0, localization},
      {9, "oracle equivalence", 30.0, oracle_equivalence},
      {10, "3D smoke test", 600.0, annulus_smoke},
  };
  int failed = 0;
  for (const auto& c : all) {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      c.fn(o);
    } catch (const std::exception& e) {
      o.require(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    o.require(secs < c.budget, "over time budget");
    if (!o.pass) ++failed;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  criterion " << c.id << " (" << c.name << ")  " << fmt(secs, 3)
              << " s / " << fmt(c.budget, 3) << " s  " << o.detail.str() << std::endl;
  }
  std::cout << (all.size() - failed) << '/' << all.size() << " criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
