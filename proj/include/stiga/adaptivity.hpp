#pragma once

#include "stiga/estimators.hpp"

#include <numeric>
#include <type_traits>

namespace stiga {

enum class IndicatorSource { majorant, exact };

inline IndicatorSource parse_indicator_source(std::string_view s) {
  if (s == "majorant" || s == "majorant_d_K") return IndicatorSource::majorant;
  if (s == "exact" || s == "exact_error_K") return IndicatorSource::exact;
  throw std::invalid_argument("unknown indicator source: " + std::string(s));
}

inline std::string to_string(IndicatorSource s) { return s == IndicatorSource::majorant ? "majorant" : "exact"; }

struct MarkingConfig {
  double sigma = 0.4;
  IndicatorSource source = IndicatorSource::majorant;
};

/// Dörfler marking: the shortest prefix of the cells sorted by η² descending
/// (ties by index) whose sum reaches σ times the total. σ = 1 returns every
/// cell with η² > 0. A zero total marks nothing.
inline std::vector<std::size_t> bulk_mark(const std::vector<double>& eta2, double sigma) {
  if (eta2.empty()) throw std::invalid_argument("bulk_mark: empty indicator table");
  if (!(sigma >= 0.0 && sigma <= 1.0)) throw std::invalid_argument("bulk_mark: sigma must lie in [0, 1]");
  for (double e : eta2) {
    if (!(e >= 0.0)) throw std::invalid_argument("bulk_mark: indicators must be non-negative");
  }
  std::vector<std::size_t> order(eta2.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return eta2[a] > eta2[b]; });
  double total = 0.0;
  for (std::size_t i : order) total += eta2[i];
  std::vector<std::size_t> marked;
  if (total == 0.0) return marked;
  if (sigma == 1.0) {
    for (std::size_t i : order) {
      if (eta2[i] > 0.0) marked.push_back(i);
    }
    return marked;
  }
  const double target = sigma * total;
  double acc = 0.0;
  for (std::size_t i : order) {
    marked.push_back(i);
    acc += eta2[i];
    if (acc >= target) break;
  }
  return marked;
}

/// rate_i = log(e_i / e_{i+1}) / log(s_i / s_{i+1}).
inline std::vector<double> eoc(const std::vector<double>& values, const std::vector<double>& scale) {
  if (values.size() != scale.size()) throw std::invalid_argument("eoc: length mismatch");
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!(values[i] > 0.0) || !(scale[i] > 0.0)) throw std::domain_error("eoc: entries must be positive");
  }
  std::vector<double> r;
  for (std::size_t i = 0; i + 1 < values.size(); ++i) {
    r.push_back(std::log(values[i] / values[i + 1]) / std::log(scale[i] / scale[i + 1]));
  }
  return r;
}

struct LoopConfig {
  int n_ref0 = 1;
  int n_ref = 8;
  int p = 2;  // primal degree
  int q = 3;  // flux degree
  int r = 3;  // degree of the advanced approximation w_h
  int M = 1;  // flux mesh factor
  bool uniform = false;
  bool advanced = true;  // compute w_h and M^II
  int majorant_iters = 3;
  int quad_extra = 0;
  double cf_scale = 1.0;  // multiplies the Friedrichs constant
  Index max_dofs = 200000;
  StabilizationConfig stab;
  MarkingConfig marking;
};

inline void validate(const LoopConfig& c) {
  if (c.n_ref0 < 0 || c.n_ref < 0) throw std::invalid_argument("refinement counts must be >= 0");
  if (c.p < 2) throw std::invalid_argument("primal degree p must be >= 2");
  if (c.q < c.p) throw std::invalid_argument("flux degree q must be >= p");
  if (c.advanced && c.r < 2) throw std::invalid_argument("advanced degree r must be >= 2");
  if (c.M < 1) throw std::invalid_argument("flux mesh factor M must be >= 1");
  if (c.majorant_iters < 1) throw std::invalid_argument("majorant iterations must be >= 1");
  if (c.quad_extra < 0) throw std::invalid_argument("quad_extra must be >= 0");
  if (!(c.cf_scale >= 1.0)) throw std::invalid_argument("cf_scale must be >= 1");
  if (c.max_dofs < 1) throw std::invalid_argument("max_dofs must be positive");
  if (!(c.stab.theta > 0.0)) throw std::invalid_argument("theta must be positive");
  if (!(c.marking.sigma >= 0.0 && c.marking.sigma <= 1.0)) throw std::invalid_argument("sigma must lie in [0, 1]");
}

struct StepTimings {
  double as_u = 0.0, sol_u = 0.0;
  double as_y = 0.0, sol_y = 0.0;
  double as_w = 0.0, sol_w = 0.0;

  /// (t_as + t_sol of u_h) / (t_as + t_sol of y_h and w_h).
  [[nodiscard]] double ratio() const {
    const double est = as_y + sol_y + as_w + sol_w;
    return est > 0.0 ? (as_u + sol_u) / est : std::numeric_limits<double>::quiet_NaN();
  }
};

template <int Dim>
struct StepReport {
  int step = 0;
  HierarchicalMesh<Dim> mesh;
  Index dofs_u = 0, dofs_y = 0, dofs_w = 0;
  double h = 0.0;
  std::optional<ErrorNorms> norms;
  double md = 0.0, meq = 0.0, beta = 0.0;
  double MI = 0.0;
  double MII = std::numeric_limits<double>::quiet_NaN();
  double EId = 0.0;
  Effectivity eff;
  StepTimings t;
  std::vector<double> indicators;  // η_K² = ‖y_h - ∇x u_h‖²_K
  std::vector<std::size_t> marked;
  std::vector<std::size_t> marked_exact;  // bulk marking on ‖∇x e‖²_K, when known
  std::vector<int> levels;
};

template <int Dim>
struct LoopResult {
  std::vector<StepReport<Dim>> steps;
  std::string error;  // set when a step failed
  bool capped = false;  // stopped by the dimension cap
};

/// Solve, estimate and refine one mesh.
template <int Dim>
StepReport<Dim> run_step(const ProblemCase<Dim>& pc, const GeometryMap<Dim>& geo, HierarchicalSplineSpace<Dim> space,
                         const LoopConfig& cfg) {
  const HierarchicalMesh<Dim> mesh = space.mesh();
  auto sol = solve_stabilized(std::move(space), geo, cfg.stab, pc.f, pc.u_D, pc.u_0);
  StepReport<Dim> rep;
  rep.mesh = mesh;
  rep.dofs_u = sol.disc.dimension();
  rep.h = sol.disc.global_h();
  rep.t.as_u = sol.assembly_seconds;
  rep.t.sol_u = sol.solve_seconds;
  const int quad = std::max({cfg.p, cfg.q, cfg.advanced ? cfg.r : 0}) + 2 + cfg.quad_extra;
  EstimatorContext<Dim> ctx(sol.disc, sol.u, pc.f, quad);
  const double C_F = cfg.cf_scale * pc.friedrichs;

  const auto flux = make_flux_space(mesh, cfg.q, cfg.M);
  rep.dofs_y = flux.dimension();
  FluxEvaluator<Dim> ev(ctx, flux);
  const auto target = primal_flux_target(ctx);
  const auto fsys = assemble_flux_system(ctx, ev, target);
  const auto maj = minimize_majorant(ctx, ev, target, fsys, C_F, cfg.majorant_iters);
  rep.t.as_y = fsys.assembly_seconds;
  rep.t.sol_y = maj.solve_seconds;
  rep.md = maj.md;
  rep.meq = maj.meq;
  rep.beta = maj.beta;
  rep.MI = maj.value;
  rep.indicators = maj.indicators;
  rep.EId = error_identity<Dim>(ctx, pc.grad_u0);

  if (cfg.advanced) {
    std::array<int, Dim> rdeg;
    rdeg.fill(cfg.r);
    auto w = solve_stabilized(HierarchicalSplineSpace<Dim>(flux.space.mesh(), rdeg), geo, cfg.stab, pc.f, pc.u_D,
                              pc.u_0);
    rep.dofs_w = w.disc.dimension();
    const auto wf = sample_field(ctx, w.disc.space(), w.u);
    const auto t2 = advanced_flux_target(ctx, wf);
    const auto fsys2 = assemble_flux_system(ctx, ev, t2);
    const auto maj2 = minimize_majorant(ctx, ev, t2, fsys2, C_F, cfg.majorant_iters);
    rep.MII = majorant_II(ctx, wf, ev, maj2.y, C_F).value;
    rep.t.as_w = w.assembly_seconds + fsys2.assembly_seconds;
    rep.t.sol_w = w.solve_seconds + maj2.solve_seconds;
  }

  if (pc.has_exact()) {
    rep.norms = exact_error_norms(ctx, pc);
    rep.eff = effectivity(*rep.norms, rep.MI, rep.MII, rep.EId);
  }
  for (const auto& c : mesh.active_cells()) rep.levels.push_back(c.level);
  return rep;
}

/// N_ref0 uniform refinements, then N_ref marked refinements. Each step is
/// passed to `on_step` as soon as it is complete.
template <int Dim>
LoopResult<Dim> adaptive_loop(const ProblemCase<Dim>& pc, const LoopConfig& cfg,
                              const std::type_identity_t<std::function<void(const StepReport<Dim>&)>>& on_step = {}) {
  validate(cfg);
  if (cfg.marking.source == IndicatorSource::exact && !pc.has_exact()) {
    throw std::invalid_argument("exact-error marking needs an exact solution");
  }
  const auto geo = pc.geometry();
  std::array<int, Dim> deg;
  deg.fill(cfg.p);
  HierarchicalMesh<Dim> mesh(geo.breakpoints(), deg);
  for (int k = 0; k < cfg.n_ref0; ++k) {
    const std::vector<Cell<Dim>> all = mesh.active_cells();
    mesh = mesh.refine_marked(all);
  }
  LoopResult<Dim> out;
  for (int step = 0; step <= cfg.n_ref; ++step) {
    try {
      HierarchicalSplineSpace<Dim> space(mesh, deg);
      if (space.dimension() > cfg.max_dofs) {
        out.capped = true;
        break;
      }
      auto rep = run_step(pc, geo, std::move(space), cfg);
      rep.step = step;
      if (rep.norms) rep.marked_exact = bulk_mark(rep.norms->cell_grad_sq, cfg.marking.sigma);
      if (step < cfg.n_ref) {
        if (cfg.uniform) {
          rep.marked.resize(mesh.num_active());
          std::iota(rep.marked.begin(), rep.marked.end(), std::size_t{0});
        } else {
          rep.marked = cfg.marking.source == IndicatorSource::exact
                           ? rep.marked_exact
                           : bulk_mark(rep.indicators, cfg.marking.sigma);
        }
      }
      std::vector<Cell<Dim>> cells;
      for (std::size_t i : rep.marked) cells.push_back(mesh.active_cells()[i]);
      if (on_step) on_step(rep);
      out.steps.push_back(std::move(rep));
      if (step == cfg.n_ref) break;
      if (cells.empty()) break;  // nothing left to refine
      mesh = mesh.refine_marked(cells);
    } catch (const std::exception& e) {
      out.error = "step " + std::to_string(step) + ": " + e.what();
      break;
    }
  }
  return out;
}

/// e.o.c. scale per step: h for uniform runs, N_dof^(-1/(d+1)) otherwise.
template <int Dim>
std::vector<double> eoc_scale(const std::vector<StepReport<Dim>>& steps, bool uniform) {
  std::vector<double> s;
  for (const auto& r : steps) s.push_back(uniform ? r.h : std::pow(static_cast<double>(r.dofs_u), -1.0 / Dim));
  return s;
}

}  // namespace stiga
