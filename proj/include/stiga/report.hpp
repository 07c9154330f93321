#pragma once

#include "stiga/adaptivity.hpp"

#include <json.hpp>

#include <charconv>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

namespace stiga {

/// One experiment: a catalogue case, the loop settings and output options.
struct RunConfig {
  std::string example = "ex1";
  ExampleParams params;
  LoopConfig loop;
  std::string output_dir = "out";
  std::string name;  // file prefix, defaults to the example id
  bool vtk = false;
  bool strict = false;  // one thread, zero timings, byte-identical output

  [[nodiscard]] std::string prefix() const { return name.empty() ? example : name; }
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline int parse_int(const std::string& key, const std::string& v) {
  int out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) throw std::invalid_argument(key + ": not an integer: " + v);
  return out;
}

inline double parse_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || !std::isfinite(out)) {
    throw std::invalid_argument(key + ": not a finite number: " + v);
  }
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw std::invalid_argument(key + ": not a boolean: " + v);
}

}  // namespace detail

/// Parses flat `key = value` text. '#' starts a comment; unknown and
/// repeated keys are errors.
inline RunConfig parse_config(std::string_view text) {
  RunConfig c;
  std::map<std::string, std::string> kv;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string t = detail::trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = detail::trim(std::string_view(t).substr(0, eq));
    const std::string value = detail::trim(std::string_view(t).substr(eq + 1));
    if (key.empty() || value.empty()) throw std::invalid_argument("line " + std::to_string(lineno) + ": empty key or value");
    if (!kv.emplace(key, value).second) throw std::invalid_argument("duplicate key: " + key);
  }

  auto& L = c.loop;
  for (const auto& [k, v] : kv) {
    if (k == "example") c.example = v;
    else if (k == "k1") c.params.k1 = detail::parse_double(k, v);
    else if (k == "k2") c.params.k2 = detail::parse_double(k, v);
    else if (k == "lambda") c.params.lambda = detail::parse_double(k, v);
    else if (k == "p") L.p = detail::parse_int(k, v);
    else if (k == "q") L.q = detail::parse_int(k, v);
    else if (k == "r") L.r = detail::parse_int(k, v);
    else if (k == "M") L.M = detail::parse_int(k, v);
    else if (k == "n_ref0") L.n_ref0 = detail::parse_int(k, v);
    else if (k == "n_ref") L.n_ref = detail::parse_int(k, v);
    else if (k == "sigma") L.marking.sigma = detail::parse_double(k, v);
    else if (k == "marking") L.marking.source = parse_indicator_source(v);
    else if (k == "refinement") {
      if (v != "uniform" && v != "adaptive") throw std::invalid_argument("refinement: expected uniform or adaptive");
      L.uniform = v == "uniform";
    }
    else if (k == "advanced") L.advanced = detail::parse_bool(k, v);
    else if (k == "majorant_iters") L.majorant_iters = detail::parse_int(k, v);
    else if (k == "quad_extra") L.quad_extra = detail::parse_int(k, v);
    else if (k == "cf_scale") L.cf_scale = detail::parse_double(k, v);
    else if (k == "max_dofs") L.max_dofs = detail::parse_int(k, v);
    else if (k == "stabilization") L.stab.mode = parse_stabilization(v);
    else if (k == "theta") L.stab.theta = detail::parse_double(k, v);
    else if (k == "bound_theta") L.stab.bound_theta = detail::parse_bool(k, v);
    else if (k == "c_int") L.stab.C_int1 = detail::parse_double(k, v);
    else if (k == "output") c.output_dir = v;
    else if (k == "name") c.name = v;
    else if (k == "vtk") c.vtk = detail::parse_bool(k, v);
    else if (k == "strict") c.strict = detail::parse_bool(k, v);
    else throw std::invalid_argument("unknown key: " + k);
  }
  return c;
}

inline RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read config: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

/// Checks everything that can be checked without solving.
inline void validate(const RunConfig& c) {
  const int dim = example_dimension(c.example);
  validate(c.loop);
  if (!(c.loop.stab.C_int1 >= 0.0)) throw std::invalid_argument("c_int must be >= 0 (0 estimates it)");
  if (c.loop.marking.source == IndicatorSource::exact && c.loop.uniform) {
    throw std::invalid_argument("exact-error marking has no effect with uniform refinement");
  }
  // Builds the case so parameter errors (for example lambda <= 0) surface here.
  if (dim == 2) {
    (void)example_case<2>(c.example, c.params);
  } else {
    (void)example_case<3>(c.example, c.params);
  }
  if (c.prefix().find('/') != std::string::npos) throw std::invalid_argument("name must not contain '/'");
}

inline nlohmann::json to_json(const RunConfig& c) {
  const auto& L = c.loop;
  return {
      {"example", c.example},
      {"k1", c.params.k1},
      {"k2", c.params.k2},
      {"lambda", c.params.lambda},
      {"p", L.p},
      {"q", L.q},
      {"r", L.r},
      {"M", L.M},
      {"n_ref0", L.n_ref0},
      {"n_ref", L.n_ref},
      {"sigma", L.marking.sigma},
      {"marking", to_string(L.marking.source)},
      {"refinement", L.uniform ? "uniform" : "adaptive"},
      {"advanced", L.advanced},
      {"majorant_iters", L.majorant_iters},
      {"quad_extra", L.quad_extra},
      {"cf_scale", L.cf_scale},
      {"max_dofs", L.max_dofs},
      {"stabilization", to_string(L.stab.mode)},
      {"theta", L.stab.theta},
      {"bound_theta", L.stab.bound_theta},
      {"c_int", L.stab.C_int1},
      {"output", c.output_dir},
      {"name", c.prefix()},
      {"vtk", c.vtk},
      {"strict", c.strict},
  };
}

// ---------------------------------------------------------------------------
// CSV

inline const std::vector<std::string>& report_columns() {
  static const std::vector<std::string> cols{
      "step",       "dofs_u",    "dofs_y",    "dofs_w",     "err_grad_x", "err_energy", "ieff_MI",
      "ieff_MII",   "err_loc_h", "err_L",     "ieff_EId",   "eoc_loc_h",  "eoc_L",      "eoc_grad_x",
      "MI",         "MII",       "EId",       "md",         "meq",        "beta",       "marked",
      "t_as_u",     "t_sol_u",   "t_as_y",    "t_sol_y",    "t_as_w",     "t_sol_w",    "ratio"};
  return cols;
}

/// 17 significant digits; non-finite values print as "nan" or "inf".
inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.16e", v);
  return buf;
}

template <int Dim>
std::vector<std::vector<std::string>> report_rows(const std::vector<StepReport<Dim>>& steps, bool uniform,
                                                  bool strict) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const auto scale = eoc_scale(steps, uniform);
  auto rate = [&](std::size_t k, auto&& get) {
    if (k == 0 || !steps[k].norms || !steps[k - 1].norms) return nan;
    const double a = get(*steps[k - 1].norms), b = get(*steps[k].norms);
    if (!(a > 0.0) || !(b > 0.0) || scale[k - 1] == scale[k]) return nan;
    return eoc({a, b}, {scale[k - 1], scale[k]})[0];
  };
  std::vector<std::vector<std::string>> rows;
  for (std::size_t k = 0; k < steps.size(); ++k) {
    const auto& s = steps[k];
    const auto* n = s.norms ? &*s.norms : nullptr;
    const StepTimings t = strict ? StepTimings{} : s.t;
    const double ratio = strict ? nan : t.ratio();
    std::vector<double> vals{
        n ? n->grad_x : nan,
        n ? n->energy : nan,
        s.eff.majorant_I,
        s.eff.majorant_II,
        n ? n->loc_h : nan,
        n ? n->L : nan,
        s.eff.identity,
        rate(k, [](const ErrorNorms& e) { return e.loc_h; }),
        rate(k, [](const ErrorNorms& e) { return e.L; }),
        rate(k, [](const ErrorNorms& e) { return e.grad_x; }),
        s.MI,
        s.MII,
        s.EId,
        s.md,
        s.meq,
        s.beta,
    };
    std::vector<std::string> row{std::to_string(s.step), std::to_string(s.dofs_u), std::to_string(s.dofs_y),
                                 std::to_string(s.dofs_w)};
    for (double v : vals) row.push_back(format_number(v));
    row.push_back(std::to_string(s.marked.size()));
    for (double v : {t.as_u, t.sol_u, t.as_y, t.sol_y, t.as_w, t.sol_w, ratio}) row.push_back(format_number(v));
    rows.push_back(std::move(row));
  }
  return rows;
}

template <int Dim>
void write_report_csv(std::ostream& os, const std::vector<StepReport<Dim>>& steps, bool uniform, bool strict) {
  const auto& cols = report_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i];
  os << '\n';
  for (const auto& row : report_rows(steps, uniform, strict)) {
    for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << row[i];
    os << '\n';
  }
}

// ---------------------------------------------------------------------------
// VTK

/// Legacy ASCII unstructured grid: one linear quad (Dim = 2) or hexahedron
/// (Dim = 3) per active cell, corners mapped to physical space. Space-time
/// points are written as (x, t, 0) or (x, y, t). Cell fields: level and η_K².
template <int Dim>
void write_mesh_vtk(std::ostream& os, const HierarchicalMesh<Dim>& mesh, const GeometryMap<Dim>& geo,
                    const std::vector<double>& eta2, const std::string& title = "stiga mesh") {
  static_assert(Dim == 2 || Dim == 3, "VTK export supports 2D and 3D space-time meshes");
  const auto& cells = mesh.active_cells();
  if (eta2.size() != cells.size()) throw std::invalid_argument("write_mesh_vtk: indicator table size mismatch");
  constexpr int nc = 1 << Dim;
  // VTK corner order: counter-clockwise bottom face, then the top face.
  constexpr std::array<std::array<int, 3>, 8> order{
      {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0}, {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}}};
  os << "# vtk DataFile Version 3.0\n" << title << "\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  os << "POINTS " << cells.size() * nc << " double\n";
  char buf[96];
  for (const auto& c : cells) {
    const auto box = mesh.cell_box(c);
    for (int k = 0; k < nc; ++k) {
      Point<Dim> xi;
      for (int a = 0; a < Dim; ++a) xi(a) = order[k][a] ? box.hi(a) : box.lo(a);
      const Point<Dim> x = geo.evaluate(xi, 0).x;
      if constexpr (Dim == 2) {
        std::snprintf(buf, sizeof buf, "%.17g %.17g 0\n", x(0), x(1));
      } else {
        std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g\n", x(0), x(1), x(2));
      }
      os << buf;
    }
  }
  os << "CELLS " << cells.size() << ' ' << cells.size() * (nc + 1) << '\n';
  for (std::size_t i = 0; i < cells.size(); ++i) {
    os << nc;
    for (int k = 0; k < nc; ++k) os << ' ' << i * nc + k;
    os << '\n';
  }
  os << "CELL_TYPES " << cells.size() << '\n';
  for (std::size_t i = 0; i < cells.size(); ++i) os << (Dim == 2 ? 9 : 12) << '\n';
  os << "CELL_DATA " << cells.size() << "\nSCALARS level int 1\nLOOKUP_TABLE default\n";
  for (const auto& c : cells) os << c.level << '\n';
  os << "SCALARS eta2 double 1\nLOOKUP_TABLE default\n";
  for (double e : eta2) {
    std::snprintf(buf, sizeof buf, "%.17g\n", e);
    os << buf;
  }
}

// ---------------------------------------------------------------------------
// Run

struct RunOutput {
  std::filesystem::path csv, json;
  std::vector<std::filesystem::path> vtk;
  std::size_t steps = 0;
  std::string error;
  bool capped = false;
};

template <int Dim>
RunOutput run_experiment(const RunConfig& cfg, std::ostream* log = nullptr) {
  validate(cfg);
  // Strict mode runs single-threaded; the previous setting is restored on exit.
  struct ThreadGuard {
    int saved = detail::thread_override();
    ~ThreadGuard() { detail::thread_override() = saved; }
  } guard;
  if (cfg.strict) set_thread_count(1);
  const auto pc = example_case<Dim>(cfg.example, cfg.params);
  const auto geo = pc.geometry();
  namespace fs = std::filesystem;
  const fs::path dir(cfg.output_dir);
  fs::create_directories(dir);
  RunOutput out;
  out.csv = dir / (cfg.prefix() + ".csv");
  out.json = dir / (cfg.prefix() + ".json");

  const auto clock0 = std::chrono::steady_clock::now();
  auto on_step = [&](const StepReport<Dim>& s) {
    if (log) {
      *log << "step " << s.step << ": dofs " << s.dofs_u << ", M^I " << format_number(s.MI);
      if (s.norms) *log << ", |||e|||^2 " << format_number(s.norms->energy * s.norms->energy);
      *log << ", marked " << s.marked.size() << '\n';
    }
    if (cfg.vtk) {
      const fs::path p = dir / (cfg.prefix() + "_step" + std::to_string(s.step) + ".vtk");
      std::ofstream f(p);
      if (!f) throw std::runtime_error("cannot write " + p.string());
      write_mesh_vtk(f, s.mesh, geo, s.indicators, cfg.prefix() + " step " + std::to_string(s.step));
      out.vtk.push_back(p);
    }
  };
  const auto result = adaptive_loop(pc, cfg.loop, on_step);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - clock0).count();
  out.steps = result.steps.size();
  out.error = result.error;
  out.capped = result.capped;

  {
    std::ofstream f(out.csv);
    if (!f) throw std::runtime_error("cannot write " + out.csv.string());
    write_report_csv(f, result.steps, cfg.loop.uniform, cfg.strict);
  }

  nlohmann::json meta;
  meta["config"] = to_json(cfg);
  meta["problem"] = {{"id", pc.id},
                     {"description", pc.description},
                     {"patch", to_string(pc.patch)},
                     {"T", pc.T},
                     {"space_time_dimension", Dim},
                     {"friedrichs_constant", pc.friedrichs},
                     {"has_exact_solution", pc.has_exact()}};
  meta["steps"] = result.steps.size();
  meta["capped"] = result.capped;
  meta["error"] = result.error;
  meta["threads"] = thread_count();
  meta["wall_seconds"] = cfg.strict ? 0.0 : wall;
  meta["csv"] = out.csv.filename().string();
  std::vector<std::string> vtk_names;
  for (const auto& p : out.vtk) vtk_names.push_back(p.filename().string());
  meta["vtk"] = vtk_names;
  if (!result.steps.empty()) {
    const auto& s = result.steps.back();
    meta["final"] = {{"step", s.step}, {"dofs_u", s.dofs_u}, {"MI", s.MI}, {"EId", s.EId}};
    if (s.norms) meta["final"]["err_energy"] = s.norms->energy;
  }
  std::ofstream f(out.json);
  if (!f) throw std::runtime_error("cannot write " + out.json.string());
  f << meta.dump(2) << '\n';
  return out;
}

/// Dimension dispatch for run_experiment.
inline RunOutput run_experiment(const RunConfig& cfg, std::ostream* log = nullptr) {
  return example_dimension(cfg.example) == 2 ? run_experiment<2>(cfg, log) : run_experiment<3>(cfg, log);
}

}  // namespace stiga
