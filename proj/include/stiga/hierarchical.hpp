#pragma once

#include "stiga/tensor_space.hpp"

#include <algorithm>
#include <cstdint>
#include <iostream>
#include <span>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

namespace stiga {

/// A dyadic cell: level plus integer coordinates in that level's cell grid.
template <int Dim>
struct Cell {
  int level = 0;
  std::array<int, Dim> index{};

  friend bool operator==(const Cell& a, const Cell& b) { return a.level == b.level && a.index == b.index; }

  // Level-major, then lexicographic with the last (time) direction slowest.
  friend bool operator<(const Cell& a, const Cell& b) {
    if (a.level != b.level) return a.level < b.level;
    for (int d = Dim - 1; d >= 0; --d) {
      if (a.index[d] != b.index[d]) return a.index[d] < b.index[d];
    }
    return false;
  }

  [[nodiscard]] Cell parent() const {
    Cell c{level - 1, index};
    for (auto& i : c.index) i >>= 1;
    return c;
  }

  [[nodiscard]] Cell ancestor(int target_level) const {
    Cell c{target_level, index};
    for (auto& i : c.index) i >>= (level - target_level);
    return c;
  }
};

/// Axis-aligned box in the parameter cube.
template <int Dim>
struct Box {
  Point<Dim> lo;
  Point<Dim> hi;

  [[nodiscard]] double volume() const { return (hi - lo).prod(); }
  [[nodiscard]] double diameter() const { return (hi - lo).norm(); }
  [[nodiscard]] Point<Dim> center() const { return 0.5 * (lo + hi); }
};

/// Nested dyadic cell grids over [0,1]^Dim. Level-l cells halve the level-(l-1)
/// cells in every direction. A cell is either active (a leaf), refined (all
/// 2^Dim children present) or absent. Value type: refinement returns a copy.
template <int Dim>
class HierarchicalMesh {
 public:
  static constexpr int kDefaultMaxLevel = 12;

  HierarchicalMesh() = default;

  /// `degree` is the spline degree whose support extensions define admissibility.
  HierarchicalMesh(std::array<std::vector<double>, Dim> base_breakpoints, std::array<int, Dim> degree,
                   int max_level = kDefaultMaxLevel)
      : base_(std::move(base_breakpoints)), degree_(degree), max_level_(max_level) {
    for (int a = 0; a < Dim; ++a) {
      if (base_[a].size() < 2) throw std::invalid_argument("HierarchicalMesh: need at least one span");
      base_cells_[a] = static_cast<int>(base_[a].size()) - 1;
    }
    rebuild_active();
  }

  /// Uniform level-0 grid with `spans` cells per direction.
  static HierarchicalMesh uniform(int spans, int degree, int max_level = kDefaultMaxLevel) {
    std::array<std::vector<double>, Dim> bp;
    std::array<int, Dim> deg{};
    for (int a = 0; a < Dim; ++a) {
      bp[a] = KnotVector::uniform(1, spans).breakpoints();
      deg[a] = degree;
    }
    return HierarchicalMesh(bp, deg, max_level);
  }

  [[nodiscard]] const std::array<std::vector<double>, Dim>& base_breakpoints() const { return base_; }
  [[nodiscard]] const std::array<int, Dim>& degree() const { return degree_; }
  [[nodiscard]] int max_level() const { return max_level_; }
  /// Number of levels that hold at least one present cell.
  [[nodiscard]] int num_levels() const {
    int n = static_cast<int>(refined_.size());
    while (n > 0 && refined_[n - 1].empty()) --n;
    return n + 1;
  }

  [[nodiscard]] int cells_per_dir(int level, int a) const { return base_cells_[a] << level; }

  [[nodiscard]] std::uint64_t key(const Cell<Dim>& c) const {
    std::uint64_t k = 0;
    for (int a = Dim - 1; a >= 0; --a) {
      k = k * static_cast<std::uint64_t>(cells_per_dir(c.level, a)) + static_cast<std::uint64_t>(c.index[a]);
    }
    return k;
  }

  [[nodiscard]] bool is_refined(const Cell<Dim>& c) const {
    return c.level < static_cast<int>(refined_.size()) && refined_[c.level].count(key(c)) > 0;
  }
  [[nodiscard]] bool is_present(const Cell<Dim>& c) const { return c.level == 0 || is_refined(c.parent()); }
  [[nodiscard]] bool is_active(const Cell<Dim>& c) const { return is_present(c) && !is_refined(c); }

  [[nodiscard]] const std::vector<Cell<Dim>>& active_cells() const { return active_; }
  [[nodiscard]] std::size_t num_active() const { return active_.size(); }

  /// Position of `c` in active_cells(), or -1.
  [[nodiscard]] Index find_active(const Cell<Dim>& c) const {
    auto it = std::lower_bound(active_.begin(), active_.end(), c);
    return (it != active_.end() && *it == c) ? static_cast<Index>(it - active_.begin()) : -1;
  }

  /// Level-l breakpoint i in direction a, computed by repeated midpoints so
  /// it matches dyadic_refine exactly.
  [[nodiscard]] double breakpoint(int level, int a, int i) const {
    if (level == 0) return base_[a][i];
    const double left = breakpoint(level - 1, a, i >> 1);
    if ((i & 1) == 0) return left;
    return 0.5 * (left + breakpoint(level - 1, a, (i >> 1) + 1));
  }

  [[nodiscard]] Box<Dim> cell_box(const Cell<Dim>& c) const {
    Box<Dim> b;
    for (int a = 0; a < Dim; ++a) {
      b.lo(a) = breakpoint(c.level, a, c.index[a]);
      b.hi(a) = breakpoint(c.level, a, c.index[a] + 1);
    }
    return b;
  }

  /// Level-l cell containing xi (upper boundary belongs to the last cell).
  [[nodiscard]] Cell<Dim> cell_at(int level, const Point<Dim>& xi) const {
    Cell<Dim> c{level, {}};
    for (int a = 0; a < Dim; ++a) {
      int lo = 0;
      int hi = cells_per_dir(level, a) - 1;
      while (lo < hi) {
        const int mid = (lo + hi + 1) / 2;
        if (breakpoint(level, a, mid) <= xi(a)) {
          lo = mid;
        } else {
          hi = mid - 1;
        }
      }
      c.index[a] = lo;
    }
    return c;
  }

  /// Active cell containing xi.
  [[nodiscard]] Cell<Dim> locate(const Point<Dim>& xi) const {
    for (int a = 0; a < Dim; ++a) {
      if (!(xi(a) >= 0.0 && xi(a) <= 1.0)) throw std::domain_error("locate: point outside parameter cube");
    }
    Cell<Dim> c = cell_at(0, xi);
    while (is_refined(c)) c = cell_at(c.level + 1, xi);
    return c;
  }

  /// Level-l cells whose degree-p supports cover `c` (support extension).
  [[nodiscard]] std::pair<std::array<int, Dim>, std::array<int, Dim>> support_extension(const Cell<Dim>& c) const {
    std::array<int, Dim> lo{};
    std::array<int, Dim> hi{};
    for (int a = 0; a < Dim; ++a) {
      lo[a] = std::max(0, c.index[a] - degree_[a]);
      hi[a] = std::min(cells_per_dir(c.level, a) - 1, c.index[a] + degree_[a]);
    }
    return {lo, hi};
  }

  /// Replaces every marked active cell by its children, then refines further
  /// cells until every support extension meets only levels l-1, l, l+1.
  /// Marks on cells at max_level() are dropped with a warning.
  [[nodiscard]] HierarchicalMesh refine_marked(std::span<const Cell<Dim>> marked) const {
    HierarchicalMesh out = *this;
    bool warned = false;
    for (const auto& c : marked) {
      if (!is_active(c)) throw std::invalid_argument("refine_marked: cell is not active");
      if (c.level >= max_level_) {
        if (!warned) {
          std::cerr << "warning: refinement beyond max level " << max_level_ << " ignored\n";
          warned = true;
        }
        continue;
      }
      out.mark_refined(c);
    }
    out.close_admissible();
    return out;
  }

  /// True when every active cell satisfies the class-2 condition.
  [[nodiscard]] bool is_admissible() const {
    for (const auto& c : active_) {
      if (needs_coarse_refinement(c, nullptr) || sees_too_fine(c)) return false;
    }
    return true;
  }

  /// Mesh whose leaves are the ancestors `shift` levels up of the active
  /// cells (never above level 0), with nested duplicates merged.
  [[nodiscard]] HierarchicalMesh coarsened(int shift) const {
    if (shift <= 0) return *this;
    std::vector<Cell<Dim>> leaves;
    leaves.reserve(active_.size());
    for (const auto& c : active_) leaves.push_back(c.ancestor(std::max(0, c.level - shift)));
    std::sort(leaves.begin(), leaves.end());
    leaves.erase(std::unique(leaves.begin(), leaves.end()), leaves.end());
    HierarchicalMesh out(base_, degree_, max_level_);
    std::vector<std::unordered_set<std::uint64_t>> leafset(num_levels());
    for (const auto& c : leaves) leafset[c.level].insert(key(c));
    for (const auto& c : leaves) {
      bool nested = false;
      for (int l = c.level - 1; l >= 0 && !nested; --l) nested = leafset[l].count(key(c.ancestor(l))) > 0;
      if (nested) continue;
      for (int l = c.level - 1; l >= 0; --l) out.mark_refined_raw(c.ancestor(l));
    }
    out.rebuild_active();
    return out;
  }

 private:
  void mark_refined_raw(const Cell<Dim>& c) {
    if (static_cast<int>(refined_.size()) <= c.level) refined_.resize(c.level + 1);
    refined_[c.level].insert(key(c));
  }

  void mark_refined(const Cell<Dim>& c) { mark_refined_raw(c); }

  // Active cells of level <= l-2 meeting the support extension of c.
  bool needs_coarse_refinement(const Cell<Dim>& c, std::vector<Cell<Dim>>* collect) const {
    if (c.level < 2) return false;
    auto [lo, hi] = support_extension(c);
    bool found = false;
    for (int m = 0; m <= c.level - 2; ++m) {
      const int shift = c.level - m;
      std::array<int, Dim> mlo{};
      std::array<int, Dim> mhi{};
      for (int a = 0; a < Dim; ++a) {
        mlo[a] = lo[a] >> shift;
        mhi[a] = hi[a] >> shift;
      }
      for_each_in_range(m, mlo, mhi, [&](const Cell<Dim>& k) {
        if (is_active(k)) {
          found = true;
          if (collect) collect->push_back(k);
        }
      });
      if (found && !collect) return true;
    }
    return found;
  }

  // Does the support extension of c contain cells of level >= l+2?
  bool sees_too_fine(const Cell<Dim>& c) const {
    const int l1 = c.level + 1;
    if (l1 >= static_cast<int>(refined_.size()) || refined_[l1].empty()) return false;
    auto [lo, hi] = support_extension(c);
    std::array<int, Dim> flo{};
    std::array<int, Dim> fhi{};
    for (int a = 0; a < Dim; ++a) {
      flo[a] = 2 * lo[a];
      fhi[a] = 2 * hi[a] + 1;
    }
    bool found = false;
    for_each_in_range(l1, flo, fhi, [&](const Cell<Dim>& k) {
      if (!found && refined_[l1].count(key(k))) found = true;
    });
    return found;
  }

  template <class F>
  void for_each_in_range(int level, const std::array<int, Dim>& lo, const std::array<int, Dim>& hi, F&& f) const {
    Cell<Dim> k{level, lo};
    while (true) {
      f(k);
      int a = 0;
      for (; a < Dim; ++a) {
        if (++k.index[a] <= hi[a]) break;
        k.index[a] = lo[a];
      }
      if (a == Dim) break;
    }
  }

  void close_admissible() {
    bool changed = true;
    while (changed) {
      changed = false;
      rebuild_active();
      std::vector<Cell<Dim>> to_refine;
      for (const auto& c : active_) {
        needs_coarse_refinement(c, &to_refine);
        if (c.level < max_level_ && sees_too_fine(c)) to_refine.push_back(c);
      }
      for (const auto& c : to_refine) {
        if (!is_refined(c)) {
          mark_refined(c);
          changed = true;
        }
      }
    }
    rebuild_active();
  }

  void rebuild_active() {
    active_.clear();
    // Depth-first over present cells.
    std::vector<Cell<Dim>> stack;
    std::array<int, Dim> lo{};
    std::array<int, Dim> hi{};
    for (int a = 0; a < Dim; ++a) hi[a] = base_cells_[a] - 1;
    for_each_in_range(0, lo, hi, [&](const Cell<Dim>& c) { stack.push_back(c); });
    while (!stack.empty()) {
      Cell<Dim> c = stack.back();
      stack.pop_back();
      if (!is_refined(c)) {
        active_.push_back(c);
        continue;
      }
      for (int child = 0; child < (1 << Dim); ++child) {
        Cell<Dim> k{c.level + 1, {}};
        for (int a = 0; a < Dim; ++a) k.index[a] = 2 * c.index[a] + ((child >> a) & 1);
        stack.push_back(k);
      }
    }
    std::sort(active_.begin(), active_.end());
  }

  std::array<std::vector<double>, Dim> base_;
  std::array<int, Dim> base_cells_{};
  std::array<int, Dim> degree_{};
  int max_level_ = kDefaultMaxLevel;
  std::vector<std::unordered_set<std::uint64_t>> refined_;
  std::vector<Cell<Dim>> active_;
};

/// The THB functions restricted to one active cell, written in the basis of
/// the (p+1)^Dim tensor B-splines of the cell's level.
template <int Dim>
struct CellBasis {
  Cell<Dim> cell;
  std::vector<Index> dofs;  // global ids, one per row of coef
  Eigen::MatrixXd coef;     // dofs.size() x local tensor functions
};

/// THB-function values and parametric derivatives at one point.
template <int Dim>
struct ActiveEval {
  std::vector<Index> dofs;
  std::vector<double> values;
  std::vector<Point<Dim>> grads;
  std::vector<Matrix<Dim>> hessians;
};

/// Truncated hierarchical B-spline space on a HierarchicalMesh.
///
/// A level-l B-spline is active iff its support lies in the level-l domain
/// and meets an active level-l cell. Active functions are truncated against
/// every finer level by dropping the two-scale contributions of finer
/// functions whose supports lie in the finer domain.
template <int Dim>
class HierarchicalSplineSpace {
 public:
  struct Function {
    int level = 0;
    std::array<int, Dim> index{};
  };

  HierarchicalSplineSpace() = default;

  /// Level 0 uses open knot vectors on the mesh base breakpoints with simple
  /// interior knots; finer levels are dyadic refinements.
  HierarchicalSplineSpace(HierarchicalMesh<Dim> mesh, std::array<int, Dim> degree)
      : mesh_(std::move(mesh)), degree_(degree) {
    std::array<KnotVector, Dim> kv0;
    for (int a = 0; a < Dim; ++a) {
      if (degree_[a] < 1) throw std::invalid_argument("HierarchicalSplineSpace: degree must be >= 1");
      kv0[a] = KnotVector::from_breakpoints(mesh_.base_breakpoints()[a], degree_[a]);
    }
    levels_.emplace_back(kv0);
    for (int l = 1; l < mesh_.num_levels(); ++l) {
      std::array<KnotVector, Dim> kv;
      std::array<std::vector<TwoScaleRow>, Dim> ts;
      for (int a = 0; a < Dim; ++a) {
        kv[a] = dyadic_refine(levels_.back().knot_vector(a));
        ts[a] = two_scale(levels_.back().knot_vector(a), kv[a]);
      }
      levels_.emplace_back(kv);
      two_scale_.push_back(std::move(ts));
    }
    collect_functions();
  }

  HierarchicalSplineSpace(HierarchicalMesh<Dim> mesh, int degree)
      : HierarchicalSplineSpace(std::move(mesh), filled(degree)) {}

  [[nodiscard]] const HierarchicalMesh<Dim>& mesh() const { return mesh_; }
  [[nodiscard]] const std::array<int, Dim>& degree() const { return degree_; }
  [[nodiscard]] int degree(int a) const { return degree_[a]; }
  [[nodiscard]] Index dimension() const { return static_cast<Index>(functions_.size()); }
  [[nodiscard]] int num_levels() const { return static_cast<int>(levels_.size()); }
  [[nodiscard]] const TensorSplineSpace<Dim>& level_space(int l) const { return levels_[l]; }
  [[nodiscard]] const std::vector<Function>& functions() const { return functions_; }

  /// Global id of an active level-l function, or -1.
  [[nodiscard]] Index function_id(int level, const std::array<int, Dim>& m) const {
    if (level >= num_levels()) return -1;
    auto it = ids_.find(fkey(level, m));
    return it == ids_.end() ? -1 : it->second;
  }

  /// Greville point of the B-spline generating function `id`.
  [[nodiscard]] Point<Dim> greville_point(Index id) const {
    const auto& f = functions_[id];
    Point<Dim> g;
    for (int a = 0; a < Dim; ++a) {
      const auto& kv = levels_[f.level].knot_vector(a);
      const int p = kv.degree();
      double s = 0.0;
      for (int k = 1; k <= p; ++k) s += kv[f.index[a] + k];
      g(a) = s / p;
    }
    return g;
  }

  [[nodiscard]] CellBasis<Dim> cell_basis(const Cell<Dim>& cell) const {
    if (!mesh_.is_active(cell)) throw std::invalid_argument("cell_basis: cell is not active");
    CellBasis<Dim> out;
    out.cell = cell;
    Cell<Dim> anc = cell.ancestor(0);
    auto window = window_start(anc);
    Eigen::MatrixXd coef(0, local_count());
    std::vector<Index> dofs;
    append_active_rows(anc, window, coef, dofs);
    for (int m = 0; m < cell.level; ++m) {
      Cell<Dim> next = cell.ancestor(m + 1);
      auto next_window = window_start(next);
      if (coef.rows() > 0) {
        Eigen::MatrixXd R = local_two_scale(m, window, next_window);
        coef = (coef * R).eval();
        // Truncation: drop finer functions whose supports lie in the finer domain.
        for (int k = 0; k < local_count(); ++k) {
          const auto mi = unravel(next_window, k);
          if (support_in_domain(m + 1, mi)) coef.col(k).setZero();
        }
      }
      window = next_window;
      append_active_rows(next, window, coef, dofs);
    }
    std::vector<int> keep;
    for (int r = 0; r < coef.rows(); ++r) {
      if ((coef.row(r).array() != 0.0).any()) keep.push_back(r);
    }
    out.coef.resize(static_cast<Index>(keep.size()), coef.cols());
    out.dofs.resize(keep.size());
    for (std::size_t i = 0; i < keep.size(); ++i) {
      out.coef.row(static_cast<Index>(i)) = coef.row(keep[i]);
      out.dofs[i] = dofs[keep[i]];
    }
    return out;
  }

  /// First multi-index of the (p+1)^Dim tensor functions of the cell's level.
  [[nodiscard]] std::array<int, Dim> tensor_window(const Cell<Dim>& cell) const { return window_start(cell); }

  [[nodiscard]] std::vector<Index> active_functions_on_cell(const Cell<Dim>& cell) const {
    return cell_basis(cell).dofs;
  }

  /// Tensor evaluation of the cell's level at xi with the cell's spans forced.
  [[nodiscard]] BasisEval<Dim> local_tensor_eval(const Cell<Dim>& cell, const Point<Dim>& xi, int nderiv) const {
    return levels_[cell.level].eval(xi, nderiv, &cell.index);
  }

  /// All active (truncated) functions nonzero at xi with their parametric derivatives.
  [[nodiscard]] ActiveEval<Dim> eval_active(const Point<Dim>& xi, int nderiv) const {
    const Cell<Dim> cell = mesh_.locate(xi);
    return eval_on_cell(cell_basis(cell), xi, nderiv);
  }

  [[nodiscard]] ActiveEval<Dim> eval_on_cell(const CellBasis<Dim>& cb, const Point<Dim>& xi, int nderiv) const {
    const auto te = local_tensor_eval(cb.cell, xi, nderiv);
    ActiveEval<Dim> out;
    out.dofs = cb.dofs;
    const Index n = cb.coef.rows();
    out.values.assign(n, 0.0);
    if (nderiv >= 1) out.grads.assign(n, Point<Dim>::Zero());
    if (nderiv >= 2) out.hessians.assign(n, Matrix<Dim>::Zero());
    for (Index r = 0; r < n; ++r) {
      for (int k = 0; k < te.count(); ++k) {
        const double c = cb.coef(r, k);
        if (c == 0.0) continue;
        out.values[r] += c * te.values[k];
        if (nderiv >= 1) out.grads[r] += c * te.grads[k];
        if (nderiv >= 2) out.hessians[r] += c * te.hessians[k];
      }
    }
    return out;
  }

  /// Does the support of level-l function m lie inside the level-l domain?
  [[nodiscard]] bool support_in_domain(int level, const std::array<int, Dim>& m) const {
    if (level == 0) return true;
    auto [lo, hi] = support_box(level, m);
    return all_in_range(level - 1, halve(lo), halve(hi), [&](const Cell<Dim>& c) { return mesh_.is_refined(c); });
  }

 private:
  static std::array<int, Dim> filled(int v) {
    std::array<int, Dim> a{};
    a.fill(v);
    return a;
  }

  static std::array<int, Dim> halve(std::array<int, Dim> a) {
    for (auto& v : a) v >>= 1;
    return a;
  }

  [[nodiscard]] int local_count() const {
    int n = 1;
    for (int a = 0; a < Dim; ++a) n *= degree_[a] + 1;
    return n;
  }

  [[nodiscard]] std::array<int, Dim> window_start(const Cell<Dim>& c) const {
    std::array<int, Dim> s{};
    for (int a = 0; a < Dim; ++a) s[a] = levels_[c.level].knot_vector(a).first_function(c.index[a]);
    return s;
  }

  [[nodiscard]] std::array<int, Dim> unravel(const std::array<int, Dim>& start, int k) const {
    std::array<int, Dim> m{};
    for (int a = 0; a < Dim; ++a) {
      m[a] = start[a] + k % (degree_[a] + 1);
      k /= (degree_[a] + 1);
    }
    return m;
  }

  [[nodiscard]] std::pair<std::array<int, Dim>, std::array<int, Dim>> support_box(int level,
                                                                                const std::array<int, Dim>& m) const {
    std::array<int, Dim> lo{};
    std::array<int, Dim> hi{};
    for (int a = 0; a < Dim; ++a) {
      auto [f, l] = levels_[level].knot_vector(a).support_cells(m[a]);
      lo[a] = f;
      hi[a] = l;
    }
    return {lo, hi};
  }

  template <class Pred>
  bool all_in_range(int level, const std::array<int, Dim>& lo, const std::array<int, Dim>& hi, Pred&& pred) const {
    Cell<Dim> k{level, lo};
    while (true) {
      if (!pred(k)) return false;
      int a = 0;
      for (; a < Dim; ++a) {
        if (++k.index[a] <= hi[a]) break;
        k.index[a] = lo[a];
      }
      if (a == Dim) return true;
    }
  }

  [[nodiscard]] bool is_active_function(int level, const std::array<int, Dim>& m) const {
    if (!support_in_domain(level, m)) return false;
    auto [lo, hi] = support_box(level, m);
    // Not active if every support cell is refined.
    return !all_in_range(level, lo, hi, [&](const Cell<Dim>& c) { return mesh_.is_refined(c); });
  }

  [[nodiscard]] std::uint64_t fkey(int level, const std::array<int, Dim>& m) const {
    return static_cast<std::uint64_t>(levels_[level].linear_index(m)) * 64u + static_cast<std::uint64_t>(level);
  }

  void collect_functions() {
    std::vector<std::pair<Cell<Dim>, std::uint64_t>> found;  // (level, lexicographic key)
    std::unordered_set<std::uint64_t> seen;
    for (const auto& c : mesh_.active_cells()) {
      const auto start = window_start(c);
      for (int k = 0; k < local_count(); ++k) {
        const auto m = unravel(start, k);
        const auto key = fkey(c.level, m);
        if (seen.count(key)) continue;
        seen.insert(key);
        if (is_active_function(c.level, m)) found.push_back({Cell<Dim>{c.level, m}, key});
      }
    }
    std::sort(found.begin(), found.end(), [this](const auto& x, const auto& y) {
      if (x.first.level != y.first.level) return x.first.level < y.first.level;
      return levels_[x.first.level].linear_index(x.first.index) < levels_[y.first.level].linear_index(y.first.index);
    });
    functions_.clear();
    ids_.clear();
    for (const auto& [c, key] : found) {
      ids_[key] = static_cast<Index>(functions_.size());
      functions_.push_back({c.level, c.index});
    }
  }

  void append_active_rows(const Cell<Dim>& c, const std::array<int, Dim>& start, Eigen::MatrixXd& coef,
                          std::vector<Index>& dofs) const {
    std::vector<std::pair<Index, int>> rows;
    for (int k = 0; k < local_count(); ++k) {
      const Index id = function_id(c.level, unravel(start, k));
      if (id >= 0) rows.push_back({id, k});
    }
    if (rows.empty()) return;
    const Index r0 = coef.rows();
    coef.conservativeResize(r0 + static_cast<Index>(rows.size()), Eigen::NoChange);
    coef.bottomRows(static_cast<Index>(rows.size())).setZero();
    for (std::size_t i = 0; i < rows.size(); ++i) {
      coef(r0 + static_cast<Index>(i), rows[i].second) = 1.0;
      dofs.push_back(rows[i].first);
    }
  }

  // Restriction of the level-m -> level-(m+1) two-scale relation to the two windows.
  [[nodiscard]] Eigen::MatrixXd local_two_scale(int m, const std::array<int, Dim>& coarse_start,
                                                const std::array<int, Dim>& fine_start) const {
    std::array<Eigen::MatrixXd, Dim> uni;
    for (int a = 0; a < Dim; ++a) {
      const int n = degree_[a] + 1;
      uni[a].resize(n, n);
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) uni[a](i, j) = two_scale_[m][a][coarse_start[a] + i].at(fine_start[a] + j);
      }
    }
    // Kronecker product with direction 0 fastest.
    Eigen::MatrixXd R = uni[0];
    for (int a = 1; a < Dim; ++a) {
      Eigen::MatrixXd next(R.rows() * uni[a].rows(), R.cols() * uni[a].cols());
      for (Index i = 0; i < uni[a].rows(); ++i) {
        for (Index j = 0; j < uni[a].cols(); ++j) {
          next.block(i * R.rows(), j * R.cols(), R.rows(), R.cols()) = uni[a](i, j) * R;
        }
      }
      R = std::move(next);
    }
    return R;
  }

  HierarchicalMesh<Dim> mesh_;
  std::array<int, Dim> degree_{};
  std::vector<TensorSplineSpace<Dim>> levels_;
  std::vector<std::array<std::vector<TwoScaleRow>, Dim>> two_scale_;
  std::vector<Function> functions_;
  std::unordered_map<std::uint64_t, Index> ids_;
};

/// Free-function forms.
template <int Dim>
HierarchicalMesh<Dim> refine_marked(const HierarchicalMesh<Dim>& mesh, std::span<const Cell<Dim>> marked) {
  return mesh.refine_marked(marked);
}

template <int Dim>
Index space_dimension(const HierarchicalSplineSpace<Dim>& space) {
  return space.dimension();
}

template <int Dim>
std::vector<Index> active_functions_on_cell(const HierarchicalSplineSpace<Dim>& space, const Cell<Dim>& cell) {
  return space.active_functions_on_cell(cell);
}

}  // namespace stiga
