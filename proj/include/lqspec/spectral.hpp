#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "lqspec/errors.hpp"
#include "lqspec/matrix_spec.hpp"
#include "lqspec/scc.hpp"

namespace lqspec {

constexpr double kRadiusTol = 1e-13;
constexpr long kMaxPowerIterations = 1'000'000;

namespace detail {

struct RadiusBracket {
  double lo = 0.0, hi = 0.0;
};

// Collatz-Wielandt bounds min_i (Bx)_i/x_i <= rho(B) <= max_i (Bx)_i/x_i for an
// irreducible nonnegative block, refined by power iteration on B + cI with the
// shift c set to the current upper bound, which keeps the iteration primitive
// and damps eigenvalues near -rho(B). Stops once the bracket is narrower than
// tol or, when a threshold is given, no longer contains it.
inline RadiusBracket irreducible_radius_bracket(const Eigen::MatrixXd& b, double tol,
                                                std::optional<double> threshold = std::nullopt) {
  const Eigen::Index n = b.rows();
  if (n == 1) return {b(0, 0), b(0, 0)};
  // rho(B) is at least every diagonal entry.
  const double diag = b.diagonal().maxCoeff();
  if (threshold && diag > *threshold) return {diag, std::numeric_limits<double>::infinity()};
  Eigen::VectorXd x = Eigen::VectorXd::Constant(n, 1.0 / std::sqrt(static_cast<double>(n)));
  for (long it = 0; it < kMaxPowerIterations; ++it) {
    Eigen::VectorXd bx = b * x;
    const Eigen::ArrayXd ratio = bx.array() / x.array();
    const double lo = std::max(ratio.minCoeff(), diag), hi = ratio.maxCoeff();
    if (hi - lo <= tol * std::max(1.0, hi)) return {lo, hi};
    if (threshold && (lo > *threshold || hi < *threshold)) return {lo, hi};
    x = bx + hi * x;
    x /= x.norm();
    // The bounds hold for any positive x, so components that would underflow are floored.
    x = x.cwiseMax(std::numeric_limits<double>::min());
  }
  throw NoConvergence("power iteration did not converge in " + std::to_string(kMaxPowerIterations) +
                      " iterations");
}

inline double irreducible_radius(const Eigen::MatrixXd& b, double tol) {
  const RadiusBracket r = irreducible_radius_bracket(b, tol);
  return 0.5 * (r.lo + r.hi);
}

// Irreducible diagonal blocks of a nonnegative matrix.
inline std::vector<Eigen::MatrixXd> irreducible_blocks(const Eigen::MatrixXd& m) {
  const int n = static_cast<int>(m.rows());
  std::vector<std::vector<int>> adj(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (m(i, j) > 0.0) adj[i].push_back(j);
  Condensation c = condense(adj);
  std::vector<Eigen::MatrixXd> out;
  for (int k = 0; k < c.count; ++k) {
    if (!c.has_cycle[k]) continue;
    std::vector<int> idx;
    for (int v = 0; v < n; ++v)
      if (c.component[v] == k) idx.push_back(v);
    Eigen::MatrixXd block(idx.size(), idx.size());
    for (std::size_t a = 0; a < idx.size(); ++a)
      for (std::size_t b = 0; b < idx.size(); ++b) block(a, b) = m(idx[a], idx[b]);
    out.push_back(std::move(block));
  }
  return out;
}

}  // namespace detail

// Perron root of a nonnegative matrix: the maximum over its irreducible diagonal blocks.
inline double spectral_radius(const Eigen::MatrixXd& m, double tol = kRadiusTol) {
  if (m.rows() == 0) return 0.0;
  if (!m.allFinite()) return std::numeric_limits<double>::infinity();
  double best = 0.0;
  for (const Eigen::MatrixXd& block : detail::irreducible_blocks(m))
    best = std::max(best, detail::irreducible_radius(block, tol));
  return best;
}

// rho(m) >= threshold, decided as soon as the Collatz-Wielandt bracket allows.
inline bool spectral_radius_at_least(const Eigen::MatrixXd& m, double threshold, double tol = kRadiusTol) {
  if (!m.allFinite()) return true;
  for (const Eigen::MatrixXd& block : detail::irreducible_blocks(m)) {
    const detail::RadiusBracket r = detail::irreducible_radius_bracket(block, tol, threshold);
    if (r.lo >= threshold) return true;
    if (r.hi >= threshold && 0.5 * (r.lo + r.hi) >= threshold) return true;
  }
  return false;
}

struct ClassDecomposition {
  std::vector<std::vector<int>> classes;  // indices, ascending
  std::vector<int> class_of;
  std::vector<std::set<int>> class_dag;  // c -> d: some l in c has a nonzero entry in column of d
  std::vector<bool> final_flags;         // no access to another class
  std::vector<bool> has_cycle;
  std::vector<int> scc_of_class;
};

inline ClassDecomposition communication_classes(const MeasureMatrixSpec& spec) {
  Condensation c = condense(spec.support());
  ClassDecomposition d;
  d.classes.resize(c.count);
  for (int i = 0; i < spec.n; ++i) d.classes[c.component[i]].push_back(i);
  d.class_of = c.component;
  d.class_dag = c.dag;
  d.has_cycle = c.has_cycle;
  for (int k = 0; k < c.count; ++k) {
    d.final_flags.push_back(c.dag[k].empty());
    d.scc_of_class.push_back(spec.scc_of[d.classes[k].front()]);
  }
  return d;
}

// Support pattern irreducible <=> a single communication class.
inline bool is_irreducible(const MeasureMatrixSpec& spec) {
  return communication_classes(spec).classes.size() == 1;
}

// Bisection on a predicate that is false below the root and true above it.
// The search runs over the fixed grid k * 2^final_exponent, so the result is
// the midpoint of the grid cell where the predicate switches, whatever bracket
// it started from.
inline double dyadic_bisect(const std::function<bool(double)>& above, double lo, double hi,
                            int final_exponent = -40) {
  const double cell = std::ldexp(1.0, final_exponent);
  auto at = [&](std::int64_t k) { return static_cast<double>(k) * cell; };
  std::int64_t a = static_cast<std::int64_t>(std::floor(lo / cell));
  std::int64_t b = static_cast<std::int64_t>(std::ceil(hi / cell));
  if (b <= a) b = a + 1;
  // Snapping can move the ends across the switch; step outwards until they bracket it.
  for (std::int64_t step = 1; above(at(a)); step *= 2) a -= step;
  for (std::int64_t step = 1; !above(at(b)); step *= 2) b += step;
  while (b - a > 1) {
    const std::int64_t mid = a + (b - a) / 2;
    if (above(at(mid)))
      b = mid;
    else
      a = mid;
  }
  return (static_cast<double>(a) + 0.5) * cell;
}

struct BracketConfig {
  std::optional<double> hint;  // warm start
  double initial_step = 1.0;
  double lowest = -1e6;
};

// Root alpha_c of rho(block_c(alpha)) = 1.
inline double class_root(const MeasureMatrixSpec& spec, const ClassDecomposition& dec, int c, double q,
                         const BracketConfig& cfg = {}) {
  if (!dec.has_cycle[c]) throw DegenerateClass("class " + std::to_string(c) + " has no cycle");
  const std::vector<int>& idx = dec.classes[c];
  const double bound = domain_bound(spec, idx, q);
  auto above = [&](double alpha) {
    if (!(alpha < bound)) return true;
    try {
      return spectral_radius_at_least(block_at(spec, idx, q, alpha), 1.0);
    } catch (const DomainViolation&) {
      return true;
    }
  };
  double start = cfg.hint.value_or(0.0);
  if (start >= bound) start = std::isfinite(bound) ? bound - cfg.initial_step : 0.0;
  double lo, hi;
  double step = cfg.initial_step;
  if (above(start)) {
    hi = start;
    lo = start - step;
    while (above(lo)) {
      hi = lo;
      step *= 2.0;
      lo = start - step;
      if (lo < cfg.lowest) throw NoBracket("class root below search limit");
    }
  } else {
    lo = start;
    for (;;) {
      const double cand = lo + step;
      if (cand >= bound) {
        hi = bound;
        break;
      }
      if (above(cand)) {
        hi = cand;
        break;
      }
      lo = cand;
      step *= 2.0;
      if (lo > -cfg.lowest) throw NoBracket("class root above search limit");
    }
  }
  return dyadic_bisect(above, lo, hi);
}

// ---------------------------------------------------------------------------
// Lattice detection

struct LatticeVerdict {
  bool lattice = false;
  double span = 0.0;  // common generator when lattice
  std::vector<double> generators;
  long denominator_bound = 1'000'000;
  double residual_tol = 1e-9;
};

namespace detail {

inline void simple_cycles(const std::vector<std::vector<int>>& adj, std::vector<std::vector<int>>& out,
                          std::size_t limit) {
  // Cycles are listed once, rooted at their smallest vertex.
  const int n = static_cast<int>(adj.size());
  std::vector<int> path;
  std::vector<char> on_path(n, 0);
  std::function<void(int, int)> dfs = [&](int root, int v) {
    if (out.size() >= limit) return;
    for (int w : adj[v]) {
      if (w == root) {
        out.push_back(path);
      } else if (w > root && !on_path[w]) {
        on_path[w] = 1;
        path.push_back(w);
        dfs(root, w);
        path.pop_back();
        on_path[w] = 0;
      }
    }
  };
  for (int root = 0; root < n; ++root) {
    path = {root};
    on_path[root] = 1;
    dfs(root, root);
    on_path[root] = 0;
  }
}

// Best convergent p/q of x with q <= qmax and |q x - p| <= tol.
inline std::optional<std::pair<long long, long long>> integer_relation(double x, long long qmax, double tol) {
  long long p0 = 0, q0 = 1, p1 = 1, q1 = 0;
  double y = x;
  for (int it = 0; it < 64; ++it) {
    const double a = std::floor(y);
    if (a > 1e12) break;
    const long long ai = static_cast<long long>(a);
    const long long p2 = ai * p1 + p0, q2 = ai * q1 + q0;
    if (q2 > qmax) break;
    if (std::abs(static_cast<double>(q2) * x - static_cast<double>(p2)) <= tol) return std::make_pair(p2, q2);
    p0 = p1;
    q0 = q1;
    p1 = p2;
    q1 = q2;
    const double frac = y - a;
    if (frac <= 0.0) break;
    y = 1.0 / frac;
  }
  return std::nullopt;
}

}  // namespace detail

// Decides whether the log-lengths of the cycle measures of a class lie in a
// discrete subgroup of R.
inline LatticeVerdict lattice_check(const MeasureMatrixSpec& spec, const ClassDecomposition& dec, int c,
                                    long denominator_bound = 1'000'000, double residual_tol = 1e-9) {
  LatticeVerdict v;
  v.denominator_bound = denominator_bound;
  v.residual_tol = residual_tol;
  const std::vector<int>& idx = dec.classes[c];
  const int k = static_cast<int>(idx.size());
  std::vector<std::vector<int>> adj(k);
  for (int a = 0; a < k; ++a)
    for (int b = 0; b < k; ++b)
      if (!spec.entries[idx[a]][idx[b]].zero()) adj[a].push_back(b);
  std::vector<std::vector<int>> cycles;
  detail::simple_cycles(adj, cycles, 10000);

  auto add = [&](double g) {
    if (g > 1e-300) v.generators.push_back(g);
  };
  for (const auto& cyc : cycles) {
    // Every choice of one family per edge gives a support point of the cycle measure.
    std::vector<double> sums{0.0};
    for (std::size_t t = 0; t < cyc.size(); ++t) {
      const EntrySpec& e = spec.entries[idx[cyc[t]]][idx[cyc[(t + 1) % cyc.size()]]];
      std::vector<double> next;
      for (const AtomFamily& f : e.families) {
        const double len = -std::log(f.base_ratio) - static_cast<double>(f.k_start) * std::log(f.step_ratio);
        if (f.step_ratio < 1.0 && (f.infinite() || *f.k_end > f.k_start)) add(-std::log(f.step_ratio));
        for (double s : sums)
          if (next.size() < 4096) next.push_back(s + len);
      }
      sums = std::move(next);
    }
    for (double s : sums) add(s);
  }
  if (v.generators.empty()) return v;

  const double g0 = v.generators.front();
  std::vector<std::pair<long long, long long>> rel;
  for (double g : v.generators) {
    auto pq = detail::integer_relation(g / g0, denominator_bound, residual_tol);
    if (!pq) return v;
    rel.push_back(*pq);
  }
  long long l = 1;
  for (const auto& [p, q] : rel) {
    l = std::lcm(l, q);
    if (l > 1'000'000'000'000LL) return v;
  }
  long long g = 0;
  for (const auto& [p, q] : rel) g = std::gcd(g, p * (l / q));
  v.lattice = true;
  v.span = g0 * static_cast<double>(g) / static_cast<double>(l);
  return v;
}

// ---------------------------------------------------------------------------
// Classification

enum class TagKind { S0PeriodicOrConstant, SmPolynomial, DecaysToZero, FedByS0, FedBySm };

struct IndexTag {
  TagKind kind = TagKind::DecaysToZero;
  int m = 0;  // polynomial order for SmPolynomial / FedBySm
};

inline std::string to_string(const IndexTag& t) {
  switch (t.kind) {
    case TagKind::S0PeriodicOrConstant: return "S0_periodic_or_constant";
    case TagKind::SmPolynomial: return "Sm_polynomial(" + std::to_string(t.m) + ")";
    case TagKind::DecaysToZero: return "decays_to_zero";
    case TagKind::FedByS0: return "fed_by_S0";
    case TagKind::FedBySm: return "fed_by_Sm(" + std::to_string(t.m) + ")";
  }
  return "?";
}

struct ClassificationResult {
  ClassDecomposition decomposition;
  std::vector<std::optional<double>> roots;  // nullopt for degenerate classes
  double tau = 0.0;
  std::vector<bool> basic;    // root within tie tolerance of tau
  std::vector<int> height;    // 0 for degenerate classes
  std::vector<std::vector<int>> S;  // S[m] = basic classes of height m+1
  std::vector<IndexTag> tags;       // per index
  std::vector<std::optional<LatticeVerdict>> lattice;
  double class_tie_tol = 1e-9;

  std::vector<int> basic_classes() const {
    std::vector<int> out;
    for (std::size_t c = 0; c < basic.size(); ++c)
      if (basic[c]) out.push_back(static_cast<int>(c));
    return out;
  }
};

// Height of a class: 1 + the number of cycled classes that reach it through
// cycled classes. Nilpotent classes neither count nor pass access along.
inline std::vector<int> class_heights(const ClassDecomposition& d) {
  const int k = static_cast<int>(d.classes.size());
  std::vector<int> h(k, 0);
  for (int c = 0; c < k; ++c) {
    if (!d.has_cycle[c]) continue;
    int count = 0;
    for (int s = 0; s < k; ++s) {
      if (s == c || !d.has_cycle[s]) continue;
      std::vector<char> seen(k, 0);
      std::vector<int> todo{s};
      seen[s] = 1;
      bool reaches = false;
      while (!todo.empty() && !reaches) {
        int u = todo.back();
        todo.pop_back();
        for (int w : d.class_dag[u]) {
          if (w == c) {
            reaches = true;
            break;
          }
          if (!seen[w] && d.has_cycle[w]) {
            seen[w] = 1;
            todo.push_back(w);
          }
        }
      }
      if (reaches) ++count;
    }
    h[c] = 1 + count;
  }
  return h;
}

inline ClassificationResult classify_with_roots(const MeasureMatrixSpec& spec, ClassDecomposition dec,
                                                std::vector<std::optional<double>> roots,
                                                double class_tie_tol = 1e-9) {
  ClassificationResult res;
  const int k = static_cast<int>(dec.classes.size());
  res.class_tie_tol = class_tie_tol;
  res.roots = std::move(roots);
  res.tau = std::numeric_limits<double>::infinity();
  for (const auto& r : res.roots)
    if (r) res.tau = std::min(res.tau, *r);
  res.basic.assign(k, false);
  for (int c = 0; c < k; ++c)
    if (res.roots[c] && std::abs(*res.roots[c] - res.tau) <= class_tie_tol) res.basic[c] = true;
  res.height = class_heights(dec);
  for (int c = 0; c < k; ++c) {
    if (!res.basic[c]) continue;
    const int m = res.height[c] - 1;
    if (static_cast<int>(res.S.size()) <= m) res.S.resize(m + 1);
    res.S[m].push_back(c);
  }
  // Classes reachable from each basic class along the support digraph.
  std::vector<int> fed_order(k, -1);
  for (int s = 0; s < k; ++s) {
    if (!res.basic[s]) continue;
    std::vector<char> seen(k, 0);
    std::vector<int> todo{s};
    seen[s] = 1;
    while (!todo.empty()) {
      int u = todo.back();
      todo.pop_back();
      for (int w : dec.class_dag[u])
        if (!seen[w]) {
          seen[w] = 1;
          todo.push_back(w);
          fed_order[w] = std::max(fed_order[w], res.height[s] - 1);
        }
    }
  }
  res.tags.resize(spec.n);
  for (int i = 0; i < spec.n; ++i) {
    const int c = dec.class_of[i];
    IndexTag t;
    if (res.basic[c]) {
      const int m = res.height[c] - 1;
      t = m == 0 ? IndexTag{TagKind::S0PeriodicOrConstant, 0} : IndexTag{TagKind::SmPolynomial, m};
    } else if (fed_order[c] >= 0) {
      const int m = fed_order[c];
      t = m == 0 ? IndexTag{TagKind::FedByS0, 0} : IndexTag{TagKind::FedBySm, m};
    } else {
      t = {TagKind::DecaysToZero, 0};
    }
    res.tags[i] = t;
  }
  res.lattice.resize(k);
  for (int c = 0; c < k; ++c)
    if (dec.has_cycle[c]) res.lattice[c] = lattice_check(spec, dec, c);
  res.decomposition = std::move(dec);
  return res;
}

inline std::vector<std::optional<double>> class_roots(const MeasureMatrixSpec& spec, const ClassDecomposition& dec,
                                                      double q,
                                                      const std::vector<std::optional<double>>& hints = {}) {
  std::vector<std::optional<double>> roots(dec.classes.size());
  for (std::size_t c = 0; c < dec.classes.size(); ++c) {
    if (!dec.has_cycle[c]) continue;
    BracketConfig cfg;
    if (c < hints.size()) cfg.hint = hints[c];
    roots[c] = class_root(spec, dec, static_cast<int>(c), q, cfg);
  }
  return roots;
}

inline ClassificationResult classify(const MeasureMatrixSpec& spec, double q, double class_tie_tol = 1e-9) {
  ClassDecomposition dec = communication_classes(spec);
  auto roots = class_roots(spec, dec, q);
  return classify_with_roots(spec, std::move(dec), std::move(roots), class_tie_tol);
}

}  // namespace lqspec
