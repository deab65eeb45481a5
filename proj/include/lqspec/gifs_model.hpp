#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdio>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "lqspec/errors.hpp"
#include "lqspec/scc.hpp"

namespace lqspec {

// x -> ratio * orthogonal * x + translation
struct Similitude {
  int dim = 1;
  double ratio = 1.0;
  Eigen::MatrixXd orthogonal = Eigen::MatrixXd::Identity(1, 1);
  Eigen::VectorXd translation = Eigen::VectorXd::Zero(1);

  static Similitude identity(int dim) {
    return {dim, 1.0, Eigen::MatrixXd::Identity(dim, dim), Eigen::VectorXd::Zero(dim)};
  }
  static Similitude scaled(double ratio, std::vector<double> shift) {
    const int d = static_cast<int>(shift.size());
    return {d, ratio, Eigen::MatrixXd::Identity(d, d),
            Eigen::Map<Eigen::VectorXd>(shift.data(), d)};
  }
  // Planar map ratio * R(angle) * x + shift.
  static Similitude rotated(double ratio, double angle, double bx, double by) {
    Eigen::MatrixXd rot(2, 2);
    rot << std::cos(angle), -std::sin(angle), std::sin(angle), std::cos(angle);
    Eigen::VectorXd b(2);
    b << bx, by;
    return {2, ratio, rot, b};
  }

  Eigen::VectorXd operator()(const Eigen::VectorXd& x) const {
    return ratio * (orthogonal * x) + translation;
  }
  Eigen::MatrixXd linear() const { return ratio * orthogonal; }
};

// (a o b)(x) = a(b(x))
inline Similitude compose(const Similitude& a, const Similitude& b) {
  return {a.dim, a.ratio * b.ratio, a.orthogonal * b.orthogonal,
          a.ratio * (a.orthogonal * b.translation) + a.translation};
}

struct Edge {
  std::string id;
  int src = 0;
  int dst = 0;
  Similitude map;
  double prob = 0.0;
};

struct Box {
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;
  Eigen::VectorXd center() const { return 0.5 * (lo + hi); }
};

struct Gifs {
  int num_vertices = 0;
  int dim = 1;
  std::vector<Edge> edges;
  // Per-vertex box containing the attractor K_i; anchors the sampler and the box grid.
  std::vector<Box> reference_boxes;

  std::optional<int> edge_index(const std::string& id) const {
    for (std::size_t i = 0; i < edges.size(); ++i)
      if (edges[i].id == id) return static_cast<int>(i);
    return std::nullopt;
  }
};

using PathWord = std::vector<std::string>;

struct ValidationReport {
  bool ok = true;
  std::vector<std::string> violations;
};

constexpr double kProbabilityTolerance = 1e-12;

inline ValidationReport validate_gifs(const Gifs& g) {
  ValidationReport rep;
  auto fail = [&](std::string msg) {
    rep.ok = false;
    rep.violations.push_back(std::move(msg));
  };
  char buf[160];
  std::vector<double> out_sum(g.num_vertices, 0.0);
  std::vector<int> out_count(g.num_vertices, 0);
  for (const Edge& e : g.edges) {
    const std::string where = "edge " + e.id + ": ";
    if (e.src < 0 || e.src >= g.num_vertices || e.dst < 0 || e.dst >= g.num_vertices) {
      fail(where + "vertex index out of range");
      continue;
    }
    if (!(e.map.ratio > 0.0 && e.map.ratio < 1.0)) fail(where + "contraction ratio not in (0,1)");
    if (!(e.prob > 0.0 && e.prob <= 1.0)) fail(where + "probability not in (0,1]");
    if (e.map.dim != g.dim || e.map.orthogonal.rows() != g.dim ||
        e.map.orthogonal.cols() != g.dim || e.map.translation.size() != g.dim) {
      fail(where + "dimension differs from the system dimension");
    } else {
      Eigen::MatrixXd gram = e.map.orthogonal.transpose() * e.map.orthogonal;
      Eigen::MatrixXd id = Eigen::MatrixXd::Identity(g.dim, g.dim);
      if ((gram - id).cwiseAbs().maxCoeff() > 1e-12) fail(where + "orthogonal part is not orthogonal");
    }
    out_sum[e.src] += e.prob;
    ++out_count[e.src];
  }
  for (int v = 0; v < g.num_vertices; ++v) {
    if (out_count[v] == 0) {
      std::snprintf(buf, sizeof buf, "vertex %d has no outgoing edge", v + 1);
      fail(buf);
    } else if (std::abs(out_sum[v] - 1.0) > kProbabilityTolerance) {
      std::snprintf(buf, sizeof buf, "vertex %d probabilities sum to %.5g", v + 1, out_sum[v]);
      fail(buf);
    }
  }
  return rep;
}

struct SccResult {
  std::vector<int> component_of;  // vertex -> component, 0-based
  int count = 0;
  std::vector<std::set<int>> condensation;
  bool strongly_connected = false;
};

inline SccResult scc_decompose(const Gifs& g) {
  std::vector<std::vector<int>> adj(g.num_vertices);
  for (const Edge& e : g.edges) adj[e.src].push_back(e.dst);
  Condensation c = condense(adj);
  return {c.component, c.count, c.dag, c.count == 1};
}

inline std::pair<Similitude, double> compose_path(const Gifs& g, const PathWord& word) {
  Similitude acc = Similitude::identity(g.dim);
  double prob = 1.0;
  int expected_src = -1;
  for (const std::string& id : word) {
    auto idx = g.edge_index(id);
    if (!idx) throw ChainBroken("unknown edge " + id);
    const Edge& e = g.edges[*idx];
    if (expected_src != -1 && e.src != expected_src)
      throw ChainBroken("edge " + id + " does not start where the previous edge ends");
    acc = compose(acc, e.map);
    prob *= e.prob;
    expected_src = e.dst;
  }
  return {acc, prob};
}

// ---------------------------------------------------------------------------
// Built-in families

enum class FamilyId { StrongR, StrongR2, NonstrongRBasic, NonstrongRHeights, NonstrongR2 };

inline const std::vector<std::pair<FamilyId, std::string>>& family_names() {
  static const std::vector<std::pair<FamilyId, std::string>> names = {
      {FamilyId::StrongR, "strong-r"},
      {FamilyId::StrongR2, "strong-r2"},
      {FamilyId::NonstrongRBasic, "nonstrong-r-basic"},
      {FamilyId::NonstrongRHeights, "nonstrong-r-heights"},
      {FamilyId::NonstrongR2, "nonstrong-r2"}};
  return names;
}

inline std::string to_string(FamilyId id) {
  for (const auto& [f, name] : family_names())
    if (f == id) return name;
  return "?";
}

inline FamilyId family_from_string(const std::string& s) {
  for (const auto& [f, name] : family_names())
    if (name == s) return f;
  throw InvalidParams("unknown family '" + s + "'");
}

inline int family_edge_count(FamilyId id) {
  switch (id) {
    case FamilyId::StrongR: return 5;
    case FamilyId::StrongR2: return 8;
    case FamilyId::NonstrongRBasic: return 5;
    case FamilyId::NonstrongRHeights: return 17;
    case FamilyId::NonstrongR2: return 7;
  }
  return 0;
}

inline const double kGoldenRho = (std::sqrt(5.0) - 1.0) / 2.0;

struct FamilyParams {
  FamilyId family = FamilyId::StrongR;
  double rho = 1.0 / 3.0;
  double r = 2.0 / 7.0;
  double t = 0.5;
  double s = 0.25;
  std::map<std::string, double> probs;  // "e1" -> p_{e1}

  double p(int i) const {
    auto it = probs.find("e" + std::to_string(i));
    if (it == probs.end()) throw InvalidParams("missing probability for e" + std::to_string(i));
    return it->second;
  }
};

namespace detail {

struct EdgeShape {
  int src, dst;
  Similitude map;
};

inline std::vector<EdgeShape> family_edges(const FamilyParams& fp) {
  const double rho = fp.rho, r = fp.r;
  auto lin = [](double a, double b) { return Similitude::scaled(a, {b}); };
  // The three interval maps shared by the one-dimensional families.
  const Similitude s_rho = lin(rho, 0.0);
  const Similitude s_mid = lin(r, rho * (1.0 - r));
  const Similitude s_right = lin(r, 1.0 - r);
  switch (fp.family) {
    case FamilyId::StrongR:
      return {{0, 0, s_rho}, {0, 1, s_mid}, {0, 0, s_right}, {1, 1, s_right}, {1, 0, s_rho}};
    case FamilyId::StrongR2: {
      const double g = kGoldenRho, g2 = g * g, g3 = g2 * g;
      const double half_pi = std::numbers::pi / 2.0;
      return {{0, 0, Similitude::rotated(g2, 0.0, g3, g3)},
              {0, 0, Similitude::rotated(g2, 0.0, g, 0.0)},
              {0, 0, Similitude::rotated(g2, 0.0, 0.0, g)},
              {0, 1, Similitude::rotated(g2, 0.0, 0.0, 0.0)},
              {1, 0, Similitude::rotated(g2, -half_pi, 0.0, 1.0)},
              {1, 0, Similitude::rotated(g2, half_pi, 1.0, 0.0)},
              {1, 1, Similitude::rotated(g2, 0.0, 0.0, 0.0)},
              {1, 1, Similitude::rotated(g2, 0.0, g, g)}};
    }
    case FamilyId::NonstrongRBasic:
      return {{0, 0, s_rho}, {0, 0, s_mid}, {0, 0, s_right}, {1, 1, s_right}, {1, 0, s_rho}};
    case FamilyId::NonstrongRHeights:
      return {{0, 0, s_rho},   {0, 0, s_mid},   {0, 0, s_right},  // e1-e3
              {1, 0, s_rho},   {1, 1, s_mid},   {1, 1, s_right},  // e4-e6
              {2, 2, s_rho},   {2, 2, s_mid},   {2, 2, s_right},  // e7-e9
              {3, 2, s_rho},   {3, 3, s_mid},   {3, 3, s_right},  // e10-e12
              {4, 2, s_rho},   {4, 4, s_mid},   {4, 4, s_right},  // e13-e15
              {5, 0, s_rho},   {5, 5, s_right}};                   // e16-e17
    case FamilyId::NonstrongR2: {
      const double t = fp.t, s = fp.s;
      // e5 uses (2+rho)(1-r): the conjugate of x -> r x + rho(1-r) under x -> x+2,
      // which is what makes S_{e4 e6} = S_{e5 e4} hold.
      return {{0, 1, Similitude::rotated(s, 0.0, -2.0 * s, 0.0)},
              {0, 0, Similitude::rotated(t, 0.0, 1.0 - t, 0.0)},
              {0, 0, Similitude::rotated(1.0 - t, 0.0, 0.0, t)},
              {1, 1, Similitude::rotated(rho, 0.0, 2.0 * (1.0 - rho), 0.0)},
              {1, 1, Similitude::rotated(r, 0.0, (2.0 + rho) * (1.0 - r), 0.0)},
              {1, 1, Similitude::rotated(r, 0.0, 3.0 * (1.0 - r), 0.0)},
              {1, 1, Similitude::rotated(r, 0.0, 2.0 * (1.0 - r), 1.0 - r)}};
    }
  }
  return {};
}

inline int family_vertex_count(FamilyId id) {
  switch (id) {
    case FamilyId::NonstrongRHeights: return 6;
    default: return 2;
  }
}

inline int family_dim(FamilyId id) {
  return (id == FamilyId::StrongR2 || id == FamilyId::NonstrongR2) ? 2 : 1;
}

inline Box make_box(std::vector<double> lo, std::vector<double> hi) {
  const int d = static_cast<int>(lo.size());
  return {Eigen::Map<Eigen::VectorXd>(lo.data(), d), Eigen::Map<Eigen::VectorXd>(hi.data(), d)};
}

}  // namespace detail

// Throws InvalidParams naming the first violated constraint. The rho+2r-rho*r <= 1
// constraint keeps first-level cells ordered; the measure matrices stay
// well defined without it, so callers that only need the matrix may skip it.
inline void check_family_params(const FamilyParams& fp, bool enforce_separation = true) {
  auto need = [](bool ok, const std::string& msg) {
    if (!ok) throw InvalidParams(msg);
  };
  if (fp.family != FamilyId::StrongR2) {
    need(fp.rho > 0.0 && fp.rho < 1.0, "rho must lie in (0,1)");
    need(fp.r > 0.0 && fp.r < 1.0, "r must lie in (0,1)");
    const double gap = fp.rho + 2.0 * fp.r - fp.rho * fp.r;
    char buf[120];
    std::snprintf(buf, sizeof buf, "rho+2r-rho*r=%.6g exceeds 1", gap);
    if (enforce_separation) need(gap <= 1.0 + 1e-15, buf);
  }
  if (fp.family == FamilyId::NonstrongR2) {
    need(fp.t > 0.0 && fp.t < 1.0, "t must lie in (0,1)");
    need(fp.s > 0.0 && fp.s < std::min(fp.t, 1.0 - fp.t), "s must lie in (0, min(t, 1-t))");
  }
  const int m = family_edge_count(fp.family);
  for (int i = 1; i <= m; ++i) {
    const double p = fp.p(i);
    need(p > 0.0 && p <= 1.0, "probability of e" + std::to_string(i) + " not in (0,1]");
  }
}

inline Gifs build_example(const FamilyParams& fp, bool enforce_separation = true) {
  check_family_params(fp, enforce_separation);
  Gifs g;
  g.num_vertices = detail::family_vertex_count(fp.family);
  g.dim = detail::family_dim(fp.family);
  auto shapes = detail::family_edges(fp);
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    const int label = static_cast<int>(i) + 1;
    g.edges.push_back({"e" + std::to_string(label), shapes[i].src, shapes[i].dst, shapes[i].map,
                       fp.p(label)});
  }
  if (fp.family == FamilyId::NonstrongR2) {
    g.reference_boxes = {detail::make_box({0, 0}, {1, 1}), detail::make_box({2, 0}, {3, 1})};
  } else if (g.dim == 2) {
    g.reference_boxes.assign(g.num_vertices, detail::make_box({0, 0}, {1, 1}));
  } else {
    g.reference_boxes.assign(g.num_vertices, detail::make_box({0}, {1}));
  }
  return g;
}

// Equal probabilities on the outgoing edges of every vertex.
inline std::map<std::string, double> uniform_probabilities(FamilyId id) {
  FamilyParams fp;
  fp.family = id;
  auto shapes = detail::family_edges(fp);
  std::vector<int> out(detail::family_vertex_count(id), 0);
  for (const auto& e : shapes) ++out[e.src];
  std::map<std::string, double> p;
  for (std::size_t i = 0; i < shapes.size(); ++i)
    p["e" + std::to_string(i + 1)] = 1.0 / out[shapes[i].src];
  return p;
}

// Copies probabilities onto structurally identical vertices so that the matching
// communication classes tie. Only nonstrong-r-heights has such twins: vertex 3
// mirrors vertex 1 (e7-e9 <- e1-e3), vertices 4 and 5 mirror vertex 2
// (e10-e12, e13-e15 <- e4-e6, with the loop-back weight e9 <- e3 already covered).
// `given` may be partial; missing edges default to uniform.
inline std::map<std::string, double> symmetric_probabilities(
    FamilyId id, const std::map<std::string, double>& given = {}) {
  auto p = uniform_probabilities(id);
  for (const auto& [k, v] : given) p[k] = v;
  if (id == FamilyId::NonstrongRHeights) {
    auto copy = [&](int dst, int src) { p["e" + std::to_string(dst)] = p["e" + std::to_string(src)]; };
    for (int j = 0; j < 3; ++j) {
      copy(7 + j, 1 + j);
      copy(10 + j, 4 + j);
      copy(13 + j, 4 + j);
    }
  }
  return p;
}

inline FamilyParams canonical_params(FamilyId id) {
  FamilyParams fp;
  fp.family = id;
  if (id == FamilyId::StrongR2) fp.rho = kGoldenRho;
  fp.probs = uniform_probabilities(id);
  return fp;
}

}  // namespace lqspec
