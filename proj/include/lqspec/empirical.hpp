#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>
#include <random>
#include <vector>

#include "lqspec/errors.hpp"
#include "lqspec/gifs_model.hpp"
#include "lqspec/parallel.hpp"

namespace lqspec {

constexpr long kSampleChunk = 65536;

struct SampleCloud {
  int dim = 1;
  std::vector<double> coords;  // point i at [i*dim, (i+1)*dim)
  std::vector<int> source_vertex;
  long n_per_vertex = 0;
  std::uint64_t seed = 0;
  double depth_eps = 1e-9;
  Eigen::VectorXd origin;  // min corner of the union of the reference boxes
  Eigen::VectorXd extent_hi;

  std::size_t size() const { return source_vertex.size(); }
};

namespace detail {

inline double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

template <int D>
void run_walks(const Gifs& g, const std::vector<std::vector<int>>& out_edges,
               const std::vector<std::vector<double>>& cdf, long first, long last, long n_per_vertex,
               double depth_eps, std::mt19937_64& rng, double* coords, int* vertex) {
  using Mat = Eigen::Matrix<double, D, D>;
  using Vec = Eigen::Matrix<double, D, 1>;
  std::vector<Mat> lin(g.edges.size());
  std::vector<Vec> shift(g.edges.size());
  for (std::size_t e = 0; e < g.edges.size(); ++e) {
    lin[e] = g.edges[e].map.linear();
    shift[e] = g.edges[e].map.translation;
  }
  std::vector<Vec> anchor(g.num_vertices);
  for (int v = 0; v < g.num_vertices; ++v) anchor[v] = g.reference_boxes[v].center();

  for (long w = first; w < last; ++w) {
    const int start = static_cast<int>(w / n_per_vertex);
    int v = start;
    Mat a = Mat::Identity();
    Vec b = Vec::Zero();
    double ratio = 1.0;
    while (ratio > depth_eps) {
      const double u = uniform01(rng);
      const auto& c = cdf[v];
      std::size_t k = std::upper_bound(c.begin(), c.end(), u) - c.begin();
      if (k >= c.size()) k = c.size() - 1;
      const int e = out_edges[v][k];
      b += a * shift[e];
      a = a * lin[e];
      ratio *= g.edges[e].map.ratio;
      v = g.edges[e].dst;
    }
    const Vec x = a * anchor[v] + b;
    for (int i = 0; i < D; ++i) coords[(w - first) * D + i] = x(i);
    vertex[w - first] = start;
  }
}

}  // namespace detail

// Chaos-game draws: n_per_vertex walks from every vertex, each stopped once the
// composed contraction ratio is <= depth_eps and emitted at the image of the
// final vertex's reference-box centre. Chunk c uses the stream seeded by (seed, c).
inline SampleCloud sample(const Gifs& g, long n_per_vertex, std::uint64_t seed, double depth_eps = 1e-9,
                          int threads = 0) {
  ValidationReport rep = validate_gifs(g);
  if (!rep.ok) throw InvalidParams(rep.violations.front());
  if (n_per_vertex < 0) throw InvalidParams("n_per_vertex must be >= 0");
  if (!(depth_eps > 0.0 && depth_eps < 1.0)) throw InvalidParams("depth_eps must be in (0,1)");
  if (g.dim != 1 && g.dim != 2) throw InvalidParams("sampler supports dimensions 1 and 2");

  SampleCloud cloud;
  cloud.dim = g.dim;
  cloud.n_per_vertex = n_per_vertex;
  cloud.seed = seed;
  cloud.depth_eps = depth_eps;
  cloud.origin = g.reference_boxes.front().lo;
  cloud.extent_hi = g.reference_boxes.front().hi;
  for (const Box& b : g.reference_boxes) {
    cloud.origin = cloud.origin.cwiseMin(b.lo);
    cloud.extent_hi = cloud.extent_hi.cwiseMax(b.hi);
  }

  std::vector<std::vector<int>> out_edges(g.num_vertices);
  std::vector<std::vector<double>> cdf(g.num_vertices);
  for (std::size_t e = 0; e < g.edges.size(); ++e) {
    const int v = g.edges[e].src;
    out_edges[v].push_back(static_cast<int>(e));
    cdf[v].push_back((cdf[v].empty() ? 0.0 : cdf[v].back()) + g.edges[e].prob);
  }

  const long total = n_per_vertex * g.num_vertices;
  cloud.coords.resize(static_cast<std::size_t>(total) * g.dim);
  cloud.source_vertex.resize(total);
  const long chunks = (total + kSampleChunk - 1) / kSampleChunk;
  parallel_for(chunks, threads, [&](long c) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(c), static_cast<std::uint32_t>(c >> 32)};
    std::mt19937_64 rng(seq);
    const long first = c * kSampleChunk, last = std::min(total, first + kSampleChunk);
    double* xs = cloud.coords.data() + first * g.dim;
    int* vs = cloud.source_vertex.data() + first;
    if (g.dim == 1)
      detail::run_walks<1>(g, out_edges, cdf, first, last, n_per_vertex, depth_eps, rng, xs, vs);
    else
      detail::run_walks<2>(g, out_edges, cdf, first, last, n_per_vertex, depth_eps, rng, xs, vs);
  });
  return cloud;
}

// Occupancy counts of the grid of side h anchored at the cloud origin, in key order.
inline std::vector<long> box_counts(const SampleCloud& cloud, double h) {
  if (!(h > 0.0)) throw InvalidParams("box side h must be > 0");
  const std::size_t n = cloud.size();
  std::vector<std::array<std::int64_t, 2>> keys(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::array<std::int64_t, 2> k{0, 0};
    for (int d = 0; d < cloud.dim; ++d)
      k[d] = static_cast<std::int64_t>(std::floor((cloud.coords[i * cloud.dim + d] - cloud.origin(d)) / h));
    keys[i] = k;
  }
  std::sort(keys.begin(), keys.end());
  std::vector<long> counts;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && keys[j] == keys[i]) ++j;
    counts.push_back(static_cast<long>(j - i));
    i = j;
  }
  return counts;
}

// sum_b (M c_b / N)^q, computed as M^q * sum c_b^q / N^q so that q = 1 returns M exactly.
inline double partition_sum_from_counts(const std::vector<long>& counts, double q, double total_mass) {
  long n = 0;
  for (long c : counts) n += c;
  if (n == 0) return 0.0;
  double s = 0.0;
  for (long c : counts) s += std::pow(static_cast<double>(c), q);
  return std::pow(total_mass, q) * (s / std::pow(static_cast<double>(n), q));
}

inline double partition_sum(const SampleCloud& cloud, double h, double q, double total_mass) {
  return partition_sum_from_counts(box_counts(cloud, h), q, total_mass);
}

struct ScalingFit {
  double q = 0.0;
  std::vector<double> h;
  std::vector<double> S;
  double slope = 0.0;  // tau_emp(q)
  double intercept = 0.0;
  double stderr_slope = 0.0;
};

namespace detail {

inline void check_scales(const std::vector<double>& h_list) {
  if (h_list.size() < 3) throw InsufficientScales("need at least 3 scales");
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (double h : h_list) {
    if (!(h > 0.0)) throw InsufficientScales("scales must be > 0");
    lo = std::min(lo, h);
    hi = std::max(hi, h);
  }
  if (hi / lo < 4.0) throw InsufficientScales("scales must span at least two octaves");
}

}  // namespace detail

inline ScalingFit fit_scaling(const SampleCloud& cloud, double q, const std::vector<double>& h_list,
                              double total_mass) {
  detail::check_scales(h_list);
  ScalingFit fit;
  fit.q = q;
  for (double h : h_list) {
    fit.h.push_back(h);
    fit.S.push_back(partition_sum(cloud, h, q, total_mass));
  }
  const std::size_t n = fit.h.size();
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += std::log(fit.h[i]);
    my += std::log(fit.S[i]);
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = std::log(fit.h[i]) - mx;
    sxx += dx * dx;
    sxy += dx * (std::log(fit.S[i]) - my);
  }
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double rss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = std::log(fit.S[i]) - (fit.intercept + fit.slope * std::log(fit.h[i]));
    rss += e * e;
  }
  fit.stderr_slope = std::sqrt(rss / static_cast<double>(n - 2) / sxx);
  return fit;
}

// Largest admissible scale: the smallest first-level cell side.
inline double smallest_first_level_cell(const Gifs& g) {
  double best = std::numeric_limits<double>::infinity();
  for (const Edge& e : g.edges) {
    const Box& b = g.reference_boxes[e.dst];
    best = std::min(best, e.map.ratio * (b.hi - b.lo).minCoeff());
  }
  return best;
}

inline ScalingFit estimate_tau(const Gifs& g, double q, const std::vector<double>& h_list, long n_per_vertex,
                               std::uint64_t seed, double depth_eps = 1e-9, int threads = 0) {
  detail::check_scales(h_list);
  const double cell = smallest_first_level_cell(g);
  for (double h : h_list)
    if (!(h < cell)) throw InsufficientScales("scale above the smallest first-level cell size");
  SampleCloud cloud = sample(g, n_per_vertex, seed, depth_eps, threads);
  return fit_scaling(cloud, q, h_list, static_cast<double>(g.num_vertices));
}

inline void write_cloud_csv(std::ostream& os, const SampleCloud& c) {
  os << (c.dim == 1 ? "x,vertex\n" : "x,y,vertex\n");
  char buf[40];
  for (std::size_t i = 0; i < c.size(); ++i) {
    for (int d = 0; d < c.dim; ++d) {
      std::snprintf(buf, sizeof buf, "%.17g,", c.coords[i * c.dim + d]);
      os << buf;
    }
    os << c.source_vertex[i] + 1 << '\n';
  }
}

inline void write_fit_csv(std::ostream& os, const ScalingFit& f) {
  os << "h,S_q\n";
  char buf[80];
  for (std::size_t i = 0; i < f.h.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", f.h[i], f.S[i]);
    os << buf;
  }
}

}  // namespace lqspec
