#pragma once

// Independent reference computations used by the tests. Nothing here calls the
// library's series engine, Perron iteration or graph code.

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <vector>

#include "lqspec/matrix_spec.hpp"

namespace oracle {

// w_k from its defining formula (not the library's log-space recurrence).
inline double weight(const lqspec::WeightSequence& w, long k) {
  switch (w.kind) {
    case lqspec::WeightKind::Constant: return w.c;
    case lqspec::WeightKind::GeometricPower: return w.c * std::pow(w.a, static_cast<double>(k));
    case lqspec::WeightKind::BinomialSum:
      if (w.a == w.b) return w.c * static_cast<double>(k + 1) * std::pow(w.a, static_cast<double>(k));
      return w.c * (std::pow(w.a, static_cast<double>(k + 1)) - std::pow(w.b, static_cast<double>(k + 1))) /
             (w.a - w.b);
  }
  return 0.0;
}

// Plain summation of the first `terms` atoms (all atoms for a finite family),
// accumulated from the smallest term upwards.
inline double family_sum(const lqspec::AtomFamily& f, double q, double alpha, long terms) {
  const long last = f.infinite() ? f.k_start + terms - 1 : *f.k_end;
  double s = 0.0;
  for (long k = last; k >= f.k_start; --k) {
    const double wk = weight(f.weight, k);
    if (wk <= 0.0) continue;
    const double log_len = std::log(f.base_ratio) + static_cast<double>(k) * std::log(f.step_ratio);
    s += std::exp(q * std::log(wk) - alpha * log_len);
  }
  return s;
}

inline Eigen::MatrixXd matrix(const lqspec::MeasureMatrixSpec& spec, double q, double alpha, long terms) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(spec.n, spec.n);
  for (int i = 0; i < spec.n; ++i)
    for (int j = 0; j < spec.n; ++j)
      for (const auto& f : spec.entries[i][j].families) m(i, j) += family_sum(f, q, alpha, terms);
  return m;
}

inline double radius(const Eigen::MatrixXd& m) {
  if (m.rows() == 0) return 0.0;
  Eigen::EigenSolver<Eigen::MatrixXd> es(m, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

inline Eigen::MatrixXd block(const Eigen::MatrixXd& m, const std::vector<int>& idx) {
  Eigen::MatrixXd b(idx.size(), idx.size());
  for (std::size_t a = 0; a < idx.size(); ++a)
    for (std::size_t c = 0; c < idx.size(); ++c) b(a, c) = m(idx[a], idx[c]);
  return b;
}

// Root of radius(block(alpha)) = 1 by plain bisection on [lo, hi].
inline double class_root(const lqspec::MeasureMatrixSpec& spec, const std::vector<int>& idx, double q, double lo,
                         double hi, long terms) {
  auto f = [&](double a) { return radius(block(matrix(spec, q, a, terms), idx)) - 1.0; };
  for (int it = 0; it < 100 && hi - lo > 1e-13; ++it) {
    const double mid = 0.5 * (lo + hi);
    (f(mid) >= 0.0 ? hi : lo) = mid;
  }
  return 0.5 * (lo + hi);
}

// Transitive closure by Floyd-Warshall.
inline std::vector<std::vector<bool>> reachability(const std::vector<std::vector<int>>& adj) {
  const std::size_t n = adj.size();
  std::vector<std::vector<bool>> r(n, std::vector<bool>(n, false));
  for (std::size_t i = 0; i < n; ++i)
    for (int j : adj[i]) r[i][j] = true;
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (r[i][k] && r[k][j]) r[i][j] = true;
  return r;
}

}  // namespace oracle
