#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "lqspec/errors.hpp"
#include "lqspec/matrix_spec.hpp"
#include "lqspec/spectral.hpp"

namespace lqspec {

struct TauResult {
  double alpha = 0.0;
  ClassificationResult classification;
};

inline TauResult tau(const MeasureMatrixSpec& spec, double q,
                     const std::vector<std::optional<double>>& hints = {}) {
  if (!(q >= 0.0)) throw InvalidParams("q must be >= 0");
  ClassDecomposition dec = communication_classes(spec);
  auto roots = class_roots(spec, dec, q, hints);
  TauResult r;
  r.classification = classify_with_roots(spec, std::move(dec), std::move(roots));
  r.alpha = r.classification.tau;
  if (!std::isfinite(r.alpha)) throw DegenerateClass("no class with a cycle");
  return r;
}

struct SpectrumCurve {
  std::vector<double> q;
  std::vector<double> alpha;
  std::vector<std::vector<std::optional<double>>> class_roots;
  std::map<std::string, std::string> metadata;
};

inline SpectrumCurve tau_curve(const MeasureMatrixSpec& spec, double q_min, double q_max, int steps) {
  if (!(q_min >= 0.0)) throw InvalidGrid("q_min must be >= 0");
  if (!(q_min < q_max)) throw InvalidGrid("q_min must be < q_max");
  if (steps < 2) throw InvalidGrid("steps must be >= 2");
  SpectrumCurve c;
  std::vector<std::optional<double>> hints;
  for (int i = 0; i < steps; ++i) {
    // Endpoints are exact so they match standalone tau calls.
    const double q = i == steps - 1 ? q_max : q_min + (q_max - q_min) * i / (steps - 1);
    TauResult t = tau(spec, q, hints);
    hints = t.classification.roots;
    c.q.push_back(q);
    c.alpha.push_back(t.alpha);
    c.class_roots.push_back(t.classification.roots);
  }
  c.metadata["root_tol"] = "2^-40";
  c.metadata["radius_tol"] = "1e-13";
  c.metadata["series_rel_tol"] = "1e-12";
  return c;
}

inline double tau_prime_fd(const MeasureMatrixSpec& spec, double q, double step = 1e-4) {
  if (!(step > 0.0)) throw InvalidParams("derivative step must be > 0");
  if (!(q - step >= 0.0)) throw InvalidParams("q - step must be >= 0");
  return (tau(spec, q + step).alpha - tau(spec, q - step).alpha) / (2.0 * step);
}

struct LegendreCurve {
  std::vector<double> alpha;
  std::vector<double> f;
  std::vector<double> q_conj;
  bool degenerate = false;
};

// f(a) = min_q (q a - tau(q)) over the curve's grid, for a spanning the range of chord slopes.
inline LegendreCurve legendre(const SpectrumCurve& curve, int points = 0) {
  if (curve.q.empty()) throw InvalidGrid("empty curve");
  const std::size_t n = curve.q.size();
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double s = (curve.alpha[i + 1] - curve.alpha[i]) / (curve.q[i + 1] - curve.q[i]);
    lo = std::min(lo, s);
    hi = std::max(hi, s);
  }
  LegendreCurve out;
  auto conj = [&](double a) {
    std::size_t best = 0;
    double fbest = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      const double v = curve.q[i] * a - curve.alpha[i];
      if (v < fbest) {
        fbest = v;
        best = i;
      }
    }
    out.alpha.push_back(a);
    out.f.push_back(fbest);
    out.q_conj.push_back(curve.q[best]);
  };
  if (n == 1) {
    out.degenerate = true;
    conj(0.0);
    return out;
  }
  if (!(hi > lo)) {
    out.degenerate = true;
    conj(lo);
    return out;
  }
  const int m = points > 1 ? points : static_cast<int>(std::max<std::size_t>(n, 2));
  for (int j = 0; j < m; ++j) conj(j == m - 1 ? hi : lo + (hi - lo) * j / (m - 1));
  return out;
}

// 17 significant digits round-trip every double.
inline std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline void write_curve_csv(std::ostream& os, const SpectrumCurve& c) {
  os << "q,alpha\n";
  for (std::size_t i = 0; i < c.q.size(); ++i) os << format_double(c.q[i]) << ',' << format_double(c.alpha[i]) << '\n';
}

inline void write_legendre_csv(std::ostream& os, const LegendreCurve& l) {
  os << "alpha,f,q_conj\n";
  for (std::size_t i = 0; i < l.alpha.size(); ++i)
    os << format_double(l.alpha[i]) << ',' << format_double(l.f[i]) << ',' << format_double(l.q_conj[i]) << '\n';
}

}  // namespace lqspec
