#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "lqspec/errors.hpp"
#include "lqspec/gifs_model.hpp"
#include "lqspec/matrix_spec.hpp"
#include "lqspec/spectral.hpp"

namespace lqspec {

// Value together with its partial derivatives in q and alpha.
struct Dual {
  double v = 0.0, dq = 0.0, da = 0.0;
};

inline Dual operator+(Dual a, Dual b) { return {a.v + b.v, a.dq + b.dq, a.da + b.da}; }
inline Dual operator-(Dual a, Dual b) { return {a.v - b.v, a.dq - b.dq, a.da - b.da}; }
inline Dual operator-(Dual a) { return {-a.v, -a.dq, -a.da}; }
inline Dual operator*(Dual a, Dual b) { return {a.v * b.v, a.dq * b.v + a.v * b.dq, a.da * b.v + a.v * b.da}; }
inline Dual operator-(double c, Dual a) { return {c - a.v, -a.dq, -a.da}; }

// p^q s^{-alpha}
inline Dual q_term(double p, double s, double q, double alpha) {
  const double lp = std::log(p), ls = std::log(s);
  const double v = std::exp(q * lp - alpha * ls);
  return {v, v * lp, -v * ls};
}

inline Dual series_term(const AtomFamily& f, double q, double alpha) {
  SeriesValue s = family_value(f, q, alpha);
  return {s.value, s.d_q, s.d_alpha};
}

// Sum of p^q s^{-alpha} over a group; the factor is negative once a group reaches 1.
struct Guard {
  std::vector<std::pair<double, double>> terms;  // (p, s)
};

struct Factor {
  std::string name;
  int representative = 0;  // matrix index inside the class this factor describes
  std::function<Dual(double, double)> eval;
  std::vector<Guard> guards;
  std::vector<AtomFamily> series;
};

struct VerbatimDerivative {
  double value = 0.0;
  std::string note;
};

struct ClosedFormFamily {
  FamilyId id = FamilyId::StrongR;
  FamilyParams params;
  std::function<Dual(double, double)> H;
  std::vector<Factor> factors;
  // Printed tau' display evaluated at (q, alpha); nullopt when its denominator vanishes.
  std::function<std::optional<VerbatimDerivative>(double, double)> verbatim;
};

namespace detail {

inline double guard_root(const Guard& g, double q) {
  auto sum = [&](double alpha) {
    double s = 0.0;
    for (auto [p, r] : g.terms) s += std::exp(q * std::log(p) - alpha * std::log(r));
    return s;
  };
  double hi = std::numeric_limits<double>::infinity();
  for (auto [p, r] : g.terms) hi = std::min(hi, q * std::log(p) / std::log(r));
  double step = 1.0, lo = hi - step;
  while (sum(lo) >= 1.0) {
    step *= 2.0;
    lo = hi - step;
  }
  return dyadic_bisect([&](double a) { return sum(a) >= 1.0; }, lo, hi);
}

inline double series_bound(const AtomFamily& f, double q) {
  if (!f.infinite()) return std::numeric_limits<double>::infinity();
  return q * std::log(f.weight.growth_base()) / std::log(f.step_ratio);
}

}  // namespace detail

// Largest alpha below which the factor is evaluated; the factor is negative there.
inline double factor_cap(const Factor& f, double q) {
  double cap = std::numeric_limits<double>::infinity();
  for (const Guard& g : f.guards) cap = std::min(cap, detail::guard_root(g, q));
  for (const AtomFamily& s : f.series) cap = std::min(cap, detail::series_bound(s, q));
  return cap;
}

// First zero of the factor coming from alpha = -infinity.
inline double factor_root(const Factor& f, double q) {
  const double cap = factor_cap(f, q);
  if (!std::isfinite(cap)) throw NoBracket("factor " + f.name + " has no finite cap");
  auto above = [&](double alpha) {
    if (!(alpha < cap)) return true;
    try {
      return f.eval(q, alpha).v <= 0.0;
    } catch (const DomainViolation&) {
      return true;
    }
  };
  double step = 1.0, lo = cap - step;
  while (above(lo)) {
    step *= 2.0;
    lo = cap - step;
    if (step > 1e6) throw NoBracket("factor " + f.name + " does not become positive");
  }
  constexpr int kScan = 64;
  double prev = lo, hi = cap;
  for (int i = 1; i <= kScan; ++i) {
    const double x = lo + (cap - lo) * i / kScan;
    if (above(x)) {
      hi = x;
      break;
    }
    prev = x;
  }
  return dyadic_bisect(above, prev, hi);
}

inline double H_eval(const ClosedFormFamily& fam, double q, double alpha) { return fam.H(q, alpha).v; }

struct HSolution {
  std::vector<double> roots;  // one per factor
  double tau = 0.0;
  int attaining = 0;  // first factor whose root equals tau
};

inline HSolution solve_H(const ClosedFormFamily& fam, double q) {
  if (!(q >= 0.0)) throw InvalidParams("q must be >= 0");
  HSolution s;
  s.tau = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < fam.factors.size(); ++i) {
    s.roots.push_back(factor_root(fam.factors[i], q));
    if (s.roots.back() < s.tau) {
      s.tau = s.roots.back();
      s.attaining = static_cast<int>(i);
    }
  }
  return s;
}

struct DerivativeReport {
  double q = 0.0;
  double tau = 0.0;
  int factor = 0;
  double termwise = 0.0;  // -f_q / f_alpha of the attaining factor
  double H_q = 0.0, H_alpha = 0.0;
  std::optional<double> verbatim;
  std::string verbatim_note;
  std::optional<double> discrepancy;  // |verbatim - termwise| / |termwise|
};

inline DerivativeReport tau_prime_closed(const ClosedFormFamily& fam, double q) {
  HSolution s = solve_H(fam, q);
  DerivativeReport r;
  r.q = q;
  r.tau = s.tau;
  r.factor = s.attaining;
  const Dual f = fam.factors[s.attaining].eval(q, s.tau);
  if (!(std::abs(f.da) > 1e-12)) throw SingularHalpha("H_alpha vanishes at q=" + std::to_string(q));
  r.termwise = -f.dq / f.da;
  const Dual h = fam.H(q, s.tau);
  r.H_q = h.dq;
  r.H_alpha = h.da;
  if (fam.verbatim) {
    if (auto vd = fam.verbatim(q, s.tau)) {
      r.verbatim = vd->value;
      r.verbatim_note = vd->note;
      r.discrepancy = std::abs(vd->value - r.termwise) / std::max(std::abs(r.termwise), 1e-300);
    } else {
      r.verbatim_note = "printed display has a vanishing denominator at this root";
    }
  }
  return r;
}

// ---------------------------------------------------------------------------
// Family definitions

namespace detail {

inline std::optional<VerbatimDerivative> ratio(double num, double den, std::string note = {}) {
  if (!(std::abs(den) > 1e-12) || !std::isfinite(num / den)) return std::nullopt;
  return VerbatimDerivative{num / den, std::move(note)};
}

inline ClosedFormFamily strong_r_family(const FamilyParams& fp) {
  ClosedFormFamily fam;
  const double rho = fp.rho, r = fp.r;
  const double p1 = fp.p(1), p2 = fp.p(2), p3 = fp.p(3), p4 = fp.p(4), p5 = fp.p(5);
  const double p1325 = p1 * p3 + p2 * p5;
  auto H = [=](double q, double a) {
    const Dual Q1 = q_term(p1, rho, q, a), Q5 = q_term(p5, rho, q, a);
    const Dual Q2 = q_term(p2, r, q, a), Q3 = q_term(p3, r, q, a), Q4 = q_term(p4, r, q, a);
    const Dual Q1325 = q_term(p1325, rho * r, q, a);
    return (1.0 - Q4) * ((1.0 - Q1) * (1.0 - Q3) - Q1325) - Q2 * Q4 * Q5;
  };
  fam.H = H;
  fam.factors.push_back({"H", 0, H, {{{{p1, rho}}}, {{{p3, r}}}, {{{p4, r}}}}, {}});
  fam.verbatim = [=](double q, double a) {
    auto Q = [&](double p, double s) { return std::pow(p, q) * std::pow(s, -a); };
    const double Q1 = Q(p1, rho), Q5 = Q(p5, rho), Q2 = Q(p2, r), Q3 = Q(p3, r), Q4 = Q(p4, r);
    const double Q1325 = Q(p1325, rho * r);
    const double B1 = 1 - Q1, B3 = 1 - Q3, B4 = 1 - Q4;
    const double num = Q4 * std::log(p4) * (B1 * B3 - Q1325) + Q2 * Q4 * Q5 * std::log(p2 * p4 * p5) +
                       B4 * (Q1 * B3 * std::log(p1) + Q3 * B1 * std::log(p3) + Q1325 * std::log(p1325));
    const double den = Q4 * std::log(r) * (B1 * B3 - Q1325) + Q2 * Q4 * Q5 * std::log(rho * r * r) +
                       B4 * (Q1 * B3 * std::log(rho) + Q3 * B1 * std::log(r) + Q1325 * std::log(rho * r));
    return ratio(num, den);
  };
  return fam;
}

inline ClosedFormFamily strong_r2_family(const FamilyParams& fp) {
  ClosedFormFamily fam;
  const double g = kGoldenRho, g2 = g * g;
  double p[9];
  for (int i = 1; i <= 8; ++i) p[i] = fp.p(i);
  const AtomFamily w = AtomFamily::series(WeightSequence::binomial(p[4], p[1], p[8]), g2, g2);
  auto H = [=](double q, double a) {
    Dual Q[9];
    for (int i : {1, 2, 3, 5, 6, 7, 8}) Q[i] = q_term(p[i], g2, q, a);
    const Dual W = series_term(w, q, a);
    return (1.0 - (Q[7] + Q[8])) * (1.0 - (Q[1] + Q[2] + Q[3])) -
           (1.0 - Q[1]) * (1.0 - Q[8]) * (Q[5] + Q[6]) * W;
  };
  fam.H = H;
  fam.factors.push_back(
      {"H", 0, H, {{{{p[7], g2}, {p[8], g2}}}, {{{p[1], g2}, {p[2], g2}, {p[3], g2}}}}, {w}});
  // Printed display with (k+2) moved inside the series and the trailing (1/2) ln(rho) kept.
  fam.verbatim = [=](double q, double a) -> std::optional<VerbatimDerivative> {
    double Q[9];
    for (int i : {1, 2, 3, 5, 6, 7, 8}) Q[i] = std::pow(p[i], q) * std::pow(g, -2 * a);
    const SeriesValue W = family_value(w, q, a);
    // sum (k+2) Q^w_k = sum (k+1) Q^w_k + sum Q^w_k, and d_alpha gives -2 ln(g) sum (k+1) Q^w_k
    const double sum_k1 = W.d_alpha / (-2.0 * std::log(g));
    const double sum_k2 = sum_k1 + W.value;
    const double S78 = Q[7] + Q[8], S123 = Q[1] + Q[2] + Q[3], S56 = Q[5] + Q[6];
    const double B1 = 1 - Q[1], B8 = 1 - Q[8];
    auto L = [&](int i) { return Q[i] * std::log(p[i]); };
    const double num = (L(7) + L(8)) * (1 - S123) + (1 - S78) * (L(1) + L(2) + L(3)) -
                       (L(1) * B8 + L(8) * B1) * S56 * W.value +
                       B1 * B8 * ((L(5) + L(6)) * W.value + S56 * W.d_q);
    const double den = B1 * B8 * S56 * sum_k2 + S78 * (1 - S123) + (1 - S78) * S123 -
                       (Q[1] * B8 + Q[8] * B1) * S56 * W.value;
    auto out = ratio(num, den, "(k+2) placed inside the series; trailing factor (1/2) ln(rho) as printed");
    if (out) out->value *= 0.5 * std::log(g);
    return out;
  };
  return fam;
}

inline ClosedFormFamily nonstrong_r_basic_family(const FamilyParams& fp) {
  ClosedFormFamily fam;
  const double rho = fp.rho, r = fp.r;
  const double p2 = fp.p(2), p3 = fp.p(3), p4 = fp.p(4);
  const AtomFamily w = AtomFamily::series(WeightSequence::binomial(fp.p(1), p2, p3), rho, r);
  auto X = [=](double q, double a) {
    const Dual Q2 = q_term(p2, r, q, a), Q3 = q_term(p3, r, q, a);
    return (1.0 - Q2) * (1.0 - Q3) * (1.0 - series_term(w, q, a)) - Q2 * Q3;
  };
  auto Y = [=](double q, double a) { return 1.0 - q_term(p4, r, q, a); };
  fam.H = [=](double q, double a) { return X(q, a) * Y(q, a); };
  fam.factors.push_back({"X", 0, X, {{{{p2, r}}}, {{{p3, r}}}}, {w}});
  fam.factors.push_back({"Q4bar", 3, Y, {{{{p4, r}}}}, {}});
  fam.verbatim = [=](double q, double a) {
    auto Q = [&](double p) { return std::pow(p, q) * std::pow(r, -a); };
    const double Q2 = Q(p2), Q3 = Q(p3), Q4 = Q(p4);
    const SeriesValue W = family_value(w, q, a);
    const double sum_len = -W.d_alpha;  // sum Q^w_k ln(rho r^k)
    const double B2 = 1 - Q2, B3 = 1 - Q3, B4 = 1 - Q4;
    const double lr = std::log(r);
    const double xv = B2 * B3 * (1 - W.value) - Q2 * Q3;
    const double num = xv * Q4 * std::log(p4) +
                       ((Q2 * B3 * std::log(p2) + Q3 * B2 * std::log(p3)) * (1 - W.value) + B2 * B3 * W.d_q +
                        Q2 * Q3 * std::log(p2 * p3)) *
                           B4;
    const double den =
        xv * Q4 * lr + ((Q2 * B3 * lr + Q3 * B2 * lr) * (1 - W.value) + B2 * B3 * sum_len + 2 * Q2 * Q3 * lr) * B4;
    return ratio(num, den);
  };
  return fam;
}

inline ClosedFormFamily nonstrong_r_heights_family(const FamilyParams& fp) {
  ClosedFormFamily fam;
  const double rho = fp.rho, r = fp.r;
  double p[18];
  for (int i = 1; i <= 17; ++i) p[i] = fp.p(i);
  const AtomFamily w1 = AtomFamily::series(WeightSequence::binomial(p[1], p[2], p[3]), rho, r);
  const AtomFamily w3 = AtomFamily::series(WeightSequence::binomial(p[7], p[8], p[9]), rho, r);
  auto Q = [=](int i, double q, double a) { return q_term(p[i], r, q, a); };
  auto with_series = [=](int i, int j, const AtomFamily& w) {
    return [=](double q, double a) {
      const Dual Qi = Q(i, q, a), Qj = Q(j, q, a);
      return 1.0 - (Qi + Qj) - (1.0 - Qi) * (1.0 - Qj) * series_term(w, q, a);
    };
  };
  auto pair = [=](int i, int j) {
    return [=](double q, double a) { return 1.0 - (Q(i, q, a) + Q(j, q, a)); };
  };
  auto single = [=](int i) { return [=](double q, double a) { return 1.0 - Q(i, q, a); }; };
  auto guard2 = [&](int i, int j) { return std::vector<Guard>{{{{p[i], r}, {p[j], r}}}}; };
  fam.factors.push_back({"A", 0, with_series(2, 3, w1), guard2(2, 3), {w1}});
  fam.factors.push_back({"B", 2, pair(5, 6), guard2(5, 6), {}});
  fam.factors.push_back({"C", 4, with_series(8, 9, w3), guard2(8, 9), {w3}});
  fam.factors.push_back({"D", 6, pair(11, 12), guard2(11, 12), {}});
  fam.factors.push_back({"E", 8, pair(14, 15), guard2(14, 15), {}});
  fam.factors.push_back({"F", 11, single(17), {{{{p[17], r}}}}, {}});
  const auto factors = fam.factors;
  fam.H = [factors](double q, double a) {
    Dual h{1.0, 0.0, 0.0};
    for (const Factor& f : factors) h = h * f.eval(q, a);
    return h;
  };
  // Printed H_q and H_alpha displays, term for term.
  fam.verbatim = [=](double q, double a) {
    double Qv[18];
    for (int i = 1; i <= 17; ++i) Qv[i] = std::pow(p[i], q) * std::pow(r, -a);
    auto B = [&](int i) { return 1 - Qv[i]; };
    auto lp = [&](int i) { return std::log(p[i]); };
    const double lr = std::log(r);
    const SeriesValue W1 = family_value(w1, q, a), W3 = family_value(w3, q, a);
    const double A = 1 - (Qv[2] + Qv[3]) - B(2) * B(3) * W1.value;
    const double Bf = 1 - (Qv[5] + Qv[6]);
    const double C = 1 - (Qv[8] + Qv[9]) - B(8) * B(9) * W3.value;
    const double D = 1 - (Qv[11] + Qv[12]);
    const double E = 1 - (Qv[14] + Qv[15]);
    const double F = B(17);
    const double Hq =
        (B(2) * B(3) * W1.d_q + (Qv[2] * B(3) * lp(2) + Qv[3] * B(2) * lp(3)) * W1.value -
         (Qv[2] * lp(2) + Qv[3] * lp(3))) *
            Bf * C * D * E * F -
        A * (Qv[5] * lp(5) + Qv[6] * lp(6)) * C * D * E * F -
        A * Bf *
            ((Qv[8] * lp(8) + Qv[9] * lp(9)) - B(8) * B(9) * W3.d_q -
             (Qv[8] * B(9) * lp(8) + Qv[9] * B(8) * lp(9)) * W3.value) *
            D * E * F -
        A * Bf * C *
            ((Qv[11] * lp(11) + Qv[12] * lp(12)) * E * F +
             D * ((Qv[14] * lp(14) + Qv[15] * lp(15)) * F + E * Qv[17]));
    const double Ha =
        (B(2) * B(3) * (-W1.d_alpha) - (Qv[2] * lr * B(3) + Qv[3] * lr * B(2)) * W1.value +
         (Qv[2] + Qv[3]) * lr) *
            Bf * C * D * E * F +
        A * ((Qv[5] + Qv[6]) * lr) * C * D * E * F +
        A * Bf *
            ((Qv[8] + Qv[9]) * lr - lr * (Qv[8] * B(9) + Qv[9] * B(8)) * W3.value +
             B(8) * B(9) * (-W3.d_alpha)) *
            D * E * F +
        A * Bf * C *
            ((Qv[11] + Qv[12]) * lr * E * F + D * ((Qv[14] + Qv[15]) * lr * Qv[17] + E * (Qv[17] * lr)));
    return ratio(-Hq, Ha, "printed H_q / H_alpha");
  };
  return fam;
}

inline ClosedFormFamily nonstrong_r2_family(const FamilyParams& fp) {
  ClosedFormFamily fam;
  const double rho = fp.rho, r = fp.r, t = fp.t;
  double p[8];
  for (int i = 1; i <= 7; ++i) p[i] = fp.p(i);
  const AtomFamily w = AtomFamily::series(WeightSequence::binomial(p[4], p[5], p[6]), rho, r);
  auto X = [=](double q, double a) { return 1.0 - q_term(p[2], t, q, a) - q_term(p[3], 1.0 - t, q, a); };
  auto Y = [=](double q, double a) {
    const Dual Q5 = q_term(p[5], r, q, a), Q6 = q_term(p[6], r, q, a), Q7 = q_term(p[7], r, q, a);
    return 1.0 - (Q5 + Q6 + Q7) - (1.0 - Q5) * (1.0 - Q6) * series_term(w, q, a);
  };
  fam.H = [=](double q, double a) { return X(q, a) * Y(q, a); };
  fam.factors.push_back({"X", 1, X, {{{{p[2], t}, {p[3], 1.0 - t}}}}, {}});
  fam.factors.push_back({"Y", 3, Y, {{{{p[5], r}, {p[6], r}, {p[7], r}}}}, {w}});
  fam.verbatim = [=](double q, double a) {
    const double Q2 = std::pow(p[2], q) * std::pow(t, -a), Q3 = std::pow(p[3], q) * std::pow(1 - t, -a);
    double Q[8];
    for (int i : {5, 6, 7}) Q[i] = std::pow(p[i], q) * std::pow(r, -a);
    const SeriesValue W = family_value(w, q, a);
    const double lr = std::log(r);
    const double xv = 1 - Q2 - Q3;
    const double yv = 1 - (Q[5] + Q[6] + Q[7]) - (1 - Q[5]) * (1 - Q[6]) * W.value;
    const double num =
        (Q2 * std::log(p[2]) + Q3 * std::log(p[3])) * yv +
        ((Q[5] * std::log(p[5]) + Q[6] * std::log(p[6]) + Q[7] * std::log(p[7])) -
         (Q[5] * std::log(p[5]) * (1 - Q[6]) + Q[6] * std::log(p[6]) * (1 - Q[5])) * W.value +
         (1 - Q[5]) * (1 - Q[6]) * W.d_q) *
            xv;
    const double den = (Q2 * std::log(t) + Q3 * std::log(1 - t)) * yv +
                       ((Q[5] + Q[6] + Q[7]) * lr - (Q[5] * lr * (1 - Q[6]) + Q[6] * lr * (1 - Q[5])) * W.value +
                        (1 - Q[5]) * (1 - Q[6]) * (-W.d_alpha)) *
                           xv;
    return ratio(num, den);
  };
  return fam;
}

}  // namespace detail

inline ClosedFormFamily make_closed_form(const FamilyParams& fp) {
  check_family_params(fp);
  ClosedFormFamily fam;
  switch (fp.family) {
    case FamilyId::StrongR: fam = detail::strong_r_family(fp); break;
    case FamilyId::StrongR2: fam = detail::strong_r2_family(fp); break;
    case FamilyId::NonstrongRBasic: fam = detail::nonstrong_r_basic_family(fp); break;
    case FamilyId::NonstrongRHeights: fam = detail::nonstrong_r_heights_family(fp); break;
    case FamilyId::NonstrongR2: fam = detail::nonstrong_r2_family(fp); break;
  }
  fam.id = fp.family;
  fam.params = fp;
  return fam;
}

// Closed-form factor roots next to the spectral root of the class each factor describes.
struct RootComparison {
  std::string factor;
  double closed_form = 0.0;
  double spectral = 0.0;
  double diff() const { return std::abs(closed_form - spectral); }
};

inline std::vector<RootComparison> compare_roots(const ClosedFormFamily& fam, const MeasureMatrixSpec& spec, double q) {
  const ClassDecomposition dec = communication_classes(spec);
  std::vector<RootComparison> out;
  for (const Factor& f : fam.factors) {
    const int c = dec.class_of[f.representative];
    out.push_back({f.name, factor_root(f, q), class_root(spec, dec, c, q)});
  }
  return out;
}

}  // namespace lqspec
