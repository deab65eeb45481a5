#include <catch_amalgamated.hpp>

#include <cmath>
#include <cstdlib>
#include <random>
#include <sstream>

#include "lqspec/solver.hpp"

using namespace lqspec;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

MeasureMatrixSpec family_spec(FamilyId id) { return build_family_matrix(canonical_params(id)).spec; }

SpectrumCurve synthetic_curve(double q_min, double q_max, int steps, double (*tau_fn)(double)) {
  SpectrumCurve c;
  for (int i = 0; i < steps; ++i) {
    const double q = q_min + (q_max - q_min) * i / (steps - 1);
    c.q.push_back(q);
    c.alpha.push_back(tau_fn(q));
  }
  return c;
}

std::vector<std::vector<double>> parse_csv(const std::string& text, std::string& header) {
  std::istringstream in(text);
  std::getline(in, header);
  std::vector<std::vector<double>> rows;
  for (std::string line; std::getline(in, line);) {
    std::vector<double> row;
    std::istringstream ls(line);
    for (std::string cell; std::getline(ls, cell, ',');) row.push_back(std::strtod(cell.c_str(), nullptr));
    rows.push_back(row);
  }
  return rows;
}

}  // namespace

TEST_CASE("tau at q = 1 vanishes", "[solver]") {
  CHECK_THAT(tau(family_spec(FamilyId::StrongR), 1.0).alpha, WithinAbs(0.0, 1e-9));
  CHECK_THAT(tau(family_spec(FamilyId::NonstrongRBasic), 1.0).alpha, WithinAbs(0.0, 1e-9));
}

// Reference values from an independent prototype (separate series summation
// and bisection), frozen here.
TEST_CASE("tau golden values", "[solver]") {
  CHECK_THAT(tau(family_spec(FamilyId::StrongR), 2.0).alpha, WithinAbs(0.675679779315487, 1e-11));
  CHECK_THAT(tau(family_spec(FamilyId::StrongR), 5.0).alpha, WithinAbs(2.552705085850448, 1e-11));
  CHECK_THAT(tau(family_spec(FamilyId::StrongR2), 0.0).alpha, WithinAbs(-1.390837943209135, 1e-11));
  CHECK_THAT(tau(family_spec(FamilyId::NonstrongRBasic), 0.0).alpha, WithinAbs(-0.797011579834816, 1e-11));
  CHECK_THAT(tau(family_spec(FamilyId::NonstrongR2), 2.0).alpha, WithinAbs(1.037897674603755, 1e-11));
}

TEST_CASE("tau rejects negative q", "[solver]") {
  CHECK_THROWS_AS(tau(family_spec(FamilyId::StrongR), -1.0), InvalidParams);
  CHECK_THROWS_WITH(tau(family_spec(FamilyId::StrongR), -1.0), "q must be >= 0");
}

TEST_CASE("tau at q = 1 vanishes for random probabilities", "[solver][property]") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(0.05, 1.0);
  for (const auto& [id, name] : family_names())
    for (int trial = 0; trial < 10; ++trial) {
      FamilyParams fp = canonical_params(id);
      Gifs g = build_example(fp);
      std::vector<double> total(g.num_vertices, 0.0);
      for (const Edge& e : g.edges) total[e.src] += (fp.probs[e.id] = u(rng));
      for (const Edge& e : g.edges) fp.probs[e.id] /= total[e.src];
      INFO(name << " trial " << trial);
      REQUIRE_THAT(tau(build_family_matrix(fp).spec, 1.0).alpha, WithinAbs(0.0, 1e-9));
    }
}

TEST_CASE("curve endpoints reproduce standalone tau bit for bit", "[solver]") {
  for (const auto& [id, name] : family_names()) {
    const MeasureMatrixSpec spec = family_spec(id);
    SpectrumCurve c = tau_curve(spec, 0.3, 4.7, 2);
    INFO(name);
    CHECK(c.alpha[0] == tau(spec, 0.3).alpha);
    CHECK(c.alpha[1] == tau(spec, 4.7).alpha);
    SpectrumCurve fine = tau_curve(spec, 0.0, 2.0, 9);
    CHECK(fine.alpha[4] == tau(spec, 1.0).alpha);
    CHECK(fine.q.back() == 2.0);
  }
}

TEST_CASE("tau_curve rejects bad grids", "[solver]") {
  const MeasureMatrixSpec spec = family_spec(FamilyId::StrongR);
  CHECK_THROWS_AS(tau_curve(spec, 1.0, 1.0, 5), InvalidGrid);
  CHECK_THROWS_AS(tau_curve(spec, 2.0, 1.0, 5), InvalidGrid);
  CHECK_THROWS_AS(tau_curve(spec, 0.0, 1.0, 1), InvalidGrid);
  CHECK_THROWS_AS(tau_curve(spec, -1.0, 1.0, 5), InvalidGrid);
}

TEST_CASE("tau is nondecreasing and concave", "[solver][property]") {
  for (const auto& [id, name] : family_names()) {
    SpectrumCurve c = tau_curve(family_spec(id), 0.0, 10.0, 41);
    INFO(name);
    for (std::size_t i = 0; i + 1 < c.q.size(); ++i) REQUIRE(c.alpha[i + 1] - c.alpha[i] >= -1e-9);
    for (std::size_t i = 0; i + 2 < c.q.size(); ++i)
      REQUIRE(c.alpha[i + 2] - 2.0 * c.alpha[i + 1] + c.alpha[i] <= 1e-9);
  }
}

TEST_CASE("finite-difference derivative", "[solver]") {
  MeasureMatrixSpec one(1, 1);
  one.add(0, 0, AtomFamily::atom(0.5, 0.5));
  CHECK_THAT(tau_prime_fd(one, 2.0), WithinAbs(1.0, 1e-8));
  MeasureMatrixSpec other(1, 1);
  other.add(0, 0, AtomFamily::atom(0.2, 0.5));
  CHECK_THAT(tau_prime_fd(other, 1.0), WithinRel(std::log(0.2) / std::log(0.5), 1e-7));
  CHECK_THROWS_AS(tau_prime_fd(one, 0.0), InvalidParams);
  CHECK_THROWS_AS(tau_prime_fd(one, 5e-5), InvalidParams);
}

TEST_CASE("Legendre transform of simple curves", "[solver]") {
  LegendreCurve lin = legendre(synthetic_curve(0.0, 10.0, 101, [](double q) { return q - 1.0; }));
  REQUIRE(lin.alpha.size() >= 1);
  CHECK_THAT(lin.alpha[0], WithinAbs(1.0, 1e-12));
  CHECK_THAT(lin.f[0], WithinAbs(1.0, 1e-12));

  // tau = -q^2 is concave with conjugate inf_q (q a + q^2) = -a^2/4 for a in [-20, 0].
  LegendreCurve quad = legendre(synthetic_curve(0.0, 10.0, 1001, [](double q) { return -q * q; }), 200);
  CHECK_FALSE(quad.degenerate);
  for (std::size_t j = 0; j < quad.alpha.size(); ++j) {
    const double a = quad.alpha[j];
    CHECK(a >= -20.0);
    CHECK(a <= 0.0);
    CHECK_THAT(quad.f[j], WithinAbs(-a * a / 4.0, 1e-3));
    CHECK_THAT(quad.q_conj[j], WithinAbs(-a / 2.0, 0.011));
  }

  SpectrumCurve single;
  single.q = {2.0};
  single.alpha = {0.5};
  LegendreCurve s = legendre(single);
  CHECK(s.degenerate);
  CHECK(s.alpha.size() == 1);
  CHECK_THROWS_AS(legendre(SpectrumCurve{}), InvalidGrid);
}

TEST_CASE("Legendre transform of a family spectrum is concave", "[solver][property]") {
  SpectrumCurve c = tau_curve(family_spec(FamilyId::StrongR), 0.0, 10.0, 51);
  LegendreCurve l = legendre(c, 101);
  for (std::size_t j = 0; j + 2 < l.f.size(); ++j) REQUIRE(l.f[j + 2] - 2.0 * l.f[j + 1] + l.f[j] <= 1e-9);
  // Fenchel inequality f(a) + tau(q) <= q a on the whole grid.
  for (std::size_t j = 0; j < l.f.size(); ++j)
    for (std::size_t i = 0; i < c.q.size(); ++i) REQUIRE(l.f[j] + c.alpha[i] <= c.q[i] * l.alpha[j] + 1e-12);
}

TEST_CASE("CSV output parses back to the same doubles", "[solver]") {
  SpectrumCurve c = tau_curve(family_spec(FamilyId::StrongR2), 0.0, 3.0, 7);
  std::ostringstream out;
  write_curve_csv(out, c);
  std::string header;
  auto rows = parse_csv(out.str(), header);
  CHECK(header == "q,alpha");
  REQUIRE(rows.size() == c.q.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(rows[i][0] == c.q[i]);
    CHECK(rows[i][1] == c.alpha[i]);
  }

  LegendreCurve l = legendre(c, 11);
  std::ostringstream lo;
  write_legendre_csv(lo, l);
  auto lrows = parse_csv(lo.str(), header);
  CHECK(header == "alpha,f,q_conj");
  REQUIRE(lrows.size() == l.alpha.size());
  for (std::size_t i = 0; i < lrows.size(); ++i) {
    CHECK(lrows[i][0] == l.alpha[i]);
    CHECK(lrows[i][1] == l.f[i]);
    CHECK(lrows[i][2] == l.q_conj[i]);
  }
  for (double x : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23}) CHECK(std::strtod(format_double(x).c_str(), nullptr) == x);
}
