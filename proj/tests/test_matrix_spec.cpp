#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "lqspec/matrix_spec.hpp"
#include "oracles.hpp"

using namespace lqspec;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("entry_value on simple entries", "[matrix_spec]") {
  EntrySpec single;
  single.families.push_back(AtomFamily::atom(1.0 / 3.0, 1.0 / 3.0));
  CHECK_THAT(entry_value(single, 1.0, 0.0), WithinRel(1.0 / 3.0, 1e-15));

  EntrySpec geo;
  geo.families.push_back(AtomFamily::series(WeightSequence::geometric(0.5, 0.5), 0.5, 0.5, 1));
  CHECK_THAT(entry_value(geo, 1.0, 0.0), WithinRel(0.5, 1e-14));

  AtomFamily bin = AtomFamily::series(WeightSequence::binomial(0.5, 1.0 / 3.0, 1.0 / 3.0), 1.0 / 3.0, 2.0 / 7.0);
  EntrySpec be;
  be.families.push_back(bin);
  CHECK_THAT(entry_value(be, 2.0, -1.0), WithinRel(oracle::family_sum(bin, 2.0, -1.0, 100000), 1e-10));

  AtomFamily bin2 = AtomFamily::series(WeightSequence::binomial(0.4, 0.3, 0.6), 0.25, 0.5, 2);
  CHECK_THAT(family_value(bin2, 1.5, 0.7).value, WithinRel(oracle::family_sum(bin2, 1.5, 0.7, 100000), 1e-10));

  CHECK(entry_value(EntrySpec{}, 1.0, 3.0) == 0.0);
}

TEST_CASE("log-space weights agree with the defining formula", "[matrix_spec]") {
  for (const WeightSequence& w : {WeightSequence::constant(0.7), WeightSequence::geometric(0.3, 0.8),
                                  WeightSequence::binomial(0.5, 0.2, 0.6), WeightSequence::binomial(0.5, 0.4, 0.4)})
    for (long k : {0L, 1L, 5L, 40L}) CHECK_THAT(std::exp(w.log_at(k)), WithinRel(oracle::weight(w, k), 1e-12));
}

TEST_CASE("series derivatives match finite differences", "[matrix_spec]") {
  const AtomFamily fams[] = {
      AtomFamily::series(WeightSequence::geometric(0.5, 0.5), 1.0 / 3.0, 2.0 / 7.0),
      AtomFamily::series(WeightSequence::binomial(0.25, 0.25, 1.0 / 3.0), 1.0 / 3.0, 2.0 / 7.0),
      AtomFamily::atom(0.4, 0.3)};
  const double h = 1e-6;
  for (const AtomFamily& f : fams) {
    const SeriesValue v = family_value(f, 1.3, 0.4);
    const double dq = (family_value(f, 1.3 + h, 0.4).value - family_value(f, 1.3 - h, 0.4).value) / (2 * h);
    const double da = (family_value(f, 1.3, 0.4 + h).value - family_value(f, 1.3, 0.4 - h).value) / (2 * h);
    CHECK_THAT(v.d_q, WithinRel(dq, 1e-7));
    CHECK_THAT(v.d_alpha, WithinRel(da, 1e-7));
  }
}

TEST_CASE("strong-r matrix at q=1, alpha=0", "[matrix_spec]") {
  FamilyMatrix fm = build_family_matrix(canonical_params(FamilyId::StrongR));
  CHECK(fm.spec.labels == std::vector<std::string>{"1", "3", "4"});
  Eigen::MatrixXd expect(3, 3);
  expect << 1.0 / 3.0, 5.0 / 9.0, 1.0 / 3.0, 0.75, 0.0, 0.0, 0.0, 0.5, 0.5;
  Eigen::MatrixXd m = matrix_at(fm.spec, 1.0, 0.0);
  CHECK((m - expect).cwiseAbs().maxCoeff() < 1e-15);
  CHECK_THAT(row_sum_F(fm.spec, 0, 1.0, 0.0), WithinRel(11.0 / 9.0, 1e-15));
}

TEST_CASE("row sums vanish as alpha decreases and on zero rows", "[matrix_spec]") {
  FamilyMatrix fm = build_family_matrix(canonical_params(FamilyId::StrongR));
  double prev = row_sum_F(fm.spec, 0, 0.0, 0.0);
  for (double a : {-5.0, -20.0, -80.0}) {
    const double f = row_sum_F(fm.spec, 0, 0.0, a);
    CHECK(f < prev);
    prev = f;
  }
  CHECK(prev < 1e-30);
  MeasureMatrixSpec zero(3, 1);
  CHECK(row_sum_F(zero, 1, 1.0, 0.0) == 0.0);
  CHECK(matrix_at(zero, 1.0, 0.0).isZero());
}

TEST_CASE("domain membership", "[matrix_spec]") {
  FamilyMatrix fm = build_family_matrix(canonical_params(FamilyId::StrongR));
  CHECK(in_domain(fm.spec, 1.0, 0.0));
  CHECK_FALSE(in_domain(fm.spec, 1.0, 2.0));
  // p3 r^{-alpha} = 1 at the boundary
  CHECK_THAT(domain_bound(fm.spec, {1}, 1.0), WithinRel(std::log(1.0 / 3.0) / std::log(2.0 / 7.0), 1e-15));
  CHECK_THROWS_AS(matrix_at(fm.spec, 1.0, 2.0), DomainViolation);

  // At large q the powers m^q and r^{-alpha} under- and overflow separately.
  CHECK(in_domain(fm.spec, 1e7, 600.0));
  CHECK_FALSE(in_domain(fm.spec, 1e7, 9e6));

  MeasureMatrixSpec atoms(2, 1);
  atoms.add(0, 1, AtomFamily::atom(0.5, 0.5));
  atoms.add(1, 0, AtomFamily::atom(0.5, 0.25));
  for (double a : {-100.0, 0.0, 100.0}) CHECK(in_domain(atoms, 1.0, a));
}

TEST_CASE("nonstrong-r-basic matrix pattern", "[matrix_spec]") {
  FamilyParams fp = canonical_params(FamilyId::NonstrongRBasic);
  FamilyMatrix fm = build_family_matrix(fp);
  Eigen::MatrixXd m = matrix_at(fm.spec, 1.0, std::vector<double>{0.0, 0.0});
  CHECK(fm.spec.scc_of == std::vector<int>{fm.spec.scc_of[0], fm.spec.scc_of[0], fm.spec.scc_of[2], fm.spec.scc_of[2]});
  CHECK(fm.spec.scc_of[0] != fm.spec.scc_of[2]);
  // Rows 3 and 4: (p5, p5, 0, 0) and (0, 0, p4, p4).
  CHECK(m(2, 0) == fp.p(5));
  CHECK(m(2, 1) == fp.p(5));
  CHECK(m(2, 2) == 0.0);
  CHECK(m(2, 3) == 0.0);
  CHECK(m(3, 2) == fp.p(4));
  CHECK(m(3, 3) == fp.p(4));
  CHECK(m.block(0, 2, 2, 2).isZero());
  CHECK(m.block(0, 0, 2, 2).minCoeff() > 0.0);
}

TEST_CASE("closed-form entries of the built families", "[matrix_spec]") {
  FamilyParams sr = canonical_params(FamilyId::StrongR);
  CHECK_THAT(matrix_at(build_family_matrix(sr).spec, 1.0, 0.0)(1, 0), WithinRel(sr.p(5) / (1 - sr.p(3)), 1e-15));

  FamilyParams r2 = canonical_params(FamilyId::StrongR2);
  r2.probs["e1"] = 0.3;
  r2.probs["e2"] = 0.2;
  FamilyMatrix f2 = build_family_matrix(r2);
  const double zeta1 = entry_value(f2.spec.entries[0][1], 1.0, 0.0);
  CHECK_THAT(zeta1, WithinRel(0.3 / 0.7, 1e-14));

  FamilyParams n2 = canonical_params(FamilyId::NonstrongR2);
  FamilyMatrix fn = build_family_matrix(n2);
  const double p5 = n2.p(5);
  CHECK_THAT(family_value(fn.spec.entries[3][4].families[0], 1.0, 0.0).value, WithinRel(p5 / (1 - p5), 1e-14));
}

TEST_CASE("infinite entries match brute-force summation", "[matrix_spec][property]") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (const auto& [id, name] : family_names()) {
    FamilyMatrix fm = build_family_matrix(canonical_params(id));
    for (int trial = 0; trial < 5; ++trial) {
      const double q = 3.0 * u(rng);
      for (const auto& row : fm.spec.entries)
        for (const auto& e : row)
          for (const auto& f : e.families) {
            if (!f.infinite()) continue;
            // alpha chosen so that zeta <= 0.9; 3000 terms then reach below 1e-130.
            const double a_max = (q * std::log(f.weight.growth_base()) - std::log(0.9)) / std::log(f.step_ratio);
            const double alpha = a_max - 4.0 * u(rng);
            INFO(name << " q=" << q << " alpha=" << alpha);
            REQUIRE_THAT(family_value(f, q, alpha).value, WithinRel(oracle::family_sum(f, q, alpha, 3000), 1e-11));
          }
    }
  }
}

TEST_CASE("entries increase strictly with alpha", "[matrix_spec][property]") {
  for (const auto& [id, name] : family_names()) {
    FamilyMatrix fm = build_family_matrix(canonical_params(id));
    const std::vector<int> all = [&] {
      std::vector<int> v(fm.spec.n);
      for (int i = 0; i < fm.spec.n; ++i) v[i] = i;
      return v;
    }();
    const double top = std::min(1.0, domain_bound(fm.spec, all, 1.0) - 1e-3);
    for (const auto& row : fm.spec.entries)
      for (const auto& e : row) {
        if (e.zero()) continue;
        double prev = entry_value(e, 1.0, -3.0);
        for (double a = -2.5; a <= top; a += 0.5) {
          const double v = entry_value(e, 1.0, a);
          REQUIRE(v > prev);
          prev = v;
        }
      }
  }
}

TEST_CASE("series slower than the term cap is refused", "[matrix_spec]") {
  AtomFamily f = AtomFamily::series(WeightSequence::binomial(1.0, 0.5, 0.5), 1.0, 0.5);
  // zeta = 0.5^q 0.5^{-alpha} = 1 - 1e-9
  const double alpha = 1.0 + std::log1p(-1e-9) / std::log(2.0);
  CHECK_THROWS_AS(family_value(f, 1.0, alpha), DomainViolation);
  CHECK_THROWS_AS(family_value(f, 1.0, 1.0), DomainViolation);
}

TEST_CASE("JSON round trip preserves every family spec", "[matrix_spec]") {
  for (const auto& [id, name] : family_names()) {
    const MeasureMatrixSpec spec = build_family_matrix(canonical_params(id)).spec;
    const MeasureMatrixSpec back = spec_from_json(nlohmann::json::parse(to_json(spec).dump()));
    CHECK(back.n == spec.n);
    CHECK(back.labels == spec.labels);
    CHECK(back.scc_of == spec.scc_of);
    CHECK(to_json(back) == to_json(spec));
    CHECK((matrix_at(back, 0.7, -0.3) - matrix_at(spec, 0.7, -0.3)).cwiseAbs().maxCoeff() == 0.0);
  }
  CHECK_THROWS_AS(weight_from_json({{"kind", "cubic"}}), InvalidParams);
}
