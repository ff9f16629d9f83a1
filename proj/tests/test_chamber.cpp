#include "hk/chamber.hpp"

#include <catch_amalgamated.hpp>

#include <algorithm>

using namespace hk;

TEST_CASE("critical values") {
  CHECK(alpha_critical_values(0, 3) == std::vector<int>{-3, -1, 1, 3});
  CHECK(alpha_critical_values(-1, 1) == std::vector<int>{-2, 0, 2});
  CHECK_THROWS_AS(alpha_critical_values(2, 2), std::invalid_argument);
}

TEST_CASE("stratum index") {
  CHECK(stratum_index(-1, 0, Rational(-1, 2)) == -1);
  CHECK_FALSE(stratum_index(-1, 0, Rational(1)));
  CHECK(stratum_index(0, 3, Rational(1, 3)) == -1);
  CHECK(stratum_index(-1, 1, Rational(-3, 2)) == -2);
}

TEST_CASE("line-case classification follows the closed interval rule") {
  // stable iff d1 - d2 < alpha < d1 + d2 - 2 div
  struct Case {
    int d1, d2, div;
    Rational alpha;
    Status expected;
  };
  std::vector<Case> cases{
      {-1, 0, -1, Rational(-1, 2), Status::Stable},
      {-1, 0, -1, Rational(-1), Status::StrictlySemistable},
      {-1, 0, -1, Rational(1), Status::StrictlySemistable},
      {-1, 0, -1, Rational(-3, 2), Status::Unstable},
      {0, 3, 2, Rational(-1), Status::StrictlySemistable},
      {0, 3, 2, Rational(-2), Status::Stable},
      {0, 3, 1, Rational(1, 2), Status::Stable},
      {0, 3, 1, Rational(2), Status::Unstable},
  };
  for (const auto& c : cases) {
    INFO("(" << c.d1 << "," << c.d2 << ") div " << c.div << " alpha " << to_string(c.alpha));
    CHECK(classify_extension(c.d1, c.d2, c.div, c.alpha).verdict.status == c.expected);
    BoundPair pair{BundleInvariant(1, c.d1), BundleInvariant(1, c.d2)};
    Verdict v = verdict(alpha_param(c.alpha, pair), pair, admissible_witnesses_line_case(c.d1, c.d2, c.div));
    CHECK(v.status == c.expected);
  }
}

TEST_CASE("unstable verdicts name a witness") {
  auto low = classify_extension(-1, 0, -1, Rational(-2));
  REQUIRE(low.verdict.witness);
  CHECK(*low.verdict.witness == line_sub_witness(-1));
  auto high = classify_extension(0, 3, 1, Rational(2));
  REQUIRE(high.verdict.witness);
  CHECK(*high.verdict.witness == lifted_line_witness(1));
}

TEST_CASE("strata diagram, even degree difference") {
  AlphaStratification s = strata_diagram(-1, 1);
  REQUIRE(s.strata.size() == 2);
  CHECK(s.strata[0].members == std::set<int>{-1, 0});
  CHECK(s.strata[1].members == std::set<int>{-1});
  CHECK(s.chain == std::vector<Relation>{Relation::StrictSuperset});
  CHECK(s.minus_vs_semistable == Relation::Equal);
  CHECK(s.plus_vs_stable == Relation::Equal);
}

TEST_CASE("strata diagram, odd degree difference") {
  AlphaStratification s = strata_diagram(0, 3);
  REQUIRE(s.strata.size() == 3);
  CHECK(s.strata[0].members == std::set<int>{0, 1, 2});
  CHECK(s.strata[1].members == std::set<int>{0, 1});
  CHECK(s.strata[2].members == std::set<int>{0});
  CHECK(s.semistable == std::set<int>{0, 1});
  CHECK(s.stable == std::set<int>{0, 1});
  CHECK(s.first_vs_nontrivial == Relation::Equal);
  CHECK(s.minus_vs_semistable == Relation::Equal);
  CHECK(s.plus_vs_stable == Relation::StrictSubset);
}

TEST_CASE("walls of a line pair") {
  WallReport rep = enumerate_walls(-1, 0, 1, 1, 3);
  CHECK(rep.witnesses_scanned > 0);
  // (L1, 0) and (0, degree 0 line) cut the slice along the same plane
  auto it = std::find_if(rep.walls.begin(), rep.walls.end(),
                         [](const Wall& w) { return w.alpha && *w.alpha == Rational(-1); });
  REQUIRE(it != rep.walls.end());
  CHECK(it->multiplicity >= 2);
  for (std::size_t i = 0; i < rep.walls.size(); ++i)
    for (std::size_t j = i + 1; j < rep.walls.size(); ++j) CHECK(rep.walls[i].normal != rep.walls[j].normal);
}

TEST_CASE("set relations") {
  CHECK(compare_sets({1, 2}, {1, 2}) == Relation::Equal);
  CHECK(compare_sets({1, 2}, {1}) == Relation::StrictSuperset);
  CHECK(compare_sets({1}, {1, 2}) == Relation::StrictSubset);
  CHECK(compare_sets({1}, {2}) == Relation::Incomparable);
}
