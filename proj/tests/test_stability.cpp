#include "hk/stability.hpp"

#include <catch_amalgamated.hpp>

using namespace hk;

namespace {
BoundPair line_pair(int d1, int d2) { return {BundleInvariant(1, d1), BundleInvariant(1, d2)}; }
}  // namespace

TEST_CASE("rational parsing") {
  CHECK(parse_rational("-1/2") == Rational(-1, 2));
  CHECK(parse_rational("-0.7") == Rational(-7, 10));
  CHECK(parse_rational("-0.9") == Rational(-9, 10));
  CHECK(parse_rational("0.08") == Rational(2, 25));
  CHECK(parse_rational("09/6") == Rational(3, 2));
  CHECK(parse_rational("3/-4") == Rational(-3, 4));
  CHECK_THROWS_AS(parse_rational("0x10"), std::invalid_argument);
  CHECK_THROWS_AS(parse_rational("1."), std::invalid_argument);
  CHECK(parse_rational("3") == Rational(3));
  CHECK(to_string(Rational(-6, 4)) == "-3/2");
  CHECK_THROWS_AS(parse_rational("1/0"), std::invalid_argument);
  CHECK_THROWS_AS(parse_rational("abc"), std::invalid_argument);
}

TEST_CASE("alpha parametrization on the constraint hyperplane") {
  BoundPair pair = line_pair(-1, 0);
  ParamTuple p = alpha_param(Rational(-1, 2), pair).as_tuple();
  CHECK(p == ParamTuple{1, 1, Rational(-3, 4), Rational(-1, 4)});
  CHECK(on_constraint(p, pair));
  CHECK(constraint_defect(p.scaled(2), pair) == 0);
}

TEST_CASE("viewpoint conversion fixed point") {
  BoundPair pair = line_pair(-1, 0);
  ViewpointParams vp = convert_params(Viewpoint::Extension, {}, pair, Rational(-1, 2));
  CHECK(vp.surjective == ParamTuple{0, 1, Rational(1, 2), Rational(-3, 4)});
  CHECK(vp.zero_weight);
  ViewpointParams back = convert_params(Viewpoint::SurjectiveTriple, vp.surjective, pair);
  CHECK(back.cohomology == vp.cohomology);
  REQUIRE(back.extension);
  CHECK(back.extension->alpha == Rational(-1, 2));
  CHECK_THROWS_AS(convert_params(Viewpoint::CohomologyTriple, ParamTuple{1, 1, 0, 0}, pair), std::invalid_argument);
}

TEST_CASE("theta of the line subobject") {
  BoundPair pair = line_pair(-1, 0);
  ParamTuple p = alpha_param(Rational(-1, 2), pair).as_tuple();
  SubobjectWitness w = make_witness(1, -1, 0, 0);
  CHECK(theta(p, w) == Rational(-1, 4));
  auto [lhs, rhs] = theta_swap_identity(p, w);
  CHECK(lhs == rhs);
  CHECK(theta(p, full_object(pair)) == 0);
}

TEST_CASE("verdicts and witnesses") {
  BoundPair pair = line_pair(-1, 0);
  std::vector<SubobjectWitness> subs{make_witness(1, -1, 0, 0), make_witness(0, 0, 1, -1)};
  auto at = [&](Rational a) { return three_way_verdict(a, pair, subs); };
  ThreeWayVerdict stable = at(Rational(-1, 2));
  CHECK(stable.agree());
  CHECK(stable.cohomology.status == Status::Stable);
  ThreeWayVerdict wall = at(Rational(-1));
  CHECK(wall.agree());
  CHECK(wall.cohomology.status == Status::StrictlySemistable);
  ThreeWayVerdict unstable = at(Rational(-2));
  CHECK(unstable.agree());
  CHECK(unstable.cohomology.status == Status::Unstable);
  REQUIRE(unstable.cohomology.witness);
  CHECK(*unstable.cohomology.witness == subs[0]);
}

TEST_CASE("witness validation") {
  BoundPair pair = line_pair(-1, 0);
  ParamTuple p = alpha_param(Rational(0), pair).as_tuple();
  CHECK_THROWS_AS(verdict(p, pair, {make_witness(2, 0, 0, 0)}), std::invalid_argument);
  CHECK_THROWS_AS(verdict(p, pair, {make_witness(0, 0, 0, 0)}), std::invalid_argument);
}

TEST_CASE("necessary alpha interval") {
  HalfOpenInterval iv = alpha_necessary_interval(-1, 0, 1, 1);
  CHECK(iv.lo == Rational(-1));
  CHECK(iv.hi == 0);
  CHECK(iv.contains(Rational(-1, 2)));
  CHECK_FALSE(iv.contains(Rational(-1)));
}
