#include "hk/chamber.hpp"
#include "hk/vortex.hpp"

#include <catch_amalgamated.hpp>

#include <random>
#include <sstream>

using namespace hk;
using Catch::Approx;

namespace {

ProblemSpec base(int n, Rational alpha) {
  ProblemSpec s;
  s.grid = TorusGrid(n);
  s.alpha = alpha;
  return s;
}

RealField smooth(const TorusGrid& g, double a, double b) {
  RealField u(g.size());
  for (int j = 0; j < g.n; ++j)
    for (int k = 0; k < g.n; ++k)
      u[g.index(j, k)] = a * std::sin(2 * kPi * g.x(j)) + b * std::cos(2 * kPi * (g.x(j) - g.y(k)));
  return u;
}

}  // namespace

TEST_CASE("constant phi on a degree-zero pair") {
  // d1 = d2 = 0: |phi|^2 = alpha / 2 with flat metrics solves both equations
  ProblemSpec s = base(16, Rational(1, 2));
  s.d1 = s.d2 = 0;
  ComplexField phi = ComplexField::Constant(s.grid.size(), cplx(0.5, 0));
  Residual r = residual_of(s, phi, MetricCoords::zero(s.grid));
  CHECK(r.sup_norm < 1e-14);
  ComplexField off = ComplexField::Constant(s.grid.size(), cplx(0.4, 0));
  CHECK(residual_of(s, off, MetricCoords::zero(s.grid)).sup_norm == Approx(0.25 - 0.16));
}

TEST_CASE("problem validation") {
  ProblemSpec s = base(16, Rational(-1, 2));
  s.d1 = 1;
  s.d2 = 0;
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  ProblemSpec t = base(16, Rational(-1, 2));
  t.seed = PhiSeed::from(TwistedField(t.grid, 0, FormType::ZeroOneForm));
  CHECK_THROWS_AS(t.validate(), std::invalid_argument);
  ProblemSpec u = base(16, Rational(-1, 2));
  u.flow.step = 0;
  CHECK_THROWS_AS(u.validate(), std::invalid_argument);
}

TEST_CASE("closed-form functional matches the path integral") {
  ProblemSpec s = base(32, Rational(-1, 2));
  ComplexField seed = s.seed_field().values;
  MetricCoords c = MetricCoords::zero(s.grid);
  c.u1 = smooth(s.grid, 0.3, -0.2);
  c.u2 = smooth(s.grid, -0.1, 0.25);
  c.beta = 0.1 * smooth(s.grid, 0.5, 0.5).cast<cplx>();
  double path = functional_path(s, seed, MetricCoords::zero(s.grid), c, 8, 8);
  CHECK(path == Approx(functional_closed_form(s, seed, c)).epsilon(1e-9));
}

TEST_CASE("geodesic first variation matches finite differences") {
  ProblemSpec s = base(32, Rational(-1, 2));
  ComplexField seed = s.seed_field().values;
  MetricCoords c = MetricCoords::zero(s.grid);
  c.u1 = smooth(s.grid, 0.2, 0.1);
  c.u2 = -c.u1;
  Direction dir{smooth(s.grid, 0.1, -0.3), smooth(s.grid, -0.2, 0.05), 0.2 * smooth(s.grid, 0.4, 0.3).cast<cplx>()};
  double h = 1e-4;
  double fd = (functional_closed_form(s, seed, geodesic(c, dir, h)) - functional_closed_form(s, seed, geodesic(c, dir, -h))) / (2 * h);
  CHECK(first_variation(s, seed, c, dir) == Approx(fd).epsilon(1e-6));
}

TEST_CASE("solver converges for a stable parameter") {
  ProblemSpec s = base(32, Rational(-1, 2));
  SolveResult r = solve(s);
  REQUIRE(r.status == SolveStatus::Converged);
  CHECK(r.state.residual.sup_norm < s.flow.tolerance);
  for (std::size_t i = 1; i < r.state.history.size(); ++i)
    CHECK(r.state.history[i].functional <= r.state.history[i - 1].functional + 1e-10);
  for (const auto& row : r.state.history) CHECK(std::abs(row.integrated_residual) < 1e-10);

  SECTION("second variation is positive at the solution") {
    ComplexField seed = r.state.seed.values;
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> a(-1, 1);
    for (int i = 0; i < 5; ++i) {
      Direction dir{smooth(s.grid, a(rng), a(rng)), smooth(s.grid, a(rng), a(rng)),
                    smooth(s.grid, a(rng), a(rng)).cast<cplx>() * cplx(a(rng), a(rng))};
      CHECK(second_variation(s, seed, r.state.coords, dir).value > 0);
    }
  }
  SECTION("integrated identities certify the line witnesses") {
    Certificate c = stability_certificate(r.state, s, line_sub_witness(-1));
    CHECK(c.theta == Rational(-1, 4));
    CHECK(c.slack == Approx(0.25).margin(1e-7));
    for (int dl : {-1, -2}) {
      Certificate l = stability_certificate(r.state, s, lifted_line_witness(dl));
      CHECK(l.theta < 0);
      CHECK(l.identity_defect < 1e-7);
    }
  }
  SECTION("rank-2 metric solves the coupled equations") {
    Rank2Report rk = assemble_rank2(r.state, s);
    CHECK(rk.diagonal_deviation < 1e-7);
    CHECK(rk.off_diagonal_deviation < 1e-6);
  }
  SECTION("history csv") {
    std::ostringstream os;
    write_history_csv(os, r.state.history, "feed");
    CHECK(os.str().rfind("# manifest feed\niteration,sup_residual", 0) == 0);
  }
}

TEST_CASE("flow agrees with the Newton oracle") {
  ProblemSpec s = base(16, Rational(-7, 10));
  s.flow.tolerance = 1e-11;
  SolveResult flow = solve(s);
  NewtonResult newton = newton_solve(s);
  REQUIRE(flow.status == SolveStatus::Converged);
  REQUIRE(newton.converged);
  CHECK((flow.state.w() - newton.w).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((flow.state.phi.values - newton.phi).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("solver reports divergence past the stability boundary") {
  ProblemSpec s = base(32, Rational(-3, 2));
  SolveResult r = solve(s);
  CHECK(r.status == SolveStatus::Diverged);
  REQUIRE(r.growth_trace.size() > 2);
  CHECK(r.growth_trace.back().first > r.growth_trace.front().first);
}

TEST_CASE("Q diagnostic") {
  ProblemSpec s = base(16, Rational(-1, 2));
  QReport q = q_diagnostic(s, {line_sub_witness(-1)}, {Rational(1)});
  CHECK(q.constraint_term == 0);
  CHECK(q.q == Rational(1, 4));
  CHECK_THROWS_AS(q_diagnostic(s, {line_sub_witness(-1)}, {Rational(0)}), std::invalid_argument);
}
