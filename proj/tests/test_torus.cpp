#include "hk/torus.hpp"

#include <catch_amalgamated.hpp>

#include <random>
#include <sstream>

using namespace hk;
using Catch::Approx;

namespace {

ComplexField random_field(const TorusGrid& g, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> n;
  ComplexField f(g.size());
  for (int i = 0; i < g.size(); ++i) f[i] = cplx(n(rng), n(rng));
  return f;
}

RealField random_weight(const TorusGrid& g) {
  RealField rho(g.size());
  for (int j = 0; j < g.n; ++j)
    for (int k = 0; k < g.n; ++k)
      rho[g.index(j, k)] = std::exp(0.4 * std::sin(2 * kPi * g.x(j)) + 0.3 * std::cos(2 * kPi * (g.x(j) + g.y(k))));
  return rho;
}

}  // namespace

TEST_CASE("grid validation") {
  CHECK_THROWS_AS(TorusGrid(15), std::invalid_argument);
  CHECK_THROWS_AS(TorusGrid(8), std::invalid_argument);
  TorusGrid g(16);
  CHECK(g.cell_area() * g.size() == Approx(2 * kPi));
}

TEST_CASE("dbar of a plane wave") {
  TorusGrid g(32);
  ComplexField f(g.size());
  for (int j = 0; j < g.n; ++j)
    for (int k = 0; k < g.n; ++k) f[g.index(j, k)] = std::polar(1.0, 2 * kPi * (g.x(j) + g.y(k)));
  ComplexField expected = std::sqrt(kPi) * cplx(-1, 1) * f;
  CHECK((dbar(f, g, 0) - expected).cwiseAbs().maxCoeff() < 1e-11);
}

TEST_CASE("dbar adjointness, flat and weighted") {
  TorusGrid g(32);
  RealField rho = random_weight(g);
  for (int delta = -3; delta <= 3; ++delta) {
    ComplexField s = random_field(g, 1 + delta + 10), t = random_field(g, 2 + delta + 20);
    cplx lhs = inner(dbar(s, g, delta), t, g), rhs = inner(s, dbar_adj(t, g, delta), g);
    CHECK(std::abs(lhs - rhs) < 1e-10 * std::abs(lhs));
    cplx wl = inner(dbar(s, g, delta), t, g, rho), wr = inner(s, dbar_adj(t, g, delta, rho), g, rho);
    CHECK(std::abs(wl - wr) < 1e-10 * std::abs(wl));
  }
}

TEST_CASE("twist mismatch is rejected") {
  TorusGrid g(16);
  TwistedField f(g, -1, FormType::Function);
  CHECK_THROWS_AS(dbar(f, 0), std::invalid_argument);
  CHECK_THROWS_AS(dbar_adj(f), std::invalid_argument);
  CHECK_THROWS_AS(TwistedField(g, 0, FormType::Function, ComplexField::Zero(10)), std::invalid_argument);
}

TEST_CASE("function Laplacian equals dbar^* dbar and is positive") {
  TorusGrid g(32);
  RealField u(g.size());
  for (int j = 0; j < g.n; ++j)
    for (int k = 0; k < g.n; ++k) u[g.index(j, k)] = std::cos(2 * kPi * g.x(j)) + 0.5 * std::sin(4 * kPi * g.y(k));
  RealField lap = laplacian(u, g);
  RealField expected(g.size());
  for (int j = 0; j < g.n; ++j)
    for (int k = 0; k < g.n; ++k)
      expected[g.index(j, k)] = kPi * std::cos(2 * kPi * g.x(j)) + 4 * kPi * 0.5 * std::sin(4 * kPi * g.y(k));
  CHECK((lap - expected).cwiseAbs().maxCoeff() < 1e-10);
  ComplexField viaDbar = dbar_adj(dbar(u.cast<cplx>(), g, 0), g, 0);
  CHECK((viaDbar.real() - lap).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(std::abs(integrate(lap, g)) < 1e-13);
  RealField back = resolvent(u + 0.5 * lap, g, 0.5);
  CHECK((back - u).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("Landau levels of the form Laplacian") {
  TorusGrid g(16);
  SECTION("negative twist: levels |delta| n with multiplicity |delta|") {
    KernelReport r = form_kernel_dimension(g, -2);
    CHECK(r.dimension == 2);
    REQUIRE(r.smallest.size() >= 4);
    CHECK(r.smallest[2] == Approx(2.0).margin(1e-8));
    CHECK(r.smallest[3] == Approx(2.0).margin(1e-8));
  }
  SECTION("zero twist: constant kernel then pi (m^2 + n^2)") {
    KernelReport r = form_kernel_dimension(g, 0);
    CHECK(r.dimension == 1);
    CHECK(r.smallest[1] == Approx(kPi).margin(1e-8));
  }
  SECTION("positive twist: no kernel, lowest level delta") {
    KernelReport r = form_kernel_dimension(g, 1);
    CHECK(r.dimension == 0);
    CHECK(r.smallest[0] == Approx(1.0).margin(1e-8));
  }
}

TEST_CASE("harmonic basis is orthonormal and annihilated by dbar^*") {
  TorusGrid g(32);
  auto basis = harmonic_basis(g, -3);
  REQUIRE(basis.size() == 3);
  for (std::size_t i = 0; i < basis.size(); ++i) {
    CHECK(dbar_adj(basis[i], g, -3).cwiseAbs().maxCoeff() < 1e-10);
    for (std::size_t j = 0; j < basis.size(); ++j)
      CHECK(std::abs(inner(basis[i], basis[j], g) - (i == j ? 1.0 : 0.0)) < 1e-10);
  }
  CHECK(harmonic_basis(g, 2).empty());
  CHECK_THROWS_AS(canonical_harmonic(g, 1), std::invalid_argument);
}

TEST_CASE("weighted harmonic projection") {
  TorusGrid g(32);
  RealField rho = random_weight(g);
  TwistedField phi0(g, -1, FormType::ZeroOneForm, random_field(g, 7));
  ProjectionResult p = harmonic_project(phi0, rho);
  CHECK(dbar_adj(p.phi.values, g, -1, rho).norm() < 1e-8 * phi0.values.norm());
  // same class: the difference is dbar of the potential
  CHECK((p.phi.values - phi0.values - dbar(p.potential.values, g, -1)).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((p.phi.values - harmonic_closed_form(phi0.values, g, -1, rho)).cwiseAbs().maxCoeff() < 1e-7);
  ProjectionResult again = harmonic_project(p.phi, rho);
  CHECK((again.phi.values - p.phi.values).cwiseAbs().maxCoeff() < 1e-8);
  CHECK(norm2(p.phi.values, g, rho) <= norm2(phi0.values, g, rho));
}

TEST_CASE("holonomy of the gauge records the degree") {
  TorusGrid g(32);
  for (int delta : {-2, 0, 3}) {
    HolonomyReport h = holonomy(g, delta);
    CHECK(h.accumulated_phase == Approx(-2 * kPi * delta).margin(1e-12));
    CHECK(std::abs(h.net - cplx(1, 0)) < 1e-12);
  }
}

TEST_CASE("curvature integrates to the degree") {
  TorusGrid g(32);
  RealField u(g.size());
  for (int j = 0; j < g.n; ++j)
    for (int k = 0; k < g.n; ++k) u[g.index(j, k)] = std::sin(2 * kPi * g.x(j)) * std::cos(2 * kPi * g.y(k));
  ConformalExponent e(g, 3, u);
  CHECK(integrate(curvature(e), g) / (2 * kPi) == Approx(3.0).epsilon(1e-13));
}

TEST_CASE("Fourier interpolation is exact for band-limited data") {
  TorusGrid coarse(16), fine(32);
  auto sample = [](const TorusGrid& g) {
    RealField u(g.size());
    for (int j = 0; j < g.n; ++j)
      for (int k = 0; k < g.n; ++k)
        u[g.index(j, k)] = std::cos(2 * kPi * (3 * g.x(j) - 2 * g.y(k))) + 0.25 * std::sin(2 * kPi * 5 * g.y(k));
    return u;
  };
  CHECK((fourier_interpolate(sample(coarse), coarse, fine) - sample(fine)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK_THROWS_AS(fourier_interpolate(sample(fine), fine, coarse), std::invalid_argument);
}

TEST_CASE("snapshot round trip") {
  TorusGrid g(16);
  TwistedField f(g, -2, FormType::ZeroOneForm, random_field(g, 3));
  std::stringstream ss;
  write_snapshot(ss, f, "abc123");
  TwistedField r = read_snapshot(ss);
  CHECK(r.twist == -2);
  CHECK(r.form == FormType::ZeroOneForm);
  CHECK(r.grid == g);
  CHECK(r.values == f.values);
  std::stringstream bad("hk-field 1\nn 16\ntwist 0\nform function\n1 2\n");
  CHECK_THROWS_AS(read_snapshot(bad), std::runtime_error);
  std::stringstream wrong("something else");
  CHECK_THROWS_AS(read_snapshot(wrong), std::runtime_error);
}
