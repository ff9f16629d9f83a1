#pragma once

// Coupled vortex equations for an extension 0 -> L1 -> E -> L2 -> 0 of line bundles on the
// flat torus.  A metric on E is written in the smooth splitting E = L1 + L2 through
// coordinates (u1, u2, beta): relative to the background K it is
//
//   H = [[e^u1, e^u1 beta], [e^u1 conj(beta), e^u1 |beta|^2 + e^u2]],
//
// so u1 is the induced metric on L1, u2 the quotient metric on L2 and beta a section of
// Hom(L2, L1) of twist d1 - d2.  The second fundamental form of the H-orthogonal splitting
// is phi = phi_seed + dbar(beta).  The equations are
//
//   R1 = d1 + Lap(u1) + e^w |phi|^2 - tau1 = 0,
//   R2 = d2 + Lap(u2) - e^w |phi|^2 - tau2 = 0,   w = u1 - u2,
//
// with phi harmonic for the weight e^w.

#include "hk/chamber.hpp"
#include "hk/stability.hpp"
#include "hk/torus.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace hk {

class DivergenceError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

class StepError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

class InconsistencyError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class SeedKind { CanonicalHarmonic, Zero, Field };

struct PhiSeed {
  SeedKind kind = SeedKind::CanonicalHarmonic;
  std::optional<TwistedField> field;

  static PhiSeed canonical() { return {}; }
  static PhiSeed zero() { return {SeedKind::Zero, std::nullopt}; }
  static PhiSeed from(TwistedField f) { return {SeedKind::Field, std::move(f)}; }
};

struct FlowControls {
  double step = 1.0;
  int max_iterations = 2000;
  double tolerance = 1e-8;            ///< sup-norm residual
  double divergence_threshold = 50.0; ///< sup |u1 - u2|
  int reproject_every = 10;
  int stagnation_window = 200;
  double stagnation_ratio = 0.999;    ///< best residual must shrink by this factor per window
  int max_halvings = 12;
  int quadrature_nodes = 6;
  double cg_tolerance = 1e-11;
};

struct ProblemSpec {
  int d1 = -1, d2 = 0;
  Rational alpha = Rational(-1, 2);
  TorusGrid grid{32};
  PhiSeed seed;
  FlowControls flow;

  int twist() const { return d1 - d2; }
  Rational tau1() const { return (Rational(d1 + d2) + alpha) / 2; }
  Rational tau2() const { return (Rational(d1 + d2) - alpha) / 2; }
  BoundPair pair() const { return {BundleInvariant(1, d1), BundleInvariant(1, d2)}; }
  ParamTuple params() const { return alpha_param(alpha, pair()).as_tuple(); }

  void validate() const {
    if (tau1() + tau2() != d1 + d2 || tau1() - tau2() != alpha) throw std::logic_error("tau bookkeeping broken");
    if (seed.kind == SeedKind::Field) {
      if (!seed.field) throw std::invalid_argument("field seed missing");
      if (seed.field->form != FormType::ZeroOneForm) throw std::invalid_argument("phi seed must be a (0,1)-form");
      if (seed.field->twist != twist()) throw std::invalid_argument("phi seed twist must equal d1 - d2");
      if (!(seed.field->grid == grid)) throw std::invalid_argument("phi seed grid does not match");
    }
    if (seed.kind == SeedKind::CanonicalHarmonic && twist() > 0)
      throw std::invalid_argument("no harmonic seed exists for d1 > d2");
    if (flow.step <= 0 || flow.max_iterations < 0 || flow.tolerance <= 0 || flow.reproject_every < 1)
      throw std::invalid_argument("invalid flow controls");
  }

  TwistedField seed_field() const {
    switch (seed.kind) {
      case SeedKind::CanonicalHarmonic: return canonical_harmonic(grid, twist());
      case SeedKind::Zero: return TwistedField(grid, twist(), FormType::ZeroOneForm);
      case SeedKind::Field: return *seed.field;
    }
    throw std::logic_error("unknown seed kind");
  }
};

struct MetricCoords {
  RealField u1, u2;
  ComplexField beta;

  static MetricCoords zero(const TorusGrid& g) {
    return {RealField::Zero(g.size()), RealField::Zero(g.size()), ComplexField::Zero(g.size())};
  }
  MetricCoords operator+(const MetricCoords& o) const { return {u1 + o.u1, u2 + o.u2, beta + o.beta}; }
  MetricCoords operator-(const MetricCoords& o) const { return {u1 - o.u1, u2 - o.u2, beta - o.beta}; }
  MetricCoords operator*(double t) const { return {u1 * t, u2 * t, beta * t}; }
};

struct Residual {
  RealField block1, block2;
  double sup_norm = 0.0;
  double l2_norm = 0.0;
  double integrated = 0.0;  ///< integral of block1 + block2
};

struct HistoryRow {
  int iteration = 0;
  double time = 0.0;
  double sup_residual = 0.0;
  double l2_residual = 0.0;
  double functional = 0.0;
  double sup_s = 0.0;
  double integrated_residual = 0.0;
};

struct SolverState {
  TorusGrid grid;
  TwistedField seed;
  MetricCoords coords;
  TwistedField phi;
  Residual residual;
  int iteration = 0;
  int projections = 0;
  double step = 1.0;
  double time = 0.0;
  double functional = 0.0;
  std::vector<HistoryRow> history;

  ConformalExponent u1(int d1) const { return {grid, d1, coords.u1}; }
  ConformalExponent u2(int d2) const { return {grid, d2, coords.u2}; }
  RealField w() const { return coords.u1 - coords.u2; }
};

inline ComplexField phi_of(const ComplexField& seed, const MetricCoords& c, const TorusGrid& g, int delta) {
  return seed + dbar(c.beta, g, delta);
}

inline Residual residual_of(const ProblemSpec& spec, const ComplexField& phi, const MetricCoords& c) {
  const TorusGrid& g = spec.grid;
  RealField rho = (c.u1 - c.u2).array().exp().matrix();
  RealField coupling = rho.cwiseProduct(phi.cwiseAbs2());
  double t1 = to_double(spec.tau1()), t2 = to_double(spec.tau2());
  Residual r;
  r.block1 = (laplacian(c.u1, g) + coupling).array() + (spec.d1 - t1);
  r.block2 = (laplacian(c.u2, g) - coupling).array() + (spec.d2 - t2);
  if (!r.block1.allFinite() || !r.block2.allFinite()) throw DivergenceError("non-finite residual");
  r.sup_norm = std::max(r.block1.cwiseAbs().maxCoeff(), r.block2.cwiseAbs().maxCoeff());
  r.l2_norm = std::sqrt((r.block1.squaredNorm() + r.block2.squaredNorm()) * g.cell_area());
  r.integrated = integrate(RealField(r.block1 + r.block2), g);
  return r;
}

/// Diagonal blocks of the trace-free moment map at the current state.
inline Residual residual(const SolverState& s, const ProblemSpec& spec) { return residual_of(spec, s.phi.values, s.coords); }

// ---------------------------------------------------------------------------------------
// functional

namespace detail {

struct Quadrature {
  std::vector<double> nodes, weights;  ///< on [0, 1]
};

/// Gauss-Legendre rule from the eigen-decomposition of the Jacobi matrix.
inline Quadrature gauss_legendre(int n) {
  Eigen::MatrixXd j = Eigen::MatrixXd::Zero(n, n);
  for (int i = 1; i < n; ++i) j(i, i - 1) = j(i - 1, i) = i / std::sqrt(4.0 * i * i - 1.0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(j);
  Quadrature q;
  for (int i = 0; i < n; ++i) {
    q.nodes.push_back(0.5 * (es.eigenvalues()[i] + 1.0));
    double v = es.eigenvectors()(0, i);
    q.weights.push_back(v * v);
  }
  return q;
}

}  // namespace detail

/// Derivative of M along the coordinate direction dc at c.
inline double coordinate_variation(const ProblemSpec& spec, const ComplexField& seed, const MetricCoords& c,
                                   const MetricCoords& dc) {
  const TorusGrid& g = spec.grid;
  ComplexField phi = phi_of(seed, c, g, spec.twist());
  Residual r = residual_of(spec, phi, c);
  RealField rho = (c.u1 - c.u2).array().exp().matrix();
  double u_part = 2.0 * integrate(RealField(r.block1.cwiseProduct(dc.u1) + r.block2.cwiseProduct(dc.u2)), g);
  ComplexField grad = dbar_adj(ComplexField(rho.cast<cplx>().cwiseProduct(phi)), g, spec.twist());
  return u_part + 4.0 * inner(grad, dc.beta, g).real();
}

/// M(to) - M(from) by Gauss-Legendre integration of the first variation along the straight
/// coordinate path.
inline double functional_path(const ProblemSpec& spec, const ComplexField& seed, const MetricCoords& from,
                              const MetricCoords& to, int nodes = 6, int segments = 1) {
  detail::Quadrature q = detail::gauss_legendre(nodes);
  MetricCoords d = to - from;
  double total = 0.0;
  for (int s = 0; s < segments; ++s)
    for (int i = 0; i < nodes; ++i) {
      double t = (s + q.nodes[i]) / segments;
      total += q.weights[i] / segments * coordinate_variation(spec, seed, from + d * t, d);
    }
  return total;
}

/// M(c) relative to the background in closed form.
inline double functional_closed_form(const ProblemSpec& spec, const ComplexField& seed, const MetricCoords& c) {
  const TorusGrid& g = spec.grid;
  ComplexField phi = phi_of(seed, c, g, spec.twist());
  RealField rho = (c.u1 - c.u2).array().exp().matrix();
  double t1 = to_double(spec.tau1()), t2 = to_double(spec.tau2());
  RealField f = 0.5 * c.u1.cwiseProduct(laplacian(c.u1, g)) + 0.5 * c.u2.cwiseProduct(laplacian(c.u2, g)) +
                (spec.d1 - t1) * c.u1 + (spec.d2 - t2) * c.u2 + rho.cwiseProduct(phi.cwiseAbs2()) - seed.cwiseAbs2();
  return 2.0 * integrate(f, g);
}

struct FunctionalSplit {
  double total = 0.0;           ///< path-integrated M
  double tau_part = 0.0;        ///< -2 int (tau1 u1 + tau2 u2)
  double tau_part_closed = 0.0; ///< -2 alpha int u1, valid in the zero-mean gauge
  double remainder = 0.0;       ///< total - tau_part
};

inline FunctionalSplit functional_split(const ProblemSpec& spec, const ComplexField& seed, const MetricCoords& c,
                                        int nodes = 6, int segments = 4) {
  const TorusGrid& g = spec.grid;
  FunctionalSplit s;
  s.total = functional_path(spec, seed, MetricCoords::zero(g), c, nodes, segments);
  double t1 = to_double(spec.tau1()), t2 = to_double(spec.tau2());
  s.tau_part = -2.0 * integrate(RealField(t1 * c.u1 + t2 * c.u2), g);
  s.tau_part_closed = -2.0 * to_double(spec.alpha) * integrate(c.u1, g);
  s.remainder = s.total - s.tau_part;
  return s;
}

/// (flow time, M) pairs from a solver history.
inline std::vector<std::pair<double, double>> functional_trace(const std::vector<HistoryRow>& history) {
  if (history.empty()) throw std::invalid_argument("empty history");
  std::vector<std::pair<double, double>> out;
  for (const auto& r : history) out.emplace_back(r.time, r.functional);
  return out;
}

// ---------------------------------------------------------------------------------------
// geodesics H e^{tS}

/// Hermitian endomorphism S = [[s1, u], [conj(u), s2]] in an H-unitary frame.
struct Direction {
  RealField s1, s2;
  ComplexField u;
};

namespace detail {

struct Herm2 {
  double a = 0, d = 0;
  cplx b = 0;  ///< [[a, b], [conj(b), d]]
};

inline Herm2 exp_herm(double s1, double s2, cplx u, double t) {
  double m = 0.5 * (s1 + s2), n = 0.5 * (s1 - s2);
  double r = std::sqrt(n * n + std::norm(u));
  double ch = std::cosh(t * r), sh = r > 0 ? std::sinh(t * r) / r : t, e = std::exp(t * m);
  return {e * (ch + sh * n), e * (ch - sh * n), e * sh * u};
}

/// Q^* E Q with Q = [[a, a beta], [0, b]].
inline Herm2 pull_back(const Herm2& e, double a, double b, cplx beta) {
  cplx q12 = a * beta;
  cplx f11 = e.a * a, f12 = e.a * q12 + e.b * b;
  cplx f22 = std::conj(e.b) * q12 + e.d * b;
  Herm2 p;
  p.a = (a * f11).real();
  p.b = a * f12;
  p.d = (std::conj(q12) * f12 + b * f22).real();
  return p;
}

}  // namespace detail

inline MetricCoords geodesic(const MetricCoords& c, const Direction& dir, double t) {
  MetricCoords out = c;
  for (int i = 0; i < c.u1.size(); ++i) {
    auto e = detail::exp_herm(dir.s1[i], dir.s2[i], dir.u[i], t);
    auto p = detail::pull_back(e, std::exp(0.5 * c.u1[i]), std::exp(0.5 * c.u2[i]), c.beta[i]);
    out.u1[i] = std::log(p.a);
    out.beta[i] = p.b / p.a;
    out.u2[i] = std::log(p.d - std::norm(p.b) / p.a);
  }
  return out;
}

/// sup over the torus of |log eigenvalue| of H relative to K.
inline double sup_s(const MetricCoords& c) {
  double best = 0.0;
  for (int i = 0; i < c.u1.size(); ++i) {
    double a = std::exp(c.u1[i]);
    double d = a * std::norm(c.beta[i]) + std::exp(c.u2[i]);
    double b2 = a * a * std::norm(c.beta[i]);
    double m = 0.5 * (a + d), disc = std::sqrt(0.25 * (a - d) * (a - d) + b2);
    double lo = std::log(a * std::exp(c.u2[i]) / (m + disc));  // det / larger eigenvalue
    best = std::max({best, std::abs(std::log(m + disc)), std::abs(lo)});
  }
  return best;
}

/// dM/dt at t = 0 along H e^{tS}.
inline double first_variation(const ProblemSpec& spec, const ComplexField& seed, const MetricCoords& c,
                              const Direction& dir) {
  const TorusGrid& g = spec.grid;
  ComplexField phi = phi_of(seed, c, g, spec.twist());
  Residual r = residual_of(spec, phi, c);
  RealField w = c.u1 - c.u2;
  RealField rho = w.array().exp().matrix();
  ComplexField x = dbar_adj(ComplexField(rho.cast<cplx>().cwiseProduct(phi)), g, spec.twist());
  x = (-0.5 * w).array().exp().matrix().cast<cplx>().cwiseProduct(x);
  return 2.0 * integrate(RealField(dir.s1.cwiseProduct(r.block1) + dir.s2.cwiseProduct(r.block2)), g) +
         4.0 * inner(x, dir.u, g).real();
}

struct SecondVariation {
  double d_prime_norm2 = 0.0;  ///< |D'_H S|^2
  double u_norm2 = 0.0;        ///< |u|^2
  double value = 0.0;          ///< |D'_H S|^2 - alpha |u|^2, equal to M''(0) / 2
};

/// The four entries of the (0,1)-part of the H-connection on End E applied to S, in the
/// H-unitary frame.  D'_H S is their conjugate transpose and has the same norm.
inline SecondVariation second_variation(const ProblemSpec& spec, const ComplexField& seed, const MetricCoords& c,
                                        const Direction& dir) {
  const TorusGrid& g = spec.grid;
  int delta = spec.twist();
  ComplexField phi = phi_of(seed, c, g, delta);
  RealField w = c.u1 - c.u2;
  ComplexField pt = (0.5 * w).array().exp().matrix().cast<cplx>().cwiseProduct(phi);
  ComplexField dw = dbar(ComplexField(w.cast<cplx>()), g, 0);
  ComplexField s1 = dir.s1.cast<cplx>(), s2 = dir.s2.cast<cplx>();
  ComplexField ub = dir.u.conjugate();
  ComplexField e11 = dbar(s1, g, 0) - pt.cwiseProduct(ub);
  ComplexField e12 = dbar(dir.u, g, delta) - 0.5 * dw.cwiseProduct(dir.u) - pt.cwiseProduct(s2 - s1);
  ComplexField e21 = dbar(ub, g, -delta) + 0.5 * dw.cwiseProduct(ub);
  ComplexField e22 = dbar(s2, g, 0) + ub.cwiseProduct(pt);
  SecondVariation sv;
  sv.d_prime_norm2 = norm2(e11, g) + norm2(e12, g) + norm2(e21, g) + norm2(e22, g);
  sv.u_norm2 = norm2(dir.u, g);
  sv.value = sv.d_prime_norm2 - to_double(spec.alpha) * sv.u_norm2;
  return sv;
}

/// d/dt and d^2/dt^2 at t = 0 of the L1 log-ratio integral int u1(t) along H e^{tS}.
inline std::pair<double, double> log_ratio_variations(const Direction& dir, const TorusGrid& g) {
  return {integrate(dir.s1, g), norm2(dir.u, g)};
}

// ---------------------------------------------------------------------------------------
// flow

inline SolverState initial_state(const ProblemSpec& spec) {
  spec.validate();
  TwistedField seed = spec.seed_field();
  SolverState s{spec.grid, seed, MetricCoords::zero(spec.grid), seed, {}, 0, 0, spec.flow.step, 0.0, 0.0, {}};
  s.residual = residual(s, spec);
  s.history.push_back({0, 0.0, s.residual.sup_norm, s.residual.l2_norm, 0.0, 0.0, s.residual.integrated});
  return s;
}

/// Replaces phi by the harmonic representative for the current weight; M changes by a path increment.
inline void reproject(SolverState& s, const ProblemSpec& spec) {
  RealField rho = s.w().array().exp().matrix();
  CgOptions opt;
  opt.tolerance = spec.flow.cg_tolerance;
  ProjectionResult p = harmonic_project(s.phi, rho, std::nullopt, opt);
  MetricCoords next = s.coords;
  next.beta += p.potential.values;
  s.functional += functional_path(spec, s.seed.values, s.coords, next, spec.flow.quadrature_nodes);
  s.coords = std::move(next);
  s.phi.values = phi_of(s.seed.values, s.coords, s.grid, s.seed.twist);
  s.residual = residual(s, spec);
  ++s.projections;
}

/// One semi-implicit descent step u <- u - h (1 + h Lap)^{-1} R, then the zero-mean gauge.
/// The step is halved while the path increment of M is positive.
inline SolverState flow_step(SolverState s, const ProblemSpec& spec) {
  const TorusGrid& g = s.grid;
  double tol = 1e-12 * (1.0 + std::abs(s.functional));
  for (int halving = 0;; ++halving) {
    double h = s.step;
    MetricCoords next = s.coords;
    next.u1 -= h * resolvent(s.residual.block1, g, h);
    next.u2 -= h * resolvent(s.residual.block2, g, h);
    double shift = 0.5 * (next.u1 + next.u2).mean();
    next.u1.array() -= shift;
    next.u2.array() -= shift;
    double inc = functional_path(spec, s.seed.values, s.coords, next, spec.flow.quadrature_nodes);
    if (!std::isfinite(inc)) throw DivergenceError("non-finite functional increment");
    if (inc <= tol) {
      s.coords = std::move(next);
      s.functional += inc;
      s.time += h;
      break;
    }
    if (halving >= spec.flow.max_halvings)
      throw StepError("functional increased after " + std::to_string(halving) + " step halvings; reduce the step");
    s.step *= 0.5;
  }
  ++s.iteration;
  s.residual = residual(s, spec);
  if (s.iteration % spec.flow.reproject_every == 0) reproject(s, spec);
  s.history.push_back({s.iteration, s.time, s.residual.sup_norm, s.residual.l2_norm, s.functional, sup_s(s.coords),
                       s.residual.integrated});
  return s;
}

enum class SolveStatus { Converged, Diverged, Indeterminate };

inline const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Converged: return "Converged";
    case SolveStatus::Diverged: return "Diverged";
    case SolveStatus::Indeterminate: return "Indeterminate";
  }
  return "?";
}

struct SolveResult {
  SolveStatus status = SolveStatus::Indeterminate;
  SolverState state;
  std::string reason;
  std::vector<std::pair<double, double>> growth_trace;  ///< (sup|s|, M) per iteration
};

inline SolveResult solve(const ProblemSpec& spec) {
  SolverState s = initial_state(spec);
  const FlowControls& fc = spec.flow;
  auto finish = [&](SolveStatus st, std::string why) {
    SolveResult r{st, s, std::move(why), {}};
    for (const auto& row : r.state.history) r.growth_trace.emplace_back(row.sup_s, row.functional);
    return r;
  };
  try {
    reproject(s, spec);
    s.history.back() = {0, 0.0, s.residual.sup_norm, s.residual.l2_norm, s.functional, sup_s(s.coords),
                        s.residual.integrated};
    double best = s.residual.sup_norm;
    int best_at = 0;
    while (true) {
      if (s.residual.sup_norm < fc.tolerance) {
        reproject(s, spec);
        s.history.back().sup_residual = s.residual.sup_norm;
        s.history.back().l2_residual = s.residual.l2_norm;
        s.history.back().functional = s.functional;
        s.history.back().integrated_residual = s.residual.integrated;
        if (s.residual.sup_norm < fc.tolerance) return finish(SolveStatus::Converged, "sup residual below tolerance");
      }
      double wmax = s.w().cwiseAbs().maxCoeff();
      if (wmax > fc.divergence_threshold)
        return finish(SolveStatus::Diverged, "sup|u1 - u2| = " + std::to_string(wmax) + " exceeds threshold");
      if (s.residual.sup_norm < fc.stagnation_ratio * best) {
        best = s.residual.sup_norm;
        best_at = s.iteration;
      } else if (s.iteration - best_at >= fc.stagnation_window) {
        // stagnation with growing metric is divergence; with a bounded metric it is a floor
        double growth = s.history.back().sup_s - s.history[best_at].sup_s;
        std::string why = "residual stagnated at " + std::to_string(best);
        if (growth > 1.0) return finish(SolveStatus::Diverged, why + " while sup|s| grew by " + std::to_string(growth));
        return finish(SolveStatus::Indeterminate, why + " with bounded sup|s|");
      }
      if (s.iteration >= fc.max_iterations)
        return finish(SolveStatus::Indeterminate, "iteration budget exhausted at residual " + std::to_string(s.residual.sup_norm));
      s = flow_step(std::move(s), spec);
    }
  } catch (const DivergenceError& e) {
    return finish(SolveStatus::Diverged, e.what());
  }
}

/// Residual of the conformal factors of a solution re-evaluated on a grid refined by
/// trigonometric interpolation, with phi re-projected there.  Measures truncation error.
inline double refined_residual(const SolverState& s, const ProblemSpec& spec, int factor = 2) {
  if (spec.seed.kind == SeedKind::Field) throw std::invalid_argument("refinement needs a canonical or zero seed");
  ProblemSpec fine = spec;
  fine.grid = TorusGrid(spec.grid.n * factor);
  MetricCoords c = MetricCoords::zero(fine.grid);
  c.u1 = fourier_interpolate(s.coords.u1, spec.grid, fine.grid);
  c.u2 = fourier_interpolate(s.coords.u2, spec.grid, fine.grid);
  TwistedField seed = fine.seed_field();
  RealField rho = (c.u1 - c.u2).array().exp().matrix();
  CgOptions opt;
  opt.tolerance = spec.flow.cg_tolerance;
  ComplexField phi = harmonic_project(seed, rho, std::nullopt, opt).phi.values;
  return residual_of(fine, phi, c).sup_norm;
}

/// CSV history: iteration, sup_residual, l2_residual, M, sup_s.
inline void write_history_csv(std::ostream& os, const std::vector<HistoryRow>& history, const std::string& manifest_hash = "") {
  if (!manifest_hash.empty()) os << "# manifest " << manifest_hash << "\n";
  os << "iteration,sup_residual,l2_residual,M,sup_s\n";
  os.precision(17);
  for (const auto& r : history)
    os << r.iteration << "," << r.sup_residual << "," << r.l2_residual << "," << r.functional << "," << r.sup_s << "\n";
}

// ---------------------------------------------------------------------------------------
// independent damped Newton solve of the reduced system in w = u1 - u2 (u1 + u2 = 0)

struct NewtonResult {
  bool converged = false;
  int iterations = 0;
  double sup_residual = 0.0;
  RealField w;
  ComplexField phi;
};

inline NewtonResult newton_solve(const ProblemSpec& spec, double tolerance = 1e-11, int max_iterations = 60) {
  spec.validate();
  const TorusGrid& g = spec.grid;
  if (g.n > 48) throw std::invalid_argument("dense Newton oracle is limited to N <= 48");
  int delta = spec.twist();
  auto basis = harmonic_basis(g, delta);
  if (basis.empty()) throw std::invalid_argument("Newton oracle needs harmonic forms (d1 <= d2)");
  ComplexField seed = spec.seed_field().values;
  int q = static_cast<int>(basis.size()), n = g.size();
  double da = g.cell_area();
  double c1 = spec.d1 - to_double(spec.tau1());
  Eigen::VectorXcd b(q);
  for (int k = 0; k < q; ++k) b[k] = inner(basis[k], seed, g);
  Eigen::MatrixXd lap(n, n);
  {
    RealField e = RealField::Zero(n);
    for (int i = 0; i < n; ++i) {
      e[i] = 1.0;
      lap.col(i) = laplacian(e, g);
      e[i] = 0.0;
    }
  }
  struct Eval {
    RealField f, t, ew;
    ComplexField s;
    Eigen::MatrixXcd ginv;
  };
  auto evaluate = [&](const RealField& w) {
    Eval ev;
    ev.ew = (-w).array().exp().matrix();
    Eigen::MatrixXcd gram(q, q);
    for (int i = 0; i < q; ++i)
      for (int j = 0; j < q; ++j) gram(i, j) = inner(basis[i], ComplexField(ev.ew.cast<cplx>().cwiseProduct(basis[j])), g);
    ev.ginv = gram.inverse();
    Eigen::VectorXcd c = ev.ginv * b;
    ev.s = ComplexField::Zero(n);
    for (int i = 0; i < q; ++i) ev.s += c[i] * basis[i];
    ev.t = ev.ew.cwiseProduct(ev.s.cwiseAbs2());
    ev.f = (0.5 * laplacian(w, g) + ev.t).array() + c1;
    return ev;
  };
  NewtonResult out;
  out.w = RealField::Zero(n);
  Eval ev = evaluate(out.w);
  for (out.iterations = 0; out.iterations < max_iterations; ++out.iterations) {
    if (!ev.f.allFinite()) break;
    if (ev.f.cwiseAbs().maxCoeff() < tolerance) {
      out.converged = true;
      break;
    }
    Eigen::MatrixXd jac = 0.5 * lap;
    jac.diagonal() -= ev.t;
    Eigen::MatrixXcd a(q, n), psi(n, q);
    for (int k = 0; k < q; ++k) {
      a.row(k) = (da * basis[k].conjugate().cwiseProduct(ev.ew.cast<cplx>()).cwiseProduct(ev.s)).transpose();
      psi.col(k) = basis[k];
    }
    Eigen::MatrixXcd low = psi * (ev.ginv * a);
    ComplexField left = 2.0 * ev.ew.cast<cplx>().cwiseProduct(ev.s.conjugate());
    jac += (left.asDiagonal() * low).real();
    RealField dw = jac.partialPivLu().solve(-ev.f);
    double f0 = ev.f.norm(), lambda = 1.0;
    Eval trial = evaluate(out.w + dw);
    while (!(trial.f.allFinite() && trial.f.norm() < (1.0 - 1e-4 * lambda) * f0) && lambda > 1e-6) {
      lambda *= 0.5;
      trial = evaluate(out.w + lambda * dw);
    }
    out.w += lambda * dw;
    ev = std::move(trial);
  }
  out.sup_residual = ev.f.cwiseAbs().maxCoeff();
  out.phi = ev.ew.cast<cplx>().cwiseProduct(ev.s);
  return out;
}

// ---------------------------------------------------------------------------------------
// rank-2 assembly, certificates, Q

struct Rank2Report {
  double diagonal_deviation = 0.0;      ///< sup over both diagonal blocks of |i Lambda F_H - tau|
  double off_diagonal_deviation = 0.0;  ///< sup of the harmonicity defect in unit frames
  double sup_deviation = 0.0;
  std::optional<double> pi_pi_star_defect;  ///< sup |pi pi^* + alpha| at the surjective-triple point
};

inline Rank2Report assemble_rank2(const SolverState& s, const ProblemSpec& spec) {
  const TorusGrid& g = spec.grid;
  Residual r = residual(s, spec);
  RealField w = s.w();
  RealField rho = w.array().exp().matrix();
  ComplexField off = dbar_adj(s.phi.values, g, spec.twist(), rho);
  off = (0.5 * w).array().exp().matrix().cast<cplx>().cwiseProduct(off);
  Rank2Report rep;
  rep.diagonal_deviation = r.sup_norm;
  rep.off_diagonal_deviation = off.cwiseAbs().maxCoeff();
  rep.sup_deviation = std::max(rep.diagonal_deviation, rep.off_diagonal_deviation);
  if (spec.alpha < 0) {
    // metric -alpha e^{u2} on the quotient slot; pi pi^* = (H^{-1})_{22} times that metric
    double a = -to_double(spec.alpha), worst = 0.0;
    for (int i = 0; i < g.size(); ++i) {
      Eigen::Matrix2cd h;
      double e1 = std::exp(s.coords.u1[i]);
      cplx bt = s.coords.beta[i];
      h << e1, e1 * bt, e1 * std::conj(bt), e1 * std::norm(bt) + std::exp(s.coords.u2[i]);
      double pp = h.inverse()(1, 1).real() * a * std::exp(s.coords.u2[i]);
      worst = std::max(worst, std::abs(pp - a));
    }
    rep.pi_pi_star_defect = worst;
  }
  return rep;
}

struct Certificate {
  SubobjectWitness witness;
  Rational theta;
  double slack = 0.0;            ///< non-negative terms of the integrated identity
  double identity_defect = 0.0;  ///< |slack + theta|, zero at an exact solution
};

/// Integrated identity for a line subobject: theta(witness) + slack = 0 with slack >= 0.
inline Certificate stability_certificate(const SolverState& s, const ProblemSpec& spec, const SubobjectWitness& witness,
                                         double tolerance = 1e-8) {
  const TorusGrid& g = spec.grid;
  double coupling = integrate(RealField(s.w().array().exp().matrix().cwiseProduct(s.phi.values.cwiseAbs2())), g) /
                    (2.0 * kPi);
  Certificate c{witness, theta(spec.params(), witness), 0.0, 0.0};
  if (witness.r1() == 1 && witness.r2() == 0 && witness.d1() == spec.d1) {
    c.slack = coupling;
  } else if (witness.r1() == 0 && witness.r2() == 1) {
    Rational gap = Rational(spec.d2) - witness.d2();
    if (gap < 0) throw std::invalid_argument("lifted line degree exceeds d2");
    c.slack = to_double(gap) - coupling;
  } else {
    throw std::invalid_argument("certificate needs a line witness (L1, 0) or (0, L)");
  }
  c.identity_defect = std::abs(c.slack + to_double(c.theta));
  if (c.slack < -tolerance)
    throw InconsistencyError("negative slack " + std::to_string(c.slack) + " for witness " + describe(witness));
  return c;
}

struct QReport {
  Rational q;
  Rational constraint_term;  ///< r mu(E) - r1 tau1 - r2 tau2
  std::vector<Rational> thetas;
};

/// Q = lambda (r mu(E) - r1 tau1 - r2 tau2) - sum_i a_i theta_i over the filtration steps.
inline QReport q_diagnostic(const ProblemSpec& spec, const std::vector<SubobjectWitness>& filtration,
                            const std::vector<Rational>& gaps, const Rational& lambda = 1) {
  if (filtration.size() != gaps.size()) throw std::invalid_argument("one eigenvalue gap per filtration step");
  for (const auto& a : gaps)
    if (a <= 0) throw std::invalid_argument("eigenvalue gaps must be positive");
  ParamTuple p = spec.params();
  BoundPair pair = spec.pair();
  QReport rep;
  rep.constraint_term = pair.degree() - pair.e1.rank * p.tau1 - pair.e2.rank * p.tau2;
  rep.q = lambda * rep.constraint_term;
  for (std::size_t i = 0; i < filtration.size(); ++i) {
    validate_witness(filtration[i], pair);
    Rational t = theta(p, filtration[i]);
    rep.thetas.push_back(t);
    rep.q -= gaps[i] * t;
  }
  return rep;
}

}  // namespace hk
