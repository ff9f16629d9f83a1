#pragma once

// Sections of degree-delta line bundles on the flat unit torus of area 2*pi.
//
// A section s of twist delta satisfies s(x+1, y) = s(x, y) and
// s(x, y+1) = exp(-2*pi*i*delta*x) s(x, y).  It carries the unitary connection
// d + 2*pi*i*delta*y dx, whose curvature integrates to delta.  Samples live on the
// N x N grid x_j = j/N, y_k = k/N with flat index j*N + k.
//
// Derivatives are spectral in both directions: rows (fixed y) are periodic in x,
// columns (fixed x) are Bloch-periodic in y with phase -2*pi*delta*x_j.  For
// delta = 0 this is the ordinary Fourier derivative.  (0,1)-forms are stored by
// their coefficient against the unit-norm frame d(zbar)/|d(zbar)|, so pointwise
// norms of functions and forms are both |value|^2.

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <complex>
#include <fstream>
#include <numbers>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace hk {

using cplx = std::complex<double>;
using RealField = Eigen::VectorXd;
using ComplexField = Eigen::VectorXcd;

constexpr double kPi = std::numbers::pi;

struct TorusGrid {
  int n = 32;

  explicit TorusGrid(int points = 32) : n(points) {
    if (n < 16 || n % 2 != 0) throw std::invalid_argument("grid size must be even and at least 16");
  }
  int size() const { return n * n; }
  double h() const { return 1.0 / n; }
  double cell_area() const { return 2.0 * kPi / (double(n) * n); }
  double total_area() const { return 2.0 * kPi; }
  int index(int j, int k) const { return j * n + k; }
  double x(int j) const { return double(j) / n; }
  double y(int k) const { return double(k) / n; }
  bool operator==(const TorusGrid&) const = default;
};

enum class FormType { Function, ZeroOneForm };

inline const char* to_string(FormType f) { return f == FormType::Function ? "function" : "zero-one"; }

struct TwistedField {
  TorusGrid grid;
  int twist = 0;
  FormType form = FormType::Function;
  ComplexField values;

  TwistedField(TorusGrid g, int delta, FormType f) : grid(g), twist(delta), form(f), values(ComplexField::Zero(g.size())) {}
  TwistedField(TorusGrid g, int delta, FormType f, ComplexField v) : grid(g), twist(delta), form(f), values(std::move(v)) {
    if (values.size() != grid.size()) throw std::invalid_argument("field size does not match grid");
  }
};

/// Metric K e^u on a degree-d line bundle.
struct ConformalExponent {
  TorusGrid grid;
  int degree = 0;
  RealField values;

  ConformalExponent(TorusGrid g, int d) : grid(g), degree(d), values(RealField::Zero(g.size())) {}
  ConformalExponent(TorusGrid g, int d, RealField v) : grid(g), degree(d), values(std::move(v)) {}
};

class LinearSolveError : public std::runtime_error {
 public:
  LinearSolveError(const std::string& what, int iterations, double residual)
      : std::runtime_error(what), iterations(iterations), relative_residual(residual) {}
  int iterations;
  double relative_residual;
};

namespace spectral {

inline Eigen::FFT<double>& fft() {
  thread_local Eigen::FFT<double> engine;
  return engine;
}

inline double wavenumber(int i, int n) { return i < n / 2 ? i : i - n; }

/// Applies a diagonal symbol along x (rows of fixed y) in place.
template <class Symbol>
void along_x(ComplexField& v, int n, Symbol symbol) {
  std::vector<cplx> a(n), b(n);
  for (int k = 0; k < n; ++k) {
    for (int j = 0; j < n; ++j) a[j] = v[j * n + k];
    fft().fwd(b, a);
    for (int m = 0; m < n; ++m) b[m] *= symbol(k, wavenumber(m, n));
    fft().inv(a, b);
    for (int j = 0; j < n; ++j) v[j * n + k] = a[j];
  }
}

/// Applies a diagonal symbol along y (columns of fixed x) in place.
template <class Symbol>
void along_y(ComplexField& v, int n, Symbol symbol) {
  std::vector<cplx> a(n), b(n);
  for (int j = 0; j < n; ++j) {
    for (int k = 0; k < n; ++k) a[k] = v[j * n + k];
    fft().fwd(b, a);
    for (int m = 0; m < n; ++m) b[m] *= symbol(j, wavenumber(m, n));
    fft().inv(a, b);
    for (int k = 0; k < n; ++k) v[j * n + k] = a[k];
  }
}

/// Covariant derivative D_x = d/dx + 2 pi i delta y.
inline ComplexField dx(const ComplexField& s, const TorusGrid& g, int delta) {
  int n = g.n;
  ComplexField out = s;
  along_x(out, n, [](int, double m) { return cplx(0.0, 2.0 * kPi * m); });
  for (int j = 0; j < n; ++j)
    for (int k = 0; k < n; ++k) out[j * n + k] += cplx(0.0, 2.0 * kPi * delta * g.y(k)) * s[j * n + k];
  return out;
}

/// Covariant derivative D_y = d/dy on Bloch-periodic columns.
inline ComplexField dy(const ComplexField& s, const TorusGrid& g, int delta) {
  int n = g.n;
  ComplexField out(s.size());
  std::vector<cplx> ph(n);
  for (int j = 0; j < n; ++j) {
    double theta = -2.0 * kPi * delta * g.x(j);
    for (int k = 0; k < n; ++k) {
      ph[k] = std::polar(1.0, theta * g.y(k));
      out[j * n + k] = s[j * n + k] * std::conj(ph[k]);
    }
  }
  along_y(out, n, [&](int j, double m) { return cplx(0.0, 2.0 * kPi * m - 2.0 * kPi * delta * g.x(j)); });
  for (int j = 0; j < n; ++j)
    for (int k = 0; k < n; ++k) out[j * n + k] *= std::polar(1.0, -2.0 * kPi * delta * g.x(j) * g.y(k));
  return out;
}

/// Applies a radial symbol f(a^2 + b^2) to a periodic field.
template <class Symbol>
ComplexField radial(const ComplexField& s, int n, Symbol f) {
  ComplexField out(s.size());
  // forward transform in x, then y, scale, then inverse in y and x
  std::vector<cplx> a(n), b(n);
  ComplexField hat(s.size());
  for (int k = 0; k < n; ++k) {
    for (int j = 0; j < n; ++j) a[j] = s[j * n + k];
    fft().fwd(b, a);
    for (int m = 0; m < n; ++m) hat[m * n + k] = b[m];
  }
  for (int ma = 0; ma < n; ++ma) {
    for (int k = 0; k < n; ++k) a[k] = hat[ma * n + k];
    fft().fwd(b, a);
    double wa = wavenumber(ma, n);
    for (int mb = 0; mb < n; ++mb) {
      double wb = wavenumber(mb, n);
      b[mb] *= f(wa * wa + wb * wb);
    }
    fft().inv(a, b);
    for (int k = 0; k < n; ++k) hat[ma * n + k] = a[k];
  }
  for (int k = 0; k < n; ++k) {
    for (int m = 0; m < n; ++m) b[m] = hat[m * n + k];
    fft().inv(a, b);
    for (int j = 0; j < n; ++j) out[j * n + k] = a[j];
  }
  return out;
}

}  // namespace spectral

inline const double kDbarScale = 1.0 / (2.0 * std::sqrt(kPi));

/// Twisted Cauchy-Riemann operator on coefficient vectors.
inline ComplexField dbar(const ComplexField& s, const TorusGrid& g, int delta) {
  return kDbarScale * (spectral::dx(s, g, delta) + cplx(0, 1) * spectral::dy(s, g, delta));
}

/// Flat L2 adjoint of dbar.
inline ComplexField dbar_adj(const ComplexField& t, const TorusGrid& g, int delta) {
  return -kDbarScale * (spectral::dx(t, g, delta) - cplx(0, 1) * spectral::dy(t, g, delta));
}

/// Adjoint of dbar for the inner products weighted by rho.
inline ComplexField dbar_adj(const ComplexField& t, const TorusGrid& g, int delta, const RealField& rho) {
  ComplexField rt = rho.cast<cplx>().cwiseProduct(t);
  return dbar_adj(rt, g, delta).cwiseQuotient(rho.cast<cplx>());
}

inline TwistedField dbar(const TwistedField& f, int operator_twist) {
  if (f.form != FormType::Function) throw std::invalid_argument("dbar expects a function");
  if (f.twist != operator_twist) throw std::invalid_argument("twist mismatch between operator and field");
  return {f.grid, f.twist, FormType::ZeroOneForm, dbar(f.values, f.grid, f.twist)};
}

inline TwistedField dbar(const TwistedField& f) { return dbar(f, f.twist); }

/// Weight e^{u1 - u2} of Hom(L2, L1) for metrics K e^{u_i}.
inline RealField hom_weight(const ConformalExponent& u1, const ConformalExponent& u2) {
  return (u1.values - u2.values).array().exp().matrix();
}

inline TwistedField dbar_adj(const TwistedField& t, const std::optional<RealField>& rho = std::nullopt) {
  if (t.form != FormType::ZeroOneForm) throw std::invalid_argument("dbar_adj expects a (0,1)-form");
  ComplexField v = rho ? dbar_adj(t.values, t.grid, t.twist, *rho) : dbar_adj(t.values, t.grid, t.twist);
  return {t.grid, t.twist, FormType::Function, std::move(v)};
}

inline TwistedField dbar_adj(const TwistedField& t, const ConformalExponent& u1, const ConformalExponent& u2) {
  return dbar_adj(t, hom_weight(u1, u2));
}

/// Bochner-Kodaira form of dbar dbar^* on (0,1)-forms: -(D_x^2 + D_y^2)/(4 pi) + delta/2.
inline ComplexField form_laplacian(const ComplexField& t, const TorusGrid& g, int delta) {
  ComplexField xx = spectral::dx(spectral::dx(t, g, delta), g, delta);
  ComplexField yy = spectral::dy(spectral::dy(t, g, delta), g, delta);
  return -(xx + yy) / (4.0 * kPi) + 0.5 * delta * t;
}

/// Positive Laplacian -(d_xx + d_yy)/(4 pi), equal to dbar^* dbar on functions.
inline RealField laplacian(const RealField& u, const TorusGrid& g) {
  ComplexField c = u.cast<cplx>();
  RealField out = spectral::radial(c, g.n, [](double k2) { return kPi * k2; }).real();
  out.array() -= out.mean();  // the range is mean-free; remove rounding in the zero mode
  out.array() -= out.mean();
  return out;
}

inline RealField laplacian(const ConformalExponent& u) { return laplacian(u.values, u.grid); }

/// (I + h Laplacian)^{-1}.
inline RealField resolvent(const RealField& u, const TorusGrid& g, double h) {
  ComplexField c = u.cast<cplx>();
  return spectral::radial(c, g.n, [h](double k2) { return 1.0 / (1.0 + h * kPi * k2); }).real();
}

/// Trigonometric interpolation of a periodic real field onto a finer grid.
inline RealField fourier_interpolate(const RealField& u, const TorusGrid& from, const TorusGrid& to) {
  int n = from.n, m = to.n;
  if (m < n) throw std::invalid_argument("interpolation target must not be coarser");
  ComplexField c = u.cast<cplx>();
  std::vector<cplx> a(n), b(n), big(m), out(m);
  ComplexField hat(n * n);
  for (int k = 0; k < n; ++k) {
    for (int j = 0; j < n; ++j) a[j] = c[j * n + k];
    spectral::fft().fwd(b, a);
    for (int i = 0; i < n; ++i) hat[i * n + k] = b[i];
  }
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < n; ++k) a[k] = hat[i * n + k];
    spectral::fft().fwd(b, a);
    for (int k = 0; k < n; ++k) hat[i * n + k] = b[k] / double(n * n);
  }
  // zero padding with the Nyquist coefficient split evenly between +n/2 and -n/2
  Eigen::MatrixXcd padded = Eigen::MatrixXcd::Zero(m, m);
  auto targets = [&](int i) {
    std::vector<std::pair<int, double>> t;
    int w = static_cast<int>(spectral::wavenumber(i, n));
    if (i == n / 2) {
      t.push_back({n / 2, 0.5});
      t.push_back({m - n / 2, 0.5});
    } else {
      t.push_back({w >= 0 ? w : m + w, 1.0});
    }
    return t;
  };
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < n; ++k)
      for (auto [ti, wi] : targets(i))
        for (auto [tk, wk] : targets(k)) padded(ti, tk) += wi * wk * hat[i * n + k];
  RealField res(m * m);
  Eigen::MatrixXcd tmp(m, m);
  for (int i = 0; i < m; ++i) {
    for (int k = 0; k < m; ++k) big[k] = padded(i, k);
    spectral::fft().inv(out, big);
    for (int k = 0; k < m; ++k) tmp(i, k) = out[k] * double(m);
  }
  for (int k = 0; k < m; ++k) {
    for (int i = 0; i < m; ++i) big[i] = tmp(i, k);
    spectral::fft().inv(out, big);
    for (int j = 0; j < m; ++j) res[j * m + k] = (out[j] * double(m)).real();
  }
  return res;
}

inline double integrate(const RealField& f, const TorusGrid& g) { return f.sum() * g.cell_area(); }
inline cplx integrate(const ComplexField& f, const TorusGrid& g) { return f.sum() * g.cell_area(); }

inline cplx inner(const ComplexField& a, const ComplexField& b, const TorusGrid& g) {
  return a.dot(b) * g.cell_area();
}

inline cplx inner(const ComplexField& a, const ComplexField& b, const TorusGrid& g, const RealField& rho) {
  return a.dot(rho.cast<cplx>().cwiseProduct(b)) * g.cell_area();
}

inline double norm2(const ComplexField& a, const TorusGrid& g) { return a.squaredNorm() * g.cell_area(); }

inline double norm2(const ComplexField& a, const TorusGrid& g, const RealField& rho) {
  return rho.dot(a.cwiseAbs2()) * g.cell_area();
}

/// Pointwise curvature d + Laplacian(u) of K e^u.
inline RealField curvature(const ConformalExponent& u) {
  return laplacian(u).array() + double(u.degree);
}

struct ProjectionResult {
  TwistedField phi;
  TwistedField potential;  ///< phi = phi0 + dbar(potential)
  int iterations = 0;
  double relative_residual = 0.0;
};

struct CgOptions {
  double tolerance = 1e-10;
  int max_iterations = 5000;
};

/// Harmonic representative of the class of phi0 for the weight rho: phi0 + dbar(a) with
/// dbar^*_rho(phi) = 0.  Solved by preconditioned CG on dbar^* rho dbar with preconditioner rho.
inline ProjectionResult harmonic_project(const TwistedField& phi0, const std::optional<RealField>& rho = std::nullopt,
                                         const std::optional<ComplexField>& warm_start = std::nullopt,
                                         const CgOptions& opt = {}) {
  if (phi0.form != FormType::ZeroOneForm) throw std::invalid_argument("harmonic_project expects a (0,1)-form");
  const TorusGrid& g = phi0.grid;
  int delta = phi0.twist;
  RealField w = rho ? *rho : RealField::Ones(g.size());
  ComplexField wc = w.cast<cplx>();
  auto apply = [&](const ComplexField& a) { return dbar_adj(ComplexField(wc.cwiseProduct(dbar(a, g, delta))), g, delta); };
  ComplexField b = -dbar_adj(ComplexField(wc.cwiseProduct(phi0.values)), g, delta);
  ComplexField x = warm_start ? *warm_start : ComplexField::Zero(g.size());
  // residuals are measured against the weighted input so already-harmonic forms return at once
  double bnorm = std::max(b.norm(), wc.cwiseProduct(phi0.values).norm());
  ProjectionResult out{phi0, TwistedField(g, delta, FormType::Function, x), 0, 0.0};
  if (bnorm == 0.0) {
    out.phi.values = phi0.values + dbar(x, g, delta);
    return out;
  }
  ComplexField r = b - apply(x);
  ComplexField z = r.cwiseQuotient(wc);
  ComplexField p = z;
  cplx rz = r.dot(z);
  int it = 0;
  double rel = r.norm() / bnorm;
  while (rel > opt.tolerance && it < opt.max_iterations) {
    ComplexField ap = apply(p);
    cplx alpha = rz / p.dot(ap);
    x += alpha * p;
    r -= alpha * ap;
    z = r.cwiseQuotient(wc);
    cplx rz_new = r.dot(z);
    p = z + (rz_new / rz) * p;
    rz = rz_new;
    ++it;
    rel = r.norm() / bnorm;
  }
  if (rel > opt.tolerance) {
    std::ostringstream os;
    os << "harmonic projection did not converge: relative residual " << rel << " after " << it << " iterations";
    throw LinearSolveError(os.str(), it, rel);
  }
  out.potential.values = x;
  out.phi.values = phi0.values + dbar(x, g, delta);
  out.iterations = it;
  out.relative_residual = rel;
  return out;
}

/// Orthonormal harmonic (0,1)-forms for the flat metric: theta functions for delta < 0,
/// the constant form for delta = 0, none for delta > 0.
inline std::vector<ComplexField> harmonic_basis(const TorusGrid& g, int delta) {
  std::vector<ComplexField> out;
  if (delta > 0) return out;
  if (delta == 0) {
    out.push_back(ComplexField::Constant(g.size(), cplx(1.0 / std::sqrt(g.total_area()))));
    return out;
  }
  int q = -delta;
  for (int r = 0; r < q; ++r) {
    ComplexField f = ComplexField::Zero(g.size());
    for (int j = 0; j < g.n; ++j)
      for (int k = 0; k < g.n; ++k) {
        cplx acc = 0;
        for (int n = r - 12 * q; n <= r + 13 * q; n += q) {
          double t = q * g.y(k) - n;
          acc += std::polar(std::exp(-kPi * t * t / q), 2.0 * kPi * n * g.x(j));
        }
        f[g.index(j, k)] = acc;
      }
    f /= std::sqrt(norm2(f, g));
    out.push_back(std::move(f));
  }
  return out;
}

/// Unit-norm harmonic seed: the first basis theta function (or the constant form).
inline TwistedField canonical_harmonic(const TorusGrid& g, int delta) {
  auto basis = harmonic_basis(g, delta);
  if (basis.empty()) throw std::invalid_argument("no harmonic (0,1)-forms for positive twist");
  TwistedField seed(g, delta, FormType::ZeroOneForm, basis.front());
  TwistedField phi = harmonic_project(seed).phi;
  phi.values /= std::sqrt(norm2(phi.values, g));
  return phi;
}

/// Closed-form weighted harmonic representative rho^{-1} sum c_i psi_i in the class of phi0.
inline ComplexField harmonic_closed_form(const ComplexField& phi0, const TorusGrid& g, int delta, const RealField& rho) {
  auto basis = harmonic_basis(g, delta);
  int q = static_cast<int>(basis.size());
  if (q == 0) return ComplexField::Zero(g.size());
  RealField inv = rho.cwiseInverse();
  Eigen::MatrixXcd gram(q, q);
  Eigen::VectorXcd rhs(q);
  for (int i = 0; i < q; ++i) {
    rhs[i] = inner(basis[i], phi0, g);
    for (int j = 0; j < q; ++j) gram(i, j) = inner(basis[i], ComplexField(inv.cast<cplx>().cwiseProduct(basis[j])), g);
  }
  Eigen::VectorXcd c = gram.lu().solve(rhs);
  ComplexField out = ComplexField::Zero(g.size());
  for (int i = 0; i < q; ++i) out += c[i] * basis[i];
  return inv.cast<cplx>().cwiseProduct(out);
}

struct KernelReport {
  int dimension = 0;
  double threshold = 0.0;
  std::vector<double> smallest;  ///< lowest singular values in increasing order
};

/// Dimension of the kernel of the (0,1)-form Laplacian by thresholding its singular values.
inline KernelReport form_kernel_dimension(const TorusGrid& g, int delta, double threshold = 1e-6, int keep = 8) {
  int n = g.size();
  Eigen::MatrixXcd a(n, n);
  ComplexField e = ComplexField::Zero(n);
  for (int i = 0; i < n; ++i) {
    e[i] = 1.0;
    a.col(i) = form_laplacian(e, g, delta);
    e[i] = 0.0;
  }
  Eigen::MatrixXcd herm = 0.5 * (a + a.adjoint());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(herm, Eigen::EigenvaluesOnly);
  std::vector<double> sv(n);
  for (int i = 0; i < n; ++i) sv[i] = std::abs(es.eigenvalues()[i]);
  std::sort(sv.begin(), sv.end());
  KernelReport r;
  r.threshold = threshold;
  for (double s : sv) r.dimension += s < threshold ? 1 : 0;
  r.smallest.assign(sv.begin(), sv.begin() + std::min(keep, n));
  return r;
}

struct HolonomyReport {
  std::vector<cplx> y_cycle;       ///< multiplier of the y-shift at each x_j
  double accumulated_phase = 0.0;  ///< winding of the multiplier once around the x-cycle
  cplx net = 1.0;                  ///< exp(i * accumulated_phase)
};

/// Follows the y-shift multiplier exp(-2 pi i delta x) step by step around the x-cycle.
/// The accumulated phase is -2 pi delta, the degree read off the factor of automorphy.
inline HolonomyReport holonomy(const TorusGrid& g, int delta) {
  HolonomyReport rep;
  auto multiplier = [&](double x) { return std::polar(1.0, -2.0 * kPi * delta * x); };
  for (int j = 0; j < g.n; ++j) rep.y_cycle.push_back(multiplier(g.x(j)));
  for (int j = 0; j < g.n; ++j) {
    cplx next = multiplier(g.x(j) + g.h());
    rep.accumulated_phase += std::arg(next / rep.y_cycle[j]);
  }
  rep.net = std::polar(1.0, rep.accumulated_phase);
  return rep;
}

constexpr int kSnapshotVersion = 1;

/// Text snapshot: header line, grid size, twist, form type, an optional manifest hash,
/// then N*N "re im" lines in index order j*N + k.
inline void write_snapshot(std::ostream& os, const TwistedField& f, const std::string& manifest_hash = "") {
  os << "hk-field " << kSnapshotVersion << "\n";
  os << "n " << f.grid.n << "\n";
  os << "twist " << f.twist << "\n";
  os << "form " << to_string(f.form) << "\n";
  if (!manifest_hash.empty()) os << "manifest " << manifest_hash << "\n";
  os.precision(17);
  for (int i = 0; i < f.values.size(); ++i) os << f.values[i].real() << " " << f.values[i].imag() << "\n";
}

inline TwistedField read_snapshot(std::istream& is) {
  std::string tag, key, form;
  int version = 0, n = 0, twist = 0;
  if (!(is >> tag >> version) || tag != "hk-field") throw std::runtime_error("not a field snapshot");
  if (version != kSnapshotVersion) throw std::runtime_error("unsupported snapshot version " + std::to_string(version));
  if (!(is >> key >> n) || key != "n") throw std::runtime_error("snapshot: missing grid size");
  if (!(is >> key >> twist) || key != "twist") throw std::runtime_error("snapshot: missing twist");
  if (!(is >> key >> form) || key != "form") throw std::runtime_error("snapshot: missing form type");
  FormType ft;
  if (form == "function") ft = FormType::Function;
  else if (form == "zero-one") ft = FormType::ZeroOneForm;
  else throw std::runtime_error("snapshot: unknown form type " + form);
  TwistedField f(TorusGrid(n), twist, ft);
  is >> std::ws;
  if (is.peek() == 'm') {
    std::string hash;
    if (!(is >> key >> hash) || key != "manifest") throw std::runtime_error("snapshot: malformed manifest line");
  }
  for (int i = 0; i < f.values.size(); ++i) {
    double re, im;
    if (!(is >> re >> im)) throw std::runtime_error("snapshot: truncated samples");
    f.values[i] = cplx(re, im);
  }
  return f;
}

inline void save_snapshot(const std::string& path, const TwistedField& f, const std::string& manifest_hash = "") {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  write_snapshot(os, f, manifest_hash);
}

inline TwistedField load_snapshot(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read " + path);
  return read_snapshot(is);
}

}  // namespace hk
