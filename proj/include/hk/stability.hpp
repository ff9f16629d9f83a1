#pragma once

#include "hk/rational.hpp"

#include <array>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace hk {

/// Rank and degree of a bundle; the only data the combinatorics sees.
struct BundleInvariant {
  int rank = 1;
  Rational degree = 0;

  BundleInvariant() = default;
  BundleInvariant(int r, Rational d) : rank(r), degree(std::move(d)) {
    if (rank < 1) throw std::invalid_argument("bundle rank must be at least 1");
  }
  Rational slope() const { return degree / rank; }
  bool operator==(const BundleInvariant&) const = default;
};

using MaybeBundle = std::optional<BundleInvariant>;

inline int rank_of(const MaybeBundle& b) { return b ? b->rank : 0; }
inline Rational degree_of(const MaybeBundle& b) { return b ? b->degree : Rational(0); }

/// The pair (E1, E2) that parameters are bound to.
struct BoundPair {
  BundleInvariant e1;
  BundleInvariant e2;

  int rank() const { return e1.rank + e2.rank; }
  Rational degree() const { return e1.degree + e2.degree; }
  Rational slope() const { return degree() / rank(); }
};

/// Weights and twisting parameters (a1, a2, tau1, tau2).
struct ParamTuple {
  Rational a1 = 1, a2 = 1, tau1 = 0, tau2 = 0;

  ParamTuple scaled(const Rational& lambda) const {
    return {lambda * a1, lambda * a2, lambda * tau1, lambda * tau2};
  }
  bool has_zero_weight() const { return a1 == 0 || a2 == 0; }
  bool operator==(const ParamTuple&) const = default;
};

/// Extension parameter alpha together with the derived tau.
struct AlphaParam {
  Rational alpha = 0;
  Rational tau = 0;

  ParamTuple as_tuple() const { return {1, 1, tau, tau - alpha}; }
  bool operator==(const AlphaParam&) const = default;
};

/// tau solving d1 + d2 = r1 tau + r2 (tau - alpha).
inline AlphaParam alpha_param(const Rational& alpha, const BoundPair& pair) {
  return {alpha, (pair.degree() + pair.e2.rank * alpha) / pair.rank()};
}

enum class WitnessKind { Subtriple, SurjectiveSubtriple, Subextension };

/// Numerical invariants of a candidate destabilizer (E'1, E'2).
struct SubobjectWitness {
  MaybeBundle sub1;
  MaybeBundle sub2;
  WitnessKind kind = WitnessKind::Subtriple;

  int r1() const { return rank_of(sub1); }
  int r2() const { return rank_of(sub2); }
  Rational d1() const { return degree_of(sub1); }
  Rational d2() const { return degree_of(sub2); }
  int total_rank() const { return r1() + r2(); }
  bool operator==(const SubobjectWitness&) const = default;
};

inline SubobjectWitness make_witness(int r1, Rational d1, int r2, Rational d2,
                                     WitnessKind kind = WitnessKind::Subtriple) {
  SubobjectWitness w;
  if (r1 > 0) w.sub1 = BundleInvariant(r1, std::move(d1));
  if (r2 > 0) w.sub2 = BundleInvariant(r2, std::move(d2));
  w.kind = kind;
  return w;
}

inline std::string describe(const SubobjectWitness& w) {
  auto side = [](const MaybeBundle& b) {
    return b ? "(" + std::to_string(b->rank) + "," + to_string(b->degree) + ")" : std::string("0");
  };
  return "[" + side(w.sub1) + ", " + side(w.sub2) + "]";
}

enum class Status { Stable, StrictlySemistable, Unstable };

inline const char* to_string(Status s) {
  switch (s) {
    case Status::Stable: return "Stable";
    case Status::StrictlySemistable: return "StrictlySemistable";
    case Status::Unstable: return "Unstable";
  }
  return "?";
}

struct Verdict {
  Status status = Status::Stable;
  std::optional<SubobjectWitness> witness;
  std::optional<Rational> max_theta;
};

/// Checks 0 <= r'_i <= r_i and that the witness is not empty.
inline void validate_witness(const SubobjectWitness& w, const BoundPair& pair) {
  if (w.r1() > pair.e1.rank || w.r2() > pair.e2.rank)
    throw std::invalid_argument("witness rank exceeds ambient rank: " + describe(w));
  if (w.total_rank() == 0) throw std::invalid_argument("empty subobject");
}

/// a1 d'1 + a2 d'2 - tau1 r'1 - tau2 r'2.
inline Rational theta(const ParamTuple& p, const SubobjectWitness& w) {
  return p.a1 * w.d1() + p.a2 * w.d2() - p.tau1 * w.r1() - p.tau2 * w.r2();
}

inline Rational constraint_defect(const ParamTuple& p, const BoundPair& pair) {
  return p.a1 * pair.e1.degree + p.a2 * pair.e2.degree - p.tau1 * pair.e1.rank -
         p.tau2 * pair.e2.rank;
}

inline bool on_constraint(const ParamTuple& p, const BoundPair& pair) {
  return constraint_defect(p, pair) == 0;
}

inline SubobjectWitness full_object(const BoundPair& pair) {
  SubobjectWitness w;
  w.sub1 = pair.e1;
  w.sub2 = pair.e2;
  return w;
}

/// mu(E') + alpha r'2 / r'.
inline Rational alpha_slope(const MaybeBundle& sub1, const MaybeBundle& sub2, const Rational& alpha) {
  int r = rank_of(sub1) + rank_of(sub2);
  if (r == 0) throw std::invalid_argument("empty subobject");
  return (degree_of(sub1) + degree_of(sub2)) / r + alpha * rank_of(sub2) / r;
}

inline Rational alpha_slope(const SubobjectWitness& w, const Rational& alpha) {
  return alpha_slope(w.sub1, w.sub2, alpha);
}

inline Rational alpha_slope(const BoundPair& pair, const Rational& alpha) {
  return alpha_slope(MaybeBundle(pair.e1), MaybeBundle(pair.e2), alpha);
}

/// Stable iff every theta < 0; ties go to the largest (theta, total rank).
inline Verdict verdict(const ParamTuple& p, const BoundPair& pair,
                       const std::vector<SubobjectWitness>& subs) {
  if (!on_constraint(p, pair)) throw std::invalid_argument("parameters off the constraint hyperplane");
  Verdict v;
  const SubobjectWitness* best = nullptr;
  Rational best_theta;
  for (const auto& w : subs) {
    validate_witness(w, pair);
    Rational t = theta(p, w);
    if (!best || t > best_theta || (t == best_theta && w.total_rank() > best->total_rank())) {
      best = &w;
      best_theta = t;
    }
  }
  if (!best) return v;
  v.max_theta = best_theta;
  if (best_theta < 0) return v;
  v.status = best_theta == 0 ? Status::StrictlySemistable : Status::Unstable;
  v.witness = *best;
  return v;
}

inline Verdict verdict(const AlphaParam& a, const BoundPair& pair,
                       const std::vector<SubobjectWitness>& subs) {
  return verdict(a.as_tuple(), pair, subs);
}

/// Interval (lo, hi] with an open lower end.
struct HalfOpenInterval {
  Rational lo;
  Rational hi;
  bool empty() const { return !(lo < hi); }
  bool contains(const Rational& x) const { return lo < x && x <= hi; }
};

/// (mu(E1) - mu(E2), 0].
inline HalfOpenInterval alpha_necessary_interval(const Rational& d1, const Rational& d2, int r1, int r2) {
  if (r1 < 1 || r2 < 1) throw std::invalid_argument("ranks must be at least 1");
  return {d1 / r1 - d2 / r2, 0};
}

enum class Viewpoint { Extension, CohomologyTriple, SurjectiveTriple };

inline const char* to_string(Viewpoint v) {
  switch (v) {
    case Viewpoint::Extension: return "extension";
    case Viewpoint::CohomologyTriple: return "cohomology-triple";
    case Viewpoint::SurjectiveTriple: return "surjective-triple";
  }
  return "?";
}

/// Parameters of one object seen three ways.
struct ViewpointParams {
  std::optional<AlphaParam> extension;
  ParamTuple cohomology;
  ParamTuple surjective;
  bool zero_weight = false;
};

/// Pair (E2, E) carrying the surjective-triple parameters.
inline BoundPair surjective_pair(const BoundPair& pair) {
  return {pair.e2, BundleInvariant(pair.rank(), pair.degree())};
}

inline ParamTuple cohomology_to_surjective(const ParamTuple& p) {
  return {p.a2 - p.a1, p.a1, p.tau2 - p.tau1, p.tau1};
}

inline ParamTuple surjective_to_cohomology(const ParamTuple& s) {
  return {s.a2, s.a1 + s.a2, s.tau2, s.tau1 + s.tau2};
}

/// Converts between the extension, cohomology-triple and surjective-triple viewpoints.
/// Extension parameters exist only when the cohomology weights are equal.
inline ViewpointParams convert_params(Viewpoint source, const ParamTuple& params, const BoundPair& pair,
                                      const Rational& alpha = 0) {
  ViewpointParams out;
  switch (source) {
    case Viewpoint::Extension: {
      AlphaParam a = alpha_param(alpha, pair);
      out.extension = a;
      out.cohomology = a.as_tuple();
      out.surjective = cohomology_to_surjective(out.cohomology);
      break;
    }
    case Viewpoint::CohomologyTriple:
      if (!on_constraint(params, pair)) throw std::invalid_argument("parameters off the constraint hyperplane");
      out.cohomology = params;
      out.surjective = cohomology_to_surjective(params);
      break;
    case Viewpoint::SurjectiveTriple:
      if (!on_constraint(params, surjective_pair(pair)))
        throw std::invalid_argument("parameters off the constraint hyperplane");
      out.surjective = params;
      out.cohomology = surjective_to_cohomology(params);
      break;
  }
  if (!out.extension && out.cohomology.a1 == out.cohomology.a2 && out.cohomology.a1 > 0) {
    ParamTuple n = out.cohomology.scaled(1 / out.cohomology.a1);
    out.extension = AlphaParam{n.tau1 - n.tau2, n.tau1};
  }
  out.zero_weight = out.cohomology.has_zero_weight() || out.surjective.has_zero_weight();
  return out;
}

/// Witness (E'2, E'1 + E'2) of the surjective triple attached to (E'1, E'2).
inline SubobjectWitness surjective_witness(const SubobjectWitness& w) {
  SubobjectWitness s;
  s.sub1 = w.sub2;
  if (w.total_rank() > 0) s.sub2 = BundleInvariant(w.total_rank(), w.d1() + w.d2());
  s.kind = WitnessKind::SurjectiveSubtriple;
  return s;
}

/// Both sides of theta_{a1,a2,t1,t2}(E'1,E'2) = theta_{a2-a1,a1,t2-t1,t1}(E'2,E').
inline std::pair<Rational, Rational> theta_swap_identity(const ParamTuple& p, const SubobjectWitness& w) {
  return {theta(p, w), theta(cohomology_to_surjective(p), surjective_witness(w))};
}

/// Verdicts of the same witness list in all three viewpoints.
struct ThreeWayVerdict {
  Verdict alpha_slope;
  Verdict cohomology;
  Verdict surjective;
  bool agree() const {
    return alpha_slope.status == cohomology.status && cohomology.status == surjective.status;
  }
};

inline ThreeWayVerdict three_way_verdict(const Rational& alpha, const BoundPair& pair,
                                         const std::vector<SubobjectWitness>& subs) {
  ThreeWayVerdict out;
  ViewpointParams vp = convert_params(Viewpoint::Extension, {}, pair, alpha);
  Rational full = alpha_slope(pair, alpha);
  const SubobjectWitness* best = nullptr;
  Rational best_gap;
  for (const auto& w : subs) {
    validate_witness(w, pair);
    Rational gap = alpha_slope(w, alpha) - full;
    if (!best || gap > best_gap || (gap == best_gap && w.total_rank() > best->total_rank())) {
      best = &w;
      best_gap = gap;
    }
  }
  if (best && best_gap >= 0) {
    out.alpha_slope.status = best_gap == 0 ? Status::StrictlySemistable : Status::Unstable;
    out.alpha_slope.witness = *best;
  }
  if (best) out.alpha_slope.max_theta = best_gap;
  out.cohomology = verdict(vp.cohomology, pair, subs);
  std::vector<SubobjectWitness> surj;
  surj.reserve(subs.size());
  for (const auto& w : subs) surj.push_back(surjective_witness(w));
  out.surjective = verdict(vp.surjective, surjective_pair(pair), surj);
  return out;
}

/// Data for splitting a non-surjective subtriple (E', E'2) of a surjective triple.
struct SurjectiveSplitInput {
  MaybeBundle source_sub;  ///< E' inside E
  MaybeBundle target_sub;  ///< E'2 inside E2
  MaybeBundle kernel;      ///< Ker(pi')
  MaybeBundle image;       ///< pi'(E')
  MaybeBundle preimage;    ///< pi^{-1}(E'2)
};

struct SurjectiveSplitRecord {
  Rational theta_full;
  Rational theta_image;
  Rational theta_preimage;
  Rational delta_d;
  Rational delta_r;
  Rational lhs;
  Rational rhs;
};

/// Surjective-triple defect: a1 weighs the target slot, a2 the source slot.
inline Rational surjective_theta(const ParamTuple& p, const MaybeBundle& source, const MaybeBundle& target) {
  return p.a1 * degree_of(target) + p.a2 * degree_of(source) - p.tau1 * rank_of(target) -
         p.tau2 * rank_of(source);
}

inline SurjectiveSplitRecord surjective_split(const ParamTuple& p, const SurjectiveSplitInput& in) {
  auto additive = [](const MaybeBundle& whole, const MaybeBundle& a, const MaybeBundle& b) {
    return rank_of(whole) == rank_of(a) + rank_of(b) && degree_of(whole) == degree_of(a) + degree_of(b);
  };
  if (!additive(in.source_sub, in.kernel, in.image))
    throw std::invalid_argument("kernel and image do not add up to the source subobject");
  if (!additive(in.preimage, in.kernel, in.target_sub))
    throw std::invalid_argument("kernel and target subobject do not add up to the preimage");
  SurjectiveSplitRecord r;
  r.delta_d = degree_of(in.preimage) - degree_of(in.source_sub);
  r.delta_r = rank_of(in.preimage) - rank_of(in.source_sub);
  if (r.delta_r < 0) throw std::invalid_argument("image rank exceeds target subobject rank");
  r.theta_full = surjective_theta(p, in.source_sub, in.target_sub);
  r.theta_image = surjective_theta(p, in.source_sub, in.image);
  r.theta_preimage = surjective_theta(p, in.preimage, in.target_sub);
  r.lhs = 2 * r.theta_full;
  r.rhs = r.theta_image + r.theta_preimage + (p.a1 - p.a2) * r.delta_d + (p.tau2 - p.tau1) * r.delta_r;
  if (r.lhs != r.rhs) throw std::logic_error("surjective split identity violated");
  return r;
}

struct EpsilonRegionReport {
  Rational gap;  ///< tau1/a1 - mu(E1)
  bool stable_set_empty = false;
  bool first_inequality = false;
  bool second_inequality = false;
  bool in_region = false;
};

inline EpsilonRegionReport epsilon_region_report(const BoundPair& pair, const ParamTuple& p,
                                                 const Rational& eps1, const Rational& eps2) {
  if (p.a1 == 0 || p.a2 == 0) throw std::invalid_argument("region undefined");
  EpsilonRegionReport r;
  r.gap = p.tau1 / p.a1 - pair.e1.slope();
  r.stable_set_empty = r.gap <= 0;
  r.first_inequality = 0 < r.gap && r.gap < eps1;
  r.second_inequality = r.gap < (p.a2 / p.a1) * eps2;
  r.in_region = r.first_inequality && r.second_inequality;
  return r;
}

/// Slope-difference expansion of theta used to separate the two semistability conditions.
inline std::array<Rational, 4> theta_four_terms(const ParamTuple& p, const BoundPair& pair,
                                                const SubobjectWitness& w) {
  if (p.a1 == 0 || p.a2 == 0) throw std::invalid_argument("region undefined");
  Rational gap = p.tau1 / p.a1 - pair.e1.slope();
  int r1 = pair.e1.rank, r2 = pair.e2.rank;
  return {p.a2 * (w.d2() - w.r2() * pair.e2.slope()),
          p.a1 * (w.d1() - w.r1() * pair.e1.slope()),
          p.a1 * (r1 - w.r1()) * gap,
          -p.a2 * r1 * Rational(r2 - w.r2(), r2) * (gap / (p.a2 / p.a1))};
}

}  // namespace hk
