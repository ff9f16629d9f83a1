#pragma once

#include "hk/stability.hpp"

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace hk {

/// Wall {theta(params, witness) = 0} inside the constraint hyperplane.
struct Wall {
  SubobjectWitness witness;
  std::array<Rational, 4> normal;  ///< (d'1, d'2, -r'1, -r'2)
  bool degenerate = false;         ///< normal parallel to the constraint normal
  int multiplicity = 1;            ///< witnesses in the box inducing this wall
  std::optional<Rational> alpha;   ///< crossing point on the a1 = a2 = 1 slice
};

struct WallReport {
  int degree_box = 0;
  std::size_t witnesses_scanned = 0;
  std::vector<Wall> walls;
};

namespace detail {

using Row = std::array<Rational, 4>;

/// Reduced row echelon form of the span of two rows; identifies the wall plane.
inline std::vector<Row> rref(std::vector<Row> rows) {
  std::size_t lead = 0;
  std::vector<Row> out;
  for (int col = 0; col < 4 && lead < rows.size(); ++col) {
    std::size_t piv = lead;
    while (piv < rows.size() && rows[piv][col] == 0) ++piv;
    if (piv == rows.size()) continue;
    std::swap(rows[piv], rows[lead]);
    Rational inv = 1 / rows[lead][col];
    for (auto& x : rows[lead]) x *= inv;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (i == lead || rows[i][col] == 0) continue;
      Rational f = rows[i][col];
      for (int j = 0; j < 4; ++j) rows[i][j] -= f * rows[lead][j];
    }
    ++lead;
  }
  rows.resize(lead);
  return rows;
}

inline std::string key(const std::vector<Row>& rows) {
  std::string k;
  for (const auto& r : rows)
    for (const auto& x : r) k += to_string(x) + ",";
  return k;
}

}  // namespace detail

/// alpha at which theta of the witness vanishes on the extension slice, if isolated.
inline std::optional<Rational> wall_alpha(const BoundPair& pair, const SubobjectWitness& w) {
  Rational r = pair.rank();
  Rational coeff = w.r2() - w.total_rank() * pair.e2.rank / r;
  if (coeff == 0) return std::nullopt;
  return (w.total_rank() * pair.degree() / r - (w.d1() + w.d2())) / coeff;
}

/// Brute-force walls of witnesses with 0 <= r'_i <= r_i and |d'_i| <= degree_box.
inline WallReport enumerate_walls(int d1, int d2, int r1, int r2, int degree_box) {
  if (r1 < 1 || r2 < 1) throw std::invalid_argument("ranks must be at least 1");
  if (degree_box < std::max(std::abs(d1), std::abs(d2)))
    throw std::invalid_argument("degree box smaller than the ambient degrees");
  BoundPair pair{BundleInvariant(r1, d1), BundleInvariant(r2, d2)};
  detail::Row c{Rational(d1), Rational(d2), Rational(-r1), Rational(-r2)};
  WallReport rep;
  rep.degree_box = degree_box;
  std::map<std::string, std::size_t> seen;
  for (int s1 = 0; s1 <= r1; ++s1)
    for (int s2 = 0; s2 <= r2; ++s2) {
      if (s1 == 0 && s2 == 0) continue;
      int lo1 = s1 ? -degree_box : 0, hi1 = s1 ? degree_box : 0;
      int lo2 = s2 ? -degree_box : 0, hi2 = s2 ? degree_box : 0;
      for (int e1 = lo1; e1 <= hi1; ++e1)
        for (int e2 = lo2; e2 <= hi2; ++e2) {
          ++rep.witnesses_scanned;
          SubobjectWitness w = make_witness(s1, e1, s2, e2);
          detail::Row n{Rational(e1), Rational(e2), Rational(-s1), Rational(-s2)};
          auto plane = detail::rref({c, n});
          std::string k = detail::key(plane);
          auto it = seen.find(k);
          if (it != seen.end()) {
            ++rep.walls[it->second].multiplicity;
            continue;
          }
          Wall wall{w, n, plane.size() < 2, 1, wall_alpha(pair, w)};
          seen.emplace(k, rep.walls.size());
          rep.walls.push_back(std::move(wall));
        }
    }
  return rep;
}

inline void require_line_case(int d1, int d2) {
  if (d1 >= d2)
    throw std::invalid_argument("outside the line-bundle extension hypotheses (requires d1 < d2)");
}

/// {d1-d2, d1-d2+2, ..., d2-d1}.
inline std::vector<int> alpha_critical_values(int d1, int d2) {
  require_line_case(d1, d2);
  std::vector<int> v;
  for (int a = d1 - d2; a <= d2 - d1; a += 2) v.push_back(a);
  return v;
}

/// Trivial subextension (L1, 0).
inline SubobjectWitness line_sub_witness(int d1) {
  return make_witness(1, d1, 0, 0, WitnessKind::Subextension);
}

/// Line subbundle of degree dl mapping onto its image in L2.
inline SubobjectWitness lifted_line_witness(int dl) {
  return make_witness(0, 0, 1, dl, WitnessKind::Subextension);
}

/// (L1, 0) and the lifted lines of degree div, div-1, ..., div-depth.
/// Lower degrees never bind since theta grows with the lifted degree.
inline std::vector<SubobjectWitness> admissible_witnesses_line_case(int d1, int d2, int div, int depth = 3) {
  require_line_case(d1, d2);
  if (div > d2) throw std::invalid_argument("div exceeds d2");
  std::vector<SubobjectWitness> out{line_sub_witness(d1)};
  for (int dl = div; dl >= div - depth; --dl) out.push_back(lifted_line_witness(dl));
  return out;
}

struct ExtensionClassification {
  Verdict verdict;
  std::optional<int> stratum;  ///< k with k < alpha < k + 2, k = d1 - d2 mod 2
};

inline std::string stratum_label(int k) { return "Ext_" + std::to_string(k); }

/// Stratum index containing alpha, or none when alpha is a critical value.
inline std::optional<int> stratum_index(int d1, int d2, const Rational& alpha) {
  Rational shifted = (alpha - (d1 - d2)) / 2;
  BigInt fl = numerator(shifted) / denominator(shifted);
  if (fl * denominator(shifted) > numerator(shifted)) fl -= 1;
  if (Rational(fl) == shifted) return std::nullopt;
  return static_cast<int>(fl) * 2 + (d1 - d2);
}

/// Stable iff d1-d2 < alpha < d1+d2-2 div; the endpoints are strictly semistable.
inline ExtensionClassification classify_extension(int d1, int d2, int div, const Rational& alpha) {
  require_line_case(d1, d2);
  if (div > d2) throw std::invalid_argument("div exceeds d2");
  ExtensionClassification out;
  out.stratum = stratum_index(d1, d2, alpha);
  Rational lo = d1 - d2, hi = d1 + d2 - 2 * div;
  AlphaParam a = alpha_param(alpha, {BundleInvariant(1, d1), BundleInvariant(1, d2)});
  if (lo < alpha && alpha < hi) {
    out.verdict.max_theta = std::max(theta(a.as_tuple(), line_sub_witness(d1)),
                                     theta(a.as_tuple(), lifted_line_witness(div)));
    return out;
  }
  SubobjectWitness w = alpha <= lo ? line_sub_witness(d1) : lifted_line_witness(div);
  out.verdict.witness = w;
  out.verdict.max_theta = theta(a.as_tuple(), w);
  out.verdict.status = (alpha == lo || alpha == hi) ? Status::StrictlySemistable : Status::Unstable;
  return out;
}

struct Stratum {
  int k = 0;
  std::string label;
  std::set<int> members;  ///< div values of non-trivial extensions in the stratum
};

enum class Relation { Equal, StrictSuperset, StrictSubset, Incomparable };

inline const char* to_string(Relation r) {
  switch (r) {
    case Relation::Equal: return "=";
    case Relation::StrictSuperset: return "⊋";
    case Relation::StrictSubset: return "⊊";
    case Relation::Incomparable: return "incomparable";
  }
  return "?";
}

inline Relation compare_sets(const std::set<int>& a, const std::set<int>& b) {
  if (a == b) return Relation::Equal;
  if (std::includes(a.begin(), a.end(), b.begin(), b.end())) return Relation::StrictSuperset;
  if (std::includes(b.begin(), b.end(), a.begin(), a.end())) return Relation::StrictSubset;
  return Relation::Incomparable;
}

struct AlphaStratification {
  int d1 = 0, d2 = 0;
  std::vector<int> critical_values;
  std::vector<Stratum> strata;        ///< increasing k
  std::vector<Relation> chain;        ///< relation of strata[i] to strata[i+1]
  int minus_index = 0, plus_index = 0;
  std::set<int> nontrivial, semistable, stable;
  Relation first_vs_nontrivial = Relation::Equal;
  Relation minus_vs_semistable = Relation::Equal;
  Relation plus_vs_stable = Relation::Equal;
};

/// Strata Ext_k over the non-trivial extensions, membership decided by the witness verdict.
/// Extensions are parametrized by div in [d1, d2 - 1].
inline AlphaStratification strata_diagram(int d1, int d2) {
  require_line_case(d1, d2);
  AlphaStratification s;
  s.d1 = d1;
  s.d2 = d2;
  s.critical_values = alpha_critical_values(d1, d2);
  bool even = (d1 - d2) % 2 == 0;
  s.minus_index = even ? -2 : -1;
  s.plus_index = even ? 0 : 1;
  BoundPair pair{BundleInvariant(1, d1), BundleInvariant(1, d2)};
  for (int div = d1; div < d2; ++div) {
    s.nontrivial.insert(div);
    if (2 * div <= d1 + d2) s.semistable.insert(div);
    if (2 * div < d1 + d2) s.stable.insert(div);
  }
  int top = std::max(d2 - d1 - 2, s.plus_index);
  for (int k = d1 - d2; k <= top; k += 2) {
    Stratum st{k, stratum_label(k), {}};
    Rational alpha = k + 1;
    for (int div : s.nontrivial) {
      Verdict v = verdict(alpha_param(alpha, pair), pair, admissible_witnesses_line_case(d1, d2, div));
      if (v.status == Status::Stable) st.members.insert(div);
    }
    s.strata.push_back(std::move(st));
  }
  for (std::size_t i = 0; i + 1 < s.strata.size(); ++i)
    s.chain.push_back(compare_sets(s.strata[i].members, s.strata[i + 1].members));
  auto find = [&](int k) -> const Stratum& {
    for (const auto& st : s.strata)
      if (st.k == k) return st;
    throw std::logic_error("stratum index out of range");
  };
  s.first_vs_nontrivial = compare_sets(s.strata.front().members, s.nontrivial);
  s.minus_vs_semistable = compare_sets(find(s.minus_index).members, s.semistable);
  s.plus_vs_stable = compare_sets(find(s.plus_index).members, s.stable);
  return s;
}

}  // namespace hk
