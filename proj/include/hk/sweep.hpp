#pragma once

#include "hk/chamber.hpp"
#include "hk/vortex.hpp"

#include <algorithm>
#include <functional>
#include <future>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace hk {

struct SweepEntry {
  Rational alpha;
  SolveResult result;
  ExtensionClassification classification;
};

/// Open interval between the last sweep point without a property and the first one with it.
struct Transition {
  std::optional<Rational> below, above;
};

struct BoundarySummary {
  Transition solver;        ///< non-Converged to Converged
  Transition verdict;       ///< non-Stable to Stable
  bool pointwise_agreement = true;  ///< Converged exactly where Stable
  bool coincide = true;             ///< transitions match within one sweep step
  int indeterminate = 0;
};

struct SweepReport {
  std::vector<SweepEntry> entries;  ///< increasing alpha
  BoundarySummary summary;
};

namespace detail {

inline Transition first_transition(const std::vector<SweepEntry>& e, const std::function<bool(const SweepEntry&)>& has) {
  Transition t;
  for (std::size_t i = 0; i < e.size(); ++i) {
    if (!has(e[i])) continue;
    t.above = e[i].alpha;
    if (i > 0) t.below = e[i - 1].alpha;
    break;
  }
  return t;
}

}  // namespace detail

/// Solves the extension problem of `base` at each alpha; independent instances run on up to
/// `threads` workers.  `div` is the maximal lifted-line degree used for the verdict column.
inline SweepReport run_sweep(const ProblemSpec& base, std::vector<Rational> alphas, int div, unsigned threads = 0) {
  std::sort(alphas.begin(), alphas.end());
  alphas.erase(std::unique(alphas.begin(), alphas.end()), alphas.end());
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  SweepReport rep;
  rep.entries.reserve(alphas.size());
  std::size_t next = 0;
  while (next < alphas.size()) {
    std::vector<std::future<SolveResult>> batch;
    std::size_t start = next;
    for (; next < alphas.size() && next - start < threads; ++next) {
      ProblemSpec spec = base;
      spec.alpha = alphas[next];
      batch.push_back(std::async(std::launch::async, [spec] { return solve(spec); }));
    }
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const Rational& a = alphas[start + i];
      rep.entries.push_back({a, batch[i].get(), classify_extension(base.d1, base.d2, div, a)});
    }
  }
  auto& s = rep.summary;
  auto converged = [](const SweepEntry& e) { return e.result.status == SolveStatus::Converged; };
  auto stable = [](const SweepEntry& e) { return e.classification.verdict.status == Status::Stable; };
  for (const auto& e : rep.entries) {
    if (converged(e) != stable(e)) s.pointwise_agreement = false;
    if (e.result.status == SolveStatus::Indeterminate) ++s.indeterminate;
  }
  s.solver = detail::first_transition(rep.entries, converged);
  s.verdict = detail::first_transition(rep.entries, stable);
  auto index = [&](const std::optional<Rational>& a) -> long {
    if (!a) return -1;
    for (std::size_t i = 0; i < rep.entries.size(); ++i)
      if (rep.entries[i].alpha == *a) return static_cast<long>(i);
    return -1;
  };
  long si = index(s.solver.above), vi = index(s.verdict.above);
  s.coincide = (si < 0) == (vi < 0) && std::abs(si - vi) <= 1;
  return rep;
}

}  // namespace hk
