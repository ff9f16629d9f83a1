#include "config.hpp"

#include "hk/chamber.hpp"
#include "hk/invariants.hpp"
#include "hk/stability.hpp"
#include "hk/sweep.hpp"
#include "hk/vortex.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace hk;
using namespace hk::cli;

namespace {

enum Exit { kOk = 0, kError = 1, kIndeterminate = 2 };

struct Overrides {
  std::string config, manifest;
  std::optional<int> d1, d2, r1, r2, grid, div, box;
  std::optional<std::string> alpha;
  bool trivial = false;
};

void add_common(CLI::App* app, Overrides& o) {
  app->add_option("-c,--config", o.config, "JSON config file");
  app->add_option("--d1", o.d1, "degree of the sub line bundle");
  app->add_option("--d2", o.d2, "degree of the quotient line bundle");
  app->add_option("--alpha", o.alpha, "stability parameter as p/q");
  app->add_option("--div", o.div, "maximal degree of a lifted line subbundle");
  app->add_flag("--trivial", o.trivial, "use the split extension");
}

Config resolve(const Overrides& o) {
  Config c = !o.manifest.empty() ? config_from_manifest(o.manifest) : (o.config.empty() ? Config{} : load_config(o.config));
  if (o.d1) c.d1 = *o.d1;
  if (o.d2) c.d2 = *o.d2;
  if (o.r1) c.r1 = *o.r1;
  if (o.r2) c.r2 = *o.r2;
  if (o.grid) c.grid = *o.grid;
  if (o.div) c.div = *o.div;
  if (o.box) c.degree_box = *o.box;
  if (o.alpha) c.alpha = *o.alpha;
  if (o.trivial) c.trivial = true;
  alpha_of(c);
  return c;
}

std::string params_text(const ParamTuple& p) {
  return "(" + to_string(p.a1) + ", " + to_string(p.a2) + ", " + to_string(p.tau1) + ", " + to_string(p.tau2) + ")";
}

std::string set_text(const std::set<int>& s) {
  std::string out = "{";
  for (int x : s) out += (out.size() > 1 ? "," : "") + std::to_string(x);
  return out + "}";
}

std::vector<SubobjectWitness> witness_source(const Config& c, std::string& label) {
  if (!c.witnesses.empty()) {
    label = "explicit witness list";
    std::vector<SubobjectWitness> out;
    for (const auto& w : c.witnesses) out.push_back(make_witness(w[0], w[1], w[2], w[3]));
    return out;
  }
  if (c.r1 != 1 || c.r2 != 1) throw UsageError("higher ranks need an explicit 'witnesses' list");
  label = "line-bundle extension, div " + std::to_string(c.resolved_div()) + (c.trivial ? " (split)" : "");
  return admissible_witnesses_line_case(c.d1, c.d2, c.resolved_div());
}

int cmd_analyze(const Config& c) {
  BoundPair pair{BundleInvariant(c.r1, c.d1), BundleInvariant(c.r2, c.d2)};
  Rational alpha = alpha_of(c);
  std::string label;
  auto subs = witness_source(c, label);
  ViewpointParams vp = convert_params(Viewpoint::Extension, {}, pair, alpha);
  ThreeWayVerdict v = three_way_verdict(alpha, pair, subs);
  Manifest m = make_manifest("analyze", c);
  std::cout << "# manifest " << m.hash << "\n";
  std::cout << "pair (" << c.r1 << "," << c.d1 << ") (" << c.r2 << "," << c.d2 << "), alpha " << to_string(alpha)
            << ", witnesses: " << label << "\n";
  auto row = [&](const char* view, const std::string& params, const Verdict& vd) {
    std::cout << std::left << std::setw(20) << view << std::setw(30) << params << std::setw(20) << to_string(vd.status)
              << (vd.witness ? describe(*vd.witness) : std::string("-")) << "\n";
  };
  std::cout << std::left << std::setw(20) << "viewpoint" << std::setw(30) << "parameters" << std::setw(20) << "status"
            << "witness\n";
  row("extension", "alpha=" + to_string(alpha), v.alpha_slope);
  row("cohomology-triple", params_text(vp.cohomology), v.cohomology);
  row("surjective-triple", params_text(vp.surjective), v.surjective);
  if (v.cohomology.status == Status::StrictlySemistable) std::cout << "note: parameter lies on a wall\n";
  if (!v.agree()) {
    std::cerr << "error: viewpoint verdicts disagree\n";
    return kError;
  }
  return kOk;
}

int cmd_walls(const Config& c, const std::string& plot) {
  Manifest m = make_manifest("walls", c);
  std::cout << "# manifest " << m.hash << "\n";
  WallReport rep = enumerate_walls(c.d1, c.d2, c.r1, c.r2, c.degree_box);
  std::cout << "degree box " << rep.degree_box << ", " << rep.witnesses_scanned << " witnesses, " << rep.walls.size()
            << " distinct walls\n";
  for (const auto& w : rep.walls) {
    std::cout << "  " << std::left << std::setw(22) << describe(w.witness) << " normal (";
    for (int i = 0; i < 4; ++i) std::cout << to_string(w.normal[i]) << (i < 3 ? "," : ")");
    std::cout << " alpha " << (w.alpha ? to_string(*w.alpha) : std::string("-")) << " mult " << w.multiplicity
              << (w.degenerate ? " degenerate" : "") << "\n";
  }
  bool line = c.r1 == 1 && c.r2 == 1 && c.d1 < c.d2;
  if (line) {
    std::cout << "critical alpha values:";
    for (int a : alpha_critical_values(c.d1, c.d2)) std::cout << " " << a;
    std::cout << "\n";
    AlphaStratification s = strata_diagram(c.d1, c.d2);
    for (std::size_t i = 0; i < s.strata.size(); ++i) {
      std::cout << s.strata[i].label << " " << set_text(s.strata[i].members);
      std::cout << (i < s.chain.size() ? std::string(" ") + to_string(s.chain[i]) + " " : "\n");
    }
  }
  if (!plot.empty()) {
    std::ofstream os(plot);
    if (!os) throw std::runtime_error("cannot write " + plot);
    os << "# manifest " << m.hash << "\n";
    if (line) {
      os << "# alpha stable_nontrivial_extensions\n";
      for (Rational a = Rational(c.d1 - c.d2 - 1); a <= c.d2 - c.d1 + 1; a += Rational(1, 4)) {
        int count = 0;
        for (int div = c.d1; div < c.d2; ++div) count += classify_extension(c.d1, c.d2, div, a).verdict.status == Status::Stable;
        os << to_double(a) << " " << count << "\n";
      }
    } else {
      os << "# alpha multiplicity\n";
      for (const auto& w : rep.walls)
        if (w.alpha) os << to_double(*w.alpha) << " " << w.multiplicity << "\n";
    }
  }
  return kOk;
}

int cmd_strata(const Config& c) {
  Manifest m = make_manifest("strata", c);
  std::cout << "# manifest " << m.hash << "\n";
  AlphaStratification s = strata_diagram(c.d1, c.d2);
  std::cout << "extensions of degree " << c.d2 << " by degree " << c.d1 << ", labelled by div\n";
  for (std::size_t i = 0; i < s.strata.size(); ++i) {
    std::cout << s.strata[i].label << " = " << set_text(s.strata[i].members);
    if (i < s.chain.size()) std::cout << "  " << to_string(s.chain[i]);
    std::cout << "\n";
  }
  std::cout << "Ext* = " << set_text(s.nontrivial) << ", Ext_ss = " << set_text(s.semistable)
            << ", Ext_s = " << set_text(s.stable) << "\n";
  std::cout << "first stratum vs Ext*: " << to_string(s.first_vs_nontrivial) << "\n";
  std::cout << "Ext_- (" << stratum_label(s.minus_index) << ") vs Ext_ss: " << to_string(s.minus_vs_semistable) << "\n";
  std::cout << "Ext_+ (" << stratum_label(s.plus_index) << ") vs Ext_s: " << to_string(s.plus_vs_stable) << "\n";
  return kOk;
}

void write_outputs(const fs::path& dir, const Manifest& m, const SolveResult& r, double seconds) {
  fs::create_directories(dir);
  {
    std::ofstream os(dir / "manifest.json");
    os << m.with_timing(seconds).dump(2) << "\n";
  }
  {
    std::ofstream os(dir / "history.csv");
    write_history_csv(os, r.state.history, m.hash);
  }
  const auto& g = r.state.grid;
  save_snapshot((dir / "u1.field").string(), TwistedField(g, 0, FormType::Function, r.state.coords.u1.cast<cplx>()), m.hash);
  save_snapshot((dir / "u2.field").string(), TwistedField(g, 0, FormType::Function, r.state.coords.u2.cast<cplx>()), m.hash);
  save_snapshot((dir / "phi.field").string(), r.state.phi, m.hash);
}

int cmd_solve(const Config& c, const std::string& out) {
  ProblemSpec spec = problem_of(c);
  Manifest m = make_manifest("solve", c);
  auto t0 = std::chrono::steady_clock::now();
  SolveResult r = solve(spec);
  double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (!out.empty()) write_outputs(out, m, r, seconds);
  std::cout << "# manifest " << m.hash << "\n";
  std::cout << "status " << to_string(r.status) << " after " << r.state.iteration << " iterations (" << r.reason << ")\n";
  std::cout << std::setprecision(6) << "sup residual " << r.state.residual.sup_norm << ", M " << r.state.functional
            << ", sup|s| " << sup_s(r.state.coords) << "\n";
  if (r.status == SolveStatus::Converged) {
    Rank2Report rk = assemble_rank2(r.state, spec);
    std::cout << "rank-2 deviation: diagonal " << rk.diagonal_deviation << ", off-diagonal " << rk.off_diagonal_deviation;
    if (rk.pi_pi_star_defect) std::cout << ", pi pi^* + alpha " << *rk.pi_pi_star_defect;
    std::cout << "\n";
    if (c.r1 == 1 && c.r2 == 1 && c.d1 < c.d2)
      for (const auto& w : admissible_witnesses_line_case(c.d1, c.d2, c.resolved_div())) {
        Certificate cert = stability_certificate(r.state, spec, w);
        std::cout << "certificate " << describe(w) << ": theta " << to_string(cert.theta) << ", slack " << cert.slack << "\n";
      }
  } else {
    std::cout << "growth trace (sup|s|, M), last entries:\n";
    std::size_t from = r.growth_trace.size() > 5 ? r.growth_trace.size() - 5 : 0;
    for (std::size_t i = from; i < r.growth_trace.size(); ++i)
      std::cout << "  " << r.growth_trace[i].first << " " << r.growth_trace[i].second << "\n";
  }
  return r.status == SolveStatus::Indeterminate ? kIndeterminate : kOk;
}

int cmd_sweep(Config c, const std::vector<std::string>& alphas, unsigned threads, const std::string& out) {
  if (!alphas.empty()) c.sweep_alphas = alphas;
  if (c.sweep_alphas.empty()) throw UsageError("sweep needs alphas (--alphas or sweep.alphas in the config)");
  std::vector<Rational> values;
  for (const auto& a : c.sweep_alphas) values.push_back(parse_rational(a));
  ProblemSpec base = problem_of(c);
  Manifest m = make_manifest("sweep", c);
  SweepReport rep = run_sweep(base, values, c.resolved_div(), threads);
  std::ostringstream table;
  table << "# manifest " << m.hash << "\n";
  table << "alpha,status,iterations,sup_residual,verdict\n";
  for (const auto& e : rep.entries)
    table << to_string(e.alpha) << "," << to_string(e.result.status) << "," << e.result.state.iteration << ","
          << std::setprecision(6) << e.result.state.residual.sup_norm << "," << to_string(e.classification.verdict.status)
          << "\n";
  std::cout << table.str();
  auto interval = [](const Transition& t) {
    return "(" + (t.below ? to_string(*t.below) : std::string("-inf")) + ", " +
           (t.above ? to_string(*t.above) : std::string("none")) + "]";
  };
  const auto& s = rep.summary;
  std::cout << "solver boundary in " << interval(s.solver) << ", verdict boundary in " << interval(s.verdict) << "\n";
  std::cout << "boundaries coincide within one step: " << (s.coincide ? "yes" : "no")
            << ", pointwise agreement: " << (s.pointwise_agreement ? "yes" : "no")
            << ", indeterminate runs: " << s.indeterminate << "\n";
  if (!out.empty()) {
    fs::create_directories(out);
    std::ofstream(fs::path(out) / "sweep.csv") << table.str();
    std::ofstream(fs::path(out) / "manifest.json") << m.with_timing(0).dump(2) << "\n";
  }
  return s.indeterminate > 0 ? kIndeterminate : kOk;
}

int cmd_verify(int grid, unsigned threads) {
  using namespace hk::invariants;
  std::vector<CheckResult> results{line_extensions(), conversions(), discrete_geometry(), functional_properties()};
  SweepCheck sweep = correspondence(grid, threads);
  results.push_back(sweep.result);
  results.push_back(certificates(sweep));
  results.push_back(substitution(sweep));
  bool ok = true;
  for (const auto& r : results) {
    std::cout << (r.passed ? "PASS " : "FAIL ") << r.name << " [" << std::fixed << std::setprecision(1) << r.seconds
              << "s] " << r.detail << "\n";
    ok = ok && r.passed;
  }
  return ok ? kOk : kError;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stability analysis and vortex solver for holomorphic extensions"};
  app.require_subcommand(1);
  Overrides o;
  std::string out, plot;
  std::vector<std::string> alphas;
  unsigned threads = 0;
  int verify_grid = 64;

  auto* analyze = app.add_subcommand("analyze", "verdicts in the extension, cohomology and surjective viewpoints");
  add_common(analyze, o);
  analyze->add_option("--r1", o.r1, "rank of the first bundle");
  analyze->add_option("--r2", o.r2, "rank of the second bundle");

  auto* walls = app.add_subcommand("walls", "walls in parameter space and the critical alpha values");
  add_common(walls, o);
  walls->add_option("--r1", o.r1, "rank of the first bundle");
  walls->add_option("--r2", o.r2, "rank of the second bundle");
  walls->add_option("--box", o.box, "degree box radius for the witness scan");
  walls->add_option("--plot", plot, "write two-column plot data to this file");

  auto* strata = app.add_subcommand("strata", "alpha-strata of extensions of line bundles");
  add_common(strata, o);

  auto* solve_cmd = app.add_subcommand("solve", "solve the vortex equations by gradient flow");
  add_common(solve_cmd, o);
  solve_cmd->add_option("--grid", o.grid, "grid points per side");
  solve_cmd->add_option("--replay", o.manifest, "re-run the configuration stored in a manifest");
  solve_cmd->add_option("-o,--out", out, "output directory for manifest, history and fields");

  auto* sweep = app.add_subcommand("sweep", "solve over a list of alpha values and compare with the verdicts");
  add_common(sweep, o);
  sweep->add_option("--grid", o.grid, "grid points per side");
  sweep->add_option("--alphas", alphas, "alpha values as p/q")->delimiter(',');
  sweep->add_option("--threads", threads, "worker threads (0 = hardware)");
  sweep->add_option("-o,--out", out, "output directory");

  auto* verify = app.add_subcommand("verify", "run the invariant suite");
  verify->add_option("--grid", verify_grid, "grid for the correspondence sweep");
  verify->add_option("--threads", threads, "worker threads (0 = hardware)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kError;
  }

  try {
    if (verify->parsed()) return cmd_verify(verify_grid, threads);
    Config c = resolve(o);
    if (analyze->parsed()) return cmd_analyze(c);
    if (walls->parsed()) return cmd_walls(c, plot);
    if (strata->parsed()) return cmd_strata(c);
    if (solve_cmd->parsed()) return cmd_solve(c, out);
    if (sweep->parsed()) return cmd_sweep(c, alphas, threads, out);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kError;
  }
  return kError;
}
