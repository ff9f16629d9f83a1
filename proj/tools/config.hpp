#pragma once

#include "hk/vortex.hpp"

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include <array>
#include <fstream>
#include <iomanip>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace hk::cli {

using nlohmann::json;

constexpr const char* kToolVersion = "1.0.0";
constexpr const char* kSchemaHint = "see the 'Configuration' section of README.md";

class UsageError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Config {
  int d1 = -1, d2 = 0;
  int r1 = 1, r2 = 1;
  std::string alpha = "-1/2";
  std::optional<int> div;
  bool trivial = false;
  int grid = 32;
  FlowControls flow;
  std::string phi_seed = "canonical-harmonic";
  std::vector<std::string> sweep_alphas;
  int degree_box = 5;
  std::vector<std::array<int, 4>> witnesses;  ///< explicit (r'1, d'1, r'2, d'2)

  int resolved_div() const { return trivial ? d2 : div.value_or(d1); }
};

inline Rational alpha_of(const Config& c) {
  try {
    return parse_rational(c.alpha);
  } catch (const std::exception& e) {
    throw UsageError(std::string(e.what()) + " (" + kSchemaHint + ")");
  }
}

template <class T>
void read(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw UsageError(std::string("config field '") + key + "': " + e.what() + " (" + kSchemaHint + ")");
  }
}

inline Config config_from_json(const json& j) {
  static const std::set<std::string> known{"d1", "d2", "r1", "r2", "alpha", "div", "extension", "grid", "flow",
                                           "phi_seed", "sweep", "degree_box", "witnesses"};
  if (!j.is_object()) throw UsageError(std::string("config must be a JSON object (") + kSchemaHint + ")");
  for (const auto& [k, v] : j.items())
    if (!known.count(k)) throw UsageError("unknown config field '" + k + "' (" + kSchemaHint + ")");
  Config c;
  read(j, "d1", c.d1);
  read(j, "d2", c.d2);
  read(j, "r1", c.r1);
  read(j, "r2", c.r2);
  if (j.contains("alpha")) {
    if (j["alpha"].is_string()) c.alpha = j["alpha"].get<std::string>();
    else if (j["alpha"].is_number_integer()) c.alpha = std::to_string(j["alpha"].get<long>());
    else throw UsageError(std::string("alpha must be a \"p/q\" string (") + kSchemaHint + ")");
  }
  if (j.contains("div")) c.div = j["div"].get<int>();
  if (j.contains("extension")) {
    std::string e = j["extension"].get<std::string>();
    if (e != "trivial" && e != "nontrivial") throw UsageError("extension must be \"trivial\" or \"nontrivial\"");
    c.trivial = e == "trivial";
  }
  read(j, "grid", c.grid);
  read(j, "phi_seed", c.phi_seed);
  read(j, "degree_box", c.degree_box);
  if (j.contains("flow")) {
    const json& f = j["flow"];
    read(f, "step", c.flow.step);
    read(f, "max_iterations", c.flow.max_iterations);
    read(f, "tolerance", c.flow.tolerance);
    read(f, "divergence_threshold", c.flow.divergence_threshold);
    read(f, "reproject_every", c.flow.reproject_every);
    read(f, "stagnation_window", c.flow.stagnation_window);
  }
  if (j.contains("sweep")) read(j["sweep"], "alphas", c.sweep_alphas);
  if (j.contains("witnesses")) read(j, "witnesses", c.witnesses);
  return c;
}

inline Config load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw UsageError("cannot open config " + path);
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw UsageError("malformed config " + path + ": " + e.what() + " (" + kSchemaHint + ")");
  }
  return config_from_json(j);
}

inline json config_to_json(const Config& c) {
  json j;
  j["d1"] = c.d1;
  j["d2"] = c.d2;
  j["r1"] = c.r1;
  j["r2"] = c.r2;
  j["alpha"] = to_string(alpha_of(c));
  if (c.div) j["div"] = *c.div;
  j["extension"] = c.trivial ? "trivial" : "nontrivial";
  j["grid"] = c.grid;
  j["phi_seed"] = c.phi_seed;
  j["degree_box"] = c.degree_box;
  j["flow"] = {{"step", c.flow.step},
               {"max_iterations", c.flow.max_iterations},
               {"tolerance", c.flow.tolerance},
               {"divergence_threshold", c.flow.divergence_threshold},
               {"reproject_every", c.flow.reproject_every},
               {"stagnation_window", c.flow.stagnation_window}};
  if (!c.sweep_alphas.empty()) j["sweep"] = {{"alphas", c.sweep_alphas}};
  if (!c.witnesses.empty()) j["witnesses"] = c.witnesses;
  return j;
}

inline ProblemSpec problem_of(const Config& c) {
  ProblemSpec s;
  s.d1 = c.d1;
  s.d2 = c.d2;
  s.alpha = alpha_of(c);
  s.grid = TorusGrid(c.grid);
  s.flow = c.flow;
  if (c.phi_seed == "canonical-harmonic") s.seed = PhiSeed::canonical();
  else if (c.phi_seed == "zero") s.seed = PhiSeed::zero();
  else s.seed = PhiSeed::from(load_snapshot(c.phi_seed));
  s.validate();
  return s;
}

/// Constants in effect for every run; part of the manifest.
inline json decision_constants(const FlowControls& f) {
  return {{"discretization", "spectral derivatives, Bloch-periodic columns for twisted sections"},
          {"gauge", "connection 2 pi i delta y dx, y-cycle multiplier exp(-2 pi i delta x)"},
          {"flow", "semi-implicit descent u <- u - h (1 + h Lap)^-1 R, zero-mean gauge on u1 + u2"},
          {"reproject_every", f.reproject_every},
          {"cg_tolerance", f.cg_tolerance},
          {"cg_preconditioner", "pointwise weight"},
          {"divergence", "sup|u1 - u2| above threshold, or stagnation with growing sup|s|"},
          {"quadrature_nodes", f.quadrature_nodes},
          {"phi_normalization", "canonical seed has unit L2 norm on the area-2pi torus"}};
}

inline std::string sha256_hex(const std::string& data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx, data.data(), data.size()) != 1 || EVP_DigestFinal_ex(ctx, md, &len) != 1) {
    EVP_MD_CTX_free(ctx);
    throw std::runtime_error("SHA-256 failed");
  }
  EVP_MD_CTX_free(ctx);
  std::ostringstream os;
  for (unsigned i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
  return os.str();
}

struct Manifest {
  json body;  ///< hashed content
  std::string hash;

  json with_timing(double seconds) const {
    json j = body;
    j["hash"] = hash;
    j["timing_seconds"] = seconds;
    return j;
  }
};

inline Manifest make_manifest(const std::string& command, const Config& c) {
  Manifest m;
  m.body = {{"tool", "hk"},
            {"version", kToolVersion},
            {"command", command},
            {"config", config_to_json(c)},
            {"decisions", decision_constants(c.flow)}};
  m.hash = sha256_hex(m.body.dump());
  return m;
}

/// Config stored in a manifest written by an earlier run.
inline Config config_from_manifest(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw UsageError("cannot open manifest " + path);
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw UsageError("malformed manifest " + path + ": " + e.what());
  }
  if (!j.contains("config")) throw UsageError("manifest has no config section");
  return config_from_json(j["config"]);
}

}  // namespace hk::cli
