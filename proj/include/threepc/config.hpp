// Copyright 2026 The threepc Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// =============================================================================
#ifndef THREEPC_CONFIG_HPP
#define THREEPC_CONFIG_HPP

#include <fstream>
#include <initializer_list>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "threepc/compressors.hpp"
#include "threepc/core.hpp"
#include "threepc/engine.hpp"
#include "threepc/mechanisms.hpp"
#include "threepc/problems.hpp"
#include "threepc/theory.hpp"

namespace threepc {

using json = nlohmann::json;

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ProblemKind { Quadratic, Snapshot, LibSVM, SyntheticLogReg };

struct ProblemConfig {
  ProblemKind kind = ProblemKind::Quadratic;
  std::size_t n = 10;
  std::size_t d = 100;
  double lambda = 1e-6;  // quadratic shift, or logreg regularizer
  double s = 0.0;
  std::uint64_t seed = 0;
  std::string path;
  std::size_t samples = 1000;
};

enum class StepsizeRule { Explicit, NonConvex, PL };

struct ExperimentConfig {
  ProblemConfig problem;
  MethodSpec method;
  StepsizeRule rule = StepsizeRule::NonConvex;
  double gamma = 0.0;  // Explicit only
  double multiplier = 1.0;
  RunConfig run;
};

enum class Selection { BitsToTolerance, FinalGradNormSq };

struct SweepConfig {
  ExperimentConfig base;
  std::vector<double> multipliers;
  std::vector<std::size_t> k_grid;
  std::vector<double> zeta_grid;
  Selection selection = Selection::BitsToTolerance;
};

struct VerifyCase {
  MethodSpec method;
  std::size_t d = 10;
  std::size_t triples = 10000;
  std::size_t trials = 1000;
  std::size_t n_workers = 1;
  double b_scale = 1.0;
  bool adversarial = false;
};

struct VerifyConfig {
  std::uint64_t seed = 0;
  std::vector<VerifyCase> cases;
};

/// Multipliers 2⁰, 2¹, …, 2¹¹.
inline std::vector<double> default_multipliers() {
  std::vector<double> m;
  for (int e = 0; e <= 11; ++e) m.push_back(static_cast<double>(1u << e));
  return m;
}

namespace detail {

inline void only_keys(const json& j, std::initializer_list<const char*> keys,
                      const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& item : j.items()) {
    bool known = false;
    for (const char* k : keys)
      if (item.key() == k) known = true;
    if (!known) throw ConfigError(where + ": unknown field '" + item.key() + "'");
  }
}

template <class T>
T get(const json& j, const char* key, const std::string& where) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

template <class T>
void get_opt(const json& j, const char* key, T& out, const std::string& where) {
  if (j.contains(key)) out = get<T>(j, key, where);
}

template <class T>
void get_opt(const json& j, const char* key, std::optional<T>& out,
             const std::string& where) {
  if (j.contains(key) && !j.at(key).is_null()) out = get<T>(j, key, where);
}

}  // namespace detail

inline CompressorKind compressor_kind_from(const std::string& s) {
  if (s == "identity") return CompressorKind::Identity;
  if (s == "top_k") return CompressorKind::TopK;
  if (s == "rand_k") return CompressorKind::RandKUnbiased;
  if (s == "crand_k") return CompressorKind::CRandK;
  if (s == "perm_k") return CompressorKind::PermK;
  if (s == "cperm_k") return CompressorKind::CPermK;
  if (s == "bernoulli") return CompressorKind::BernoulliP;
  if (s == "compose") return CompressorKind::Compose;
  throw ConfigError("unknown compressor kind '" + s + "'");
}

inline Method method_from(const std::string& s) {
  for (Method m : {Method::EF21, Method::LAG, Method::CLAG, Method::V1,
                   Method::V2, Method::V3, Method::V4, Method::V5,
                   Method::MARINA})
    if (to_string(m) == s) return m;
  throw ConfigError("unknown method '" + s + "'");
}

inline CompressorSpec compressor_from_json(const json& j,
                                           const std::string& where) {
  if (j.is_string()) {
    CompressorSpec c;
    c.kind = compressor_kind_from(j.get<std::string>());
    return c;
  }
  detail::only_keys(j, {"kind", "k", "p", "shared_seed", "parts"}, where);
  CompressorSpec c;
  c.kind = compressor_kind_from(detail::get<std::string>(j, "kind", where));
  detail::get_opt(j, "k", c.k, where);
  detail::get_opt(j, "p", c.p, where);
  detail::get_opt(j, "shared_seed", c.shared_seed, where);
  if (j.contains("parts")) {
    const json& parts = j.at("parts");
    if (!parts.is_array()) throw ConfigError(where + ".parts: expected array");
    for (std::size_t i = 0; i < parts.size(); ++i)
      c.parts.push_back(
          compressor_from_json(parts[i], where + ".parts[" + std::to_string(i) + "]"));
  }
  return c;
}

inline json compressor_to_json(const CompressorSpec& c) {
  json j;
  j["kind"] = [&] {
    switch (c.kind) {
      case CompressorKind::Identity: return "identity";
      case CompressorKind::TopK: return "top_k";
      case CompressorKind::RandKUnbiased: return "rand_k";
      case CompressorKind::CRandK: return "crand_k";
      case CompressorKind::PermK: return "perm_k";
      case CompressorKind::CPermK: return "cperm_k";
      case CompressorKind::BernoulliP: return "bernoulli";
      case CompressorKind::Compose: return "compose";
    }
    return "?";
  }();
  if (c.kind == CompressorKind::TopK || c.kind == CompressorKind::RandKUnbiased ||
      c.kind == CompressorKind::CRandK)
    j["k"] = c.k;
  if (c.kind == CompressorKind::BernoulliP) j["p"] = c.p;
  if (c.shared_seed) j["shared_seed"] = true;
  if (!c.parts.empty()) {
    j["parts"] = json::array();
    for (const auto& p : c.parts) j["parts"].push_back(compressor_to_json(p));
  }
  return j;
}

inline MethodSpec method_from_json(const json& j, const std::string& where) {
  if (j.is_string()) {
    MethodSpec m;
    m.method = method_from(j.get<std::string>());
    return m;
  }
  detail::only_keys(j,
                    {"name", "compressor", "compressor2", "q", "zeta", "p",
                     "per_worker_coin", "trigger", "inner"},
                    where);
  MethodSpec m;
  m.method = method_from(detail::get<std::string>(j, "name", where));
  if (j.contains("compressor"))
    m.c = compressor_from_json(j.at("compressor"), where + ".compressor");
  if (j.contains("compressor2"))
    m.c2 = compressor_from_json(j.at("compressor2"), where + ".compressor2");
  if (j.contains("q")) m.q = compressor_from_json(j.at("q"), where + ".q");
  detail::get_opt(j, "zeta", m.zeta, where);
  detail::get_opt(j, "p", m.p, where);
  detail::get_opt(j, "per_worker_coin", m.per_worker_coin, where);
  if (j.contains("trigger")) {
    const auto t = detail::get<std::string>(j, "trigger", where);
    if (t == "gradient")
      m.trigger = LagTrigger::GradientDifference;
    else if (t == "iterate")
      m.trigger = LagTrigger::IterateDifference;
    else
      throw ConfigError(where + ".trigger: expected 'gradient' or 'iterate'");
  }
  if (j.contains("inner"))
    m.inner = std::make_shared<const MethodSpec>(
        method_from_json(j.at("inner"), where + ".inner"));
  return m;
}

inline json method_to_json(const MethodSpec& m) {
  json j;
  j["name"] = to_string(m.method);
  switch (m.method) {
    case Method::LAG: j["zeta"] = m.zeta; break;
    case Method::CLAG:
      j["zeta"] = m.zeta;
      j["compressor"] = compressor_to_json(m.c);
      break;
    case Method::EF21:
    case Method::V1: j["compressor"] = compressor_to_json(m.c); break;
    case Method::V2:
      j["q"] = compressor_to_json(m.q);
      j["compressor"] = compressor_to_json(m.c);
      break;
    case Method::V3:
      j["compressor"] = compressor_to_json(m.c);
      if (m.inner) j["inner"] = method_to_json(*m.inner);
      break;
    case Method::V4:
      j["compressor"] = compressor_to_json(m.c);
      j["compressor2"] = compressor_to_json(m.c2);
      break;
    case Method::V5:
      j["p"] = m.p;
      j["compressor"] = compressor_to_json(m.c);
      break;
    case Method::MARINA:
      j["p"] = m.p;
      j["q"] = compressor_to_json(m.q);
      break;
  }
  if (m.per_worker_coin) j["per_worker_coin"] = true;
  if (m.trigger == LagTrigger::IterateDifference) j["trigger"] = "iterate";
  return j;
}

inline ProblemConfig problem_from_json(const json& j) {
  const std::string where = "problem";
  detail::only_keys(j, {"type", "n", "d", "lambda", "s", "seed", "path", "samples"},
                    where);
  ProblemConfig p;
  const auto type = detail::get<std::string>(j, "type", where);
  if (type == "quadratic")
    p.kind = ProblemKind::Quadratic;
  else if (type == "snapshot")
    p.kind = ProblemKind::Snapshot;
  else if (type == "libsvm")
    p.kind = ProblemKind::LibSVM;
  else if (type == "synthetic_logreg")
    p.kind = ProblemKind::SyntheticLogReg;
  else
    throw ConfigError("problem.type: unknown '" + type + "'");
  if (p.kind == ProblemKind::LibSVM || p.kind == ProblemKind::SyntheticLogReg) {
    p.lambda = 0.1;
    p.n = 20;
  }
  detail::get_opt(j, "n", p.n, where);
  detail::get_opt(j, "d", p.d, where);
  detail::get_opt(j, "lambda", p.lambda, where);
  detail::get_opt(j, "s", p.s, where);
  detail::get_opt(j, "seed", p.seed, where);
  detail::get_opt(j, "path", p.path, where);
  detail::get_opt(j, "samples", p.samples, where);
  if ((p.kind == ProblemKind::Snapshot || p.kind == ProblemKind::LibSVM) &&
      p.path.empty())
    throw ConfigError("problem.path is required for type '" + type + "'");
  return p;
}

inline json problem_to_json(const ProblemConfig& p) {
  json j;
  switch (p.kind) {
    case ProblemKind::Quadratic:
      j = {{"type", "quadratic"}, {"n", p.n}, {"d", p.d},
           {"lambda", p.lambda},   {"s", p.s}, {"seed", p.seed}};
      break;
    case ProblemKind::Snapshot: j = {{"type", "snapshot"}, {"path", p.path}}; break;
    case ProblemKind::LibSVM:
      j = {{"type", "libsvm"}, {"path", p.path}, {"n", p.n},
           {"lambda", p.lambda}, {"seed", p.seed}};
      break;
    case ProblemKind::SyntheticLogReg:
      j = {{"type", "synthetic_logreg"}, {"samples", p.samples}, {"d", p.d},
           {"n", p.n}, {"lambda", p.lambda}, {"seed", p.seed}};
      break;
  }
  return j;
}

inline std::unique_ptr<Problem> make_problem(const ProblemConfig& p) {
  switch (p.kind) {
    case ProblemKind::Quadratic:
      return std::make_unique<QuadraticProblem>(
          gen_quadratic(p.n, p.d, p.lambda, p.s, p.seed));
    case ProblemKind::Snapshot: {
      std::ifstream in(p.path, std::ios::binary);
      if (!in) throw ConfigError("cannot open snapshot '" + p.path + "'");
      return std::make_unique<QuadraticProblem>(read_snapshot(in));
    }
    case ProblemKind::LibSVM: {
      const Dataset ds = parse_libsvm_file(p.path);
      return std::make_unique<LogRegProblem>(
          partition_even(ds, p.n, RngStream(p.seed).derive("partition", 0)),
          p.lambda);
    }
    case ProblemKind::SyntheticLogReg: {
      const Dataset ds = make_synthetic_logreg(p.samples, p.d, p.seed);
      return std::make_unique<LogRegProblem>(
          partition_even(ds, p.n, RngStream(p.seed).derive("partition", 0)),
          p.lambda);
    }
  }
  throw ConfigError("unknown problem kind");
}

inline void stop_from_json(const json& j, StopRule& s) {
  const std::string where = "stop";
  detail::only_keys(j,
                    {"grad_norm_sq_tol", "grad_norm_tol", "suboptimality_tol",
                     "bit_budget_per_worker", "wall_clock_seconds"},
                    where);
  detail::get_opt(j, "grad_norm_sq_tol", s.grad_norm_sq_tol, where);
  detail::get_opt(j, "grad_norm_tol", s.grad_norm_tol, where);
  detail::get_opt(j, "suboptimality_tol", s.suboptimality_tol, where);
  detail::get_opt(j, "bit_budget_per_worker", s.bit_budget_per_worker, where);
  if (j.contains("wall_clock_seconds")) {
    if (j.at("wall_clock_seconds").is_null())
      s.wall_clock_seconds.reset();
    else
      s.wall_clock_seconds = detail::get<double>(j, "wall_clock_seconds", where);
  }
  const int rules = int(s.grad_norm_sq_tol.has_value()) +
                    int(s.grad_norm_tol.has_value()) +
                    int(s.suboptimality_tol.has_value()) +
                    int(s.bit_budget_per_worker.has_value());
  if (rules > 1) throw ConfigError("stop: at most one stopping rule may be set");
}

inline json stop_to_json(const StopRule& s) {
  json j = json::object();
  auto put = [&](const char* k, const std::optional<double>& v) {
    j[k] = v ? json(*v) : json(nullptr);
  };
  put("grad_norm_sq_tol", s.grad_norm_sq_tol);
  put("grad_norm_tol", s.grad_norm_tol);
  put("suboptimality_tol", s.suboptimality_tol);
  put("bit_budget_per_worker", s.bit_budget_per_worker);
  put("wall_clock_seconds", s.wall_clock_seconds);
  return j;
}

namespace detail {

inline constexpr const char* kMethodKeys[] = {
    "compressor", "compressor2", "q", "zeta", "p", "per_worker_coin", "trigger",
    "inner"};

inline void experiment_fields(const json& j, ExperimentConfig& c) {
  const std::string where = "config";
  if (!j.contains("problem")) throw ConfigError("config.problem is required");
  if (!j.contains("method")) throw ConfigError("config.method is required");
  c.problem = problem_from_json(j.at("problem"));
  const json& m = j.at("method");
  if (m.is_string()) {
    json flat{{"name", m}};
    for (const char* k : kMethodKeys)
      if (j.contains(k)) flat[k] = j.at(k);
    c.method = method_from_json(flat, "method");
  } else {
    for (const char* k : kMethodKeys)
      if (j.contains(k))
        throw ConfigError(std::string("config.") + k +
                          ": method parameters belong inside the method object");
    c.method = method_from_json(m, "method");
  }
  if (j.contains("gamma")) {
    c.rule = StepsizeRule::Explicit;
    c.gamma = get<double>(j, "gamma", where);
    if (!(c.gamma > 0.0)) throw ConfigError("config.gamma must be positive");
  }
  if (j.contains("stepsize_rule")) {
    const auto r = get<std::string>(j, "stepsize_rule", where);
    if (r == "noncvx")
      c.rule = StepsizeRule::NonConvex;
    else if (r == "pl")
      c.rule = StepsizeRule::PL;
    else if (r == "explicit")
      c.rule = StepsizeRule::Explicit;
    else
      throw ConfigError("config.stepsize_rule: expected noncvx, pl or explicit");
    if (c.rule == StepsizeRule::Explicit && !j.contains("gamma"))
      throw ConfigError("config.stepsize_rule 'explicit' needs gamma");
    if (c.rule != StepsizeRule::Explicit && j.contains("gamma"))
      throw ConfigError("config: gamma conflicts with a theory stepsize rule");
  }
  get_opt(j, "stepsize_multiplier", c.multiplier, where);
  if (!(c.multiplier > 0.0))
    throw ConfigError("config.stepsize_multiplier must be positive");
  get_opt(j, "t_max", c.run.t_max, where);
  if (c.run.t_max < 1) throw ConfigError("config.t_max must be at least 1");
  get_opt(j, "seed", c.run.seed, where);
  get_opt(j, "threads", c.run.threads, where);
  if (j.contains("g0_mode")) {
    const auto g = get<std::string>(j, "g0_mode", where);
    if (g == "full_gradient")
      c.run.g0 = G0Mode::FullGradient;
    else if (g == "compressed")
      c.run.g0 = G0Mode::Compressed;
    else if (g == "zero")
      c.run.g0 = G0Mode::Zero;
    else
      throw ConfigError("config.g0_mode: expected full_gradient, compressed or zero");
  }
  if (j.contains("stop")) stop_from_json(j.at("stop"), c.run.stop);
}

}  // namespace detail

#define THREEPC_EXPERIMENT_KEYS                                              \
  "problem", "method", "gamma", "stepsize_rule", "stepsize_multiplier",      \
      "t_max", "seed", "threads", "g0_mode", "stop", "compressor",             \
      "compressor2", "q", "zeta", "p", "per_worker_coin", "trigger", "inner"

inline ExperimentConfig experiment_from_json(const json& j) {
  detail::only_keys(j, {THREEPC_EXPERIMENT_KEYS}, "config");
  ExperimentConfig c;
  detail::experiment_fields(j, c);
  return c;
}

inline SweepConfig sweep_from_json(const json& j) {
  detail::only_keys(j,
                    {THREEPC_EXPERIMENT_KEYS, "multipliers", "k_grid",
                     "zeta_grid", "selection"},
                    "config");
  SweepConfig s;
  detail::experiment_fields(j, s.base);
  s.multipliers = default_multipliers();
  detail::get_opt(j, "multipliers", s.multipliers, "config");
  detail::get_opt(j, "k_grid", s.k_grid, "config");
  detail::get_opt(j, "zeta_grid", s.zeta_grid, "config");
  if (j.contains("selection")) {
    const auto sel = detail::get<std::string>(j, "selection", "config");
    if (sel == "bits_to_tolerance")
      s.selection = Selection::BitsToTolerance;
    else if (sel == "final_grad_norm_sq")
      s.selection = Selection::FinalGradNormSq;
    else
      throw ConfigError(
          "config.selection: expected bits_to_tolerance or final_grad_norm_sq");
  }
  if (s.multipliers.empty()) throw ConfigError("config.multipliers is empty");
  for (double m : s.multipliers)
    if (!(m > 0.0)) throw ConfigError("config.multipliers must be positive");
  return s;
}

#undef THREEPC_EXPERIMENT_KEYS

inline VerifyConfig verify_from_json(const json& j) {
  detail::only_keys(j, {"seed", "cases"}, "verify");
  VerifyConfig v;
  detail::get_opt(j, "seed", v.seed, "verify");
  if (!j.contains("cases") || !j.at("cases").is_array())
    throw ConfigError("verify.cases: expected an array");
  const json& cases = j.at("cases");
  for (std::size_t i = 0; i < cases.size(); ++i) {
    const std::string where = "verify.cases[" + std::to_string(i) + "]";
    detail::only_keys(cases[i],
                      {"method", "d", "triples", "trials", "n_workers",
                       "b_scale", "adversarial"},
                      where);
    VerifyCase c;
    if (!cases[i].contains("method"))
      throw ConfigError(where + ".method is required");
    c.method = method_from_json(cases[i].at("method"), where + ".method");
    detail::get_opt(cases[i], "d", c.d, where);
    detail::get_opt(cases[i], "triples", c.triples, where);
    detail::get_opt(cases[i], "trials", c.trials, where);
    detail::get_opt(cases[i], "n_workers", c.n_workers, where);
    detail::get_opt(cases[i], "b_scale", c.b_scale, where);
    detail::get_opt(cases[i], "adversarial", c.adversarial, where);
    v.cases.push_back(std::move(c));
  }
  return v;
}

inline json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

/// Theory stepsize for the configured rule, times the multiplier.
inline double resolve_stepsize(const ExperimentConfig& c,
                               const TheoryParams& tp,
                               const SmoothnessConstants& k) {
  switch (c.rule) {
    case StepsizeRule::Explicit: return c.gamma * c.multiplier;
    case StepsizeRule::NonConvex: return stepsize_noncvx(k, tp) * c.multiplier;
    case StepsizeRule::PL: return stepsize_pl(k, tp) * c.multiplier;
  }
  throw ConfigError("unknown stepsize rule");
}

inline json experiment_to_json(const ExperimentConfig& c) {
  json j;
  j["problem"] = problem_to_json(c.problem);
  json m = method_to_json(c.method);
  j["method"] = m["name"];
  for (const auto& item : m.items())
    if (item.key() != "name") j[item.key()] = item.value();
  j["stepsize_rule"] = c.rule == StepsizeRule::Explicit ? "explicit"
                       : c.rule == StepsizeRule::PL     ? "pl"
                                                        : "noncvx";
  if (c.rule == StepsizeRule::Explicit) j["gamma"] = c.gamma;
  j["stepsize_multiplier"] = c.multiplier;
  j["t_max"] = c.run.t_max;
  j["seed"] = c.run.seed;
  j["threads"] = c.run.threads;
  j["g0_mode"] = c.run.g0 == G0Mode::FullGradient ? "full_gradient"
                 : c.run.g0 == G0Mode::Compressed ? "compressed"
                                                  : "zero";
  j["stop"] = stop_to_json(c.run.stop);
  return j;
}

}  // namespace threepc

#endif  // THREEPC_CONFIG_HPP
