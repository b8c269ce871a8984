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
#ifndef THREEPC_EXPERIMENTS_HPP
#define THREEPC_EXPERIMENTS_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "threepc/config.hpp"
#include "threepc/engine.hpp"
#include "threepc/mechanisms.hpp"
#include "threepc/problems.hpp"
#include "threepc/theory.hpp"
#include "threepc/thread_pool.hpp"

namespace threepc {

struct ExperimentResult {
  RunResult run;
  TheoryParams params;
  SmoothnessConstants constants;
  double gamma = 0.0;
};

/// Resolves (A, B), the smoothness constants and γ, then runs.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg,
                                       const Problem& problem) {
  ExperimentResult out;
  out.params = params_for(cfg.method, problem.dim(), problem.clients());
  out.constants = problem.constants();
  out.gamma = resolve_stepsize(cfg, out.params, out.constants);
  RunConfig rc = cfg.run;
  rc.method = cfg.method;
  rc.gamma = out.gamma;
  out.run = run(problem, rc);
  return out;
}

inline constexpr double kInfiniteBits = std::numeric_limits<double>::infinity();

/// Bits per worker at the first round meeting the run's tolerance, ∞ if the
/// run stopped for any other reason.
inline double bits_to_tolerance(const RunResult& r) {
  if (r.reason != Termination::GradTolerance &&
      r.reason != Termination::SuboptimalityTolerance)
    return kInfiniteBits;
  return r.records.back().bits_cum_per_worker;
}

struct SweepEntry {
  double multiplier = 1.0;
  double gamma = 0.0;
  double bits = kInfiniteBits;
  double final_grad_norm_sq = std::numeric_limits<double>::infinity();
  std::size_t rounds = 0;
  Termination reason = Termination::MaxIterations;
  std::string error;  // set when the run threw
};

struct SweepResult {
  std::vector<SweepEntry> entries;  // in multiplier-grid order
  std::optional<std::size_t> best;  // index into entries
};

inline double sweep_score(const SweepEntry& e, Selection sel) {
  if (!e.error.empty()) return std::numeric_limits<double>::infinity();
  if (sel == Selection::BitsToTolerance) return e.bits;
  if (e.reason == Termination::Diverged) return std::numeric_limits<double>::infinity();
  return e.final_grad_norm_sq;
}

/// Lowest score wins; ties go to the smaller multiplier.
inline std::optional<std::size_t> select_best(const std::vector<SweepEntry>& es,
                                              Selection sel) {
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < es.size(); ++i) {
    const double s = sweep_score(es[i], sel);
    if (!std::isfinite(s)) continue;
    if (!best) {
      best = i;
      continue;
    }
    const double b = sweep_score(es[*best], sel);
    if (s < b || (s == b && es[i].multiplier < es[*best].multiplier)) best = i;
  }
  return best;
}

namespace detail {

inline SweepEntry sweep_entry(ExperimentConfig cfg, const Problem& problem,
                              double multiplier) {
  SweepEntry e;
  e.multiplier = multiplier;
  cfg.multiplier = multiplier;
  cfg.run.threads = 1;
  try {
    const ExperimentResult r = run_experiment(cfg, problem);
    e.gamma = r.gamma;
    e.bits = bits_to_tolerance(r.run);
    e.reason = r.run.reason;
    e.rounds = r.run.records.back().t;
    e.final_grad_norm_sq = r.run.records.back().grad_norm_sq;
  } catch (const std::exception& ex) {
    e.error = ex.what();
  }
  return e;
}

}  // namespace detail

/// Runs the base configuration once per multiplier.
inline SweepResult sweep(const ExperimentConfig& base, const Problem& problem,
                         const std::vector<double>& multipliers,
                         Selection sel = Selection::BitsToTolerance,
                         std::size_t threads = 1) {
  SweepResult res;
  res.entries.resize(multipliers.size());
  ThreadPool pool(threads);
  pool.parallel_for(multipliers.size(), [&](std::size_t i) {
    res.entries[i] = detail::sweep_entry(base, problem, multipliers[i]);
  });
  res.best = select_best(res.entries, sel);
  return res;
}

struct HeatmapCell {
  std::size_t k = 0;
  double zeta = 0.0;
  std::optional<double> best_multiplier;
  double bits = kInfiniteBits;
  bool ef21_column = false;  // ζ = 0
  bool lag_row = false;      // K = d
  std::vector<SweepEntry> entries;
};

struct HeatmapResult {
  std::vector<HeatmapCell> cells;  // K-major, then ζ
  std::size_t d = 0;
};

/// CLAG with Top-K over the K × ζ grid, each cell tuned over the multipliers.
inline HeatmapResult heatmap(const SweepConfig& sc, const Problem& problem,
                             std::size_t threads = 1) {
  if (sc.k_grid.empty() || sc.zeta_grid.empty())
    throw ConfigError("heatmap: k_grid and zeta_grid must be nonempty");
  HeatmapResult res;
  res.d = problem.dim();
  const std::size_t nk = sc.k_grid.size(), nz = sc.zeta_grid.size();
  const std::size_t nm = sc.multipliers.size();
  res.cells.resize(nk * nz);
  for (std::size_t a = 0; a < nk; ++a)
    for (std::size_t b = 0; b < nz; ++b) {
      HeatmapCell& c = res.cells[a * nz + b];
      c.k = sc.k_grid[a];
      c.zeta = sc.zeta_grid[b];
      c.ef21_column = c.zeta == 0.0;
      c.lag_row = c.k == res.d;
      c.entries.resize(nm);
    }
  ThreadPool pool(threads);
  pool.parallel_for(res.cells.size() * nm, [&](std::size_t job) {
    HeatmapCell& c = res.cells[job / nm];
    ExperimentConfig cfg = sc.base;
    cfg.method = MethodSpec::clag(CompressorSpec::top_k(c.k), c.zeta);
    cfg.method.trigger = sc.base.method.trigger;
    c.entries[job % nm] =
        detail::sweep_entry(cfg, problem, sc.multipliers[job % nm]);
  });
  for (auto& c : res.cells) {
    if (auto b = select_best(c.entries, sc.selection)) {
      c.best_multiplier = c.entries[*b].multiplier;
      c.bits = sweep_score(c.entries[*b], sc.selection);
    }
  }
  return res;
}

/// K values spread evenly over [1, d], always including both ends.
inline std::vector<std::size_t> even_k_grid(std::size_t d, std::size_t count) {
  if (d == 0 || count == 0) throw ParameterError("even_k_grid: empty grid");
  std::vector<std::size_t> ks;
  if (count == 1 || d == 1) return {d};
  for (std::size_t i = 0; i < count; ++i) {
    const double t = static_cast<double>(i) / static_cast<double>(count - 1);
    const auto k = static_cast<std::size_t>(
        std::llround(1.0 + t * static_cast<double>(d - 1)));
    if (ks.empty() || ks.back() != k) ks.push_back(k);
  }
  return ks;
}

/// 0 followed by 2^lo, …, 2^hi.
inline std::vector<double> power_zeta_grid(int lo, int hi) {
  std::vector<double> z{0.0};
  for (int e = lo; e <= hi; ++e) z.push_back(std::ldexp(1.0, e));
  return z;
}

// ---------------------------------------------------------------------------
// Inequality verification catalog
// ---------------------------------------------------------------------------

struct CatalogEntry {
  std::string label;
  MethodSpec method;
};

/// One mechanism per row of the constants table, sized for dimension d.
inline std::vector<CatalogEntry> verify_catalog(std::size_t d) {
  const std::size_t k = std::max<std::size_t>(1, d / 5);
  const auto topk = CompressorSpec::top_k(k);
  const auto crand = CompressorSpec::crand_k(k);
  const auto randk = CompressorSpec::rand_k(k);
  std::vector<CatalogEntry> c;
  c.push_back({"ef21+top_k", MethodSpec::ef21(topk)});
  c.push_back({"ef21+crand_k", MethodSpec::ef21(crand)});
  c.push_back({"lag", MethodSpec::lag(2.0)});
  c.push_back({"clag+top_k", MethodSpec::clag(topk, 2.0)});
  c.push_back({"3pcv1+top_k", MethodSpec::v1(topk)});
  c.push_back({"3pcv2+rand_k+top_k", MethodSpec::v2(randk, topk)});
  c.push_back({"3pcv3+ef21+top_k", MethodSpec::v3(MethodSpec::ef21(topk), topk)});
  c.push_back({"3pcv4+top_k+top_k", MethodSpec::v4(topk, topk)});
  c.push_back({"3pcv5+top_k", MethodSpec::v5(0.5, topk)});
  c.push_back({"marina+rand_k", MethodSpec::marina(0.5, randk)});
  return c;
}

struct VerifyOutcome {
  std::string label;
  std::size_t d = 0;
  TheoryParams params;
  double b_scale = 1.0;
  VerifyReport report;
};

inline VerifyOutcome verify_case(const std::string& label, const VerifyCase& vc,
                                 std::uint64_t seed) {
  VerifyOutcome o;
  o.label = label;
  o.d = vc.d;
  o.b_scale = vc.b_scale;
  o.params = params_for(vc.method, vc.d, vc.n_workers);
  VerifyOptions opt;
  opt.d = vc.d;
  opt.triples = vc.triples;
  opt.trials = vc.trials;
  opt.n_workers = vc.n_workers;
  opt.seed = seed;
  opt.adversarial = vc.adversarial;
  o.report = verify_3pc_inequality(vc.method, o.params.A,
                                   o.params.B * vc.b_scale, opt);
  return o;
}

}  // namespace threepc

#endif  // THREEPC_EXPERIMENTS_HPP
