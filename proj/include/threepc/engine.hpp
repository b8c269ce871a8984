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
#ifndef THREEPC_ENGINE_HPP
#define THREEPC_ENGINE_HPP

#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "threepc/compressors.hpp"
#include "threepc/core.hpp"
#include "threepc/mechanisms.hpp"
#include "threepc/problems.hpp"
#include "threepc/theory.hpp"
#include "threepc/thread_pool.hpp"

namespace threepc {

/// How the workers' initial estimates g_i⁰ are formed.
enum class G0Mode {
  FullGradient,  // g_i⁰ = ∇f_i(x⁰)
  Compressed,    // g_i⁰ = C(∇f_i(x⁰))
  Zero,          // g_i⁰ = 0
};

/// Which error the run tracks as G^t.
enum class ErrorForm {
  Auto,        // Aggregated for MARINA, PerWorker otherwise
  PerWorker,   // (1/n) Σ ‖g_i − ∇f_i(x)‖²
  Aggregated,  // ‖g − ∇f(x)‖²
};

struct StopRule {
  std::optional<double> grad_norm_sq_tol;   // stop when ‖∇f‖² ≤ tol
  std::optional<double> grad_norm_tol;      // stop when ‖∇f‖ < tol
  std::optional<double> suboptimality_tol;  // stop when f − f* ≤ tol
  std::optional<double> bit_budget_per_worker;
  std::optional<double> wall_clock_seconds = 300.0;
};

struct RunConfig {
  MethodSpec method;
  double gamma = 0.0;
  std::size_t t_max = 1000;
  std::uint64_t seed = 0;
  G0Mode g0 = G0Mode::FullGradient;
  ErrorForm error_form = ErrorForm::Auto;
  StopRule stop;
  std::size_t threads = 1;
  bool keep_iterates = false;
};

struct RunRecord {
  std::size_t t = 0;
  double f = 0.0;
  double grad_norm_sq = 0.0;
  double G = 0.0;
  double bits_cum_per_worker = 0.0;
  double transmitted_fraction = 0.0;
  double step_sq = 0.0;  // ‖x^t − x^{t−1}‖², zero at t = 0
  std::optional<double> suboptimality;
};

enum class Termination {
  MaxIterations,
  GradTolerance,
  SuboptimalityTolerance,
  BitBudget,
  WallClock,
  Diverged,
};

inline std::string to_string(Termination t) {
  switch (t) {
    case Termination::MaxIterations: return "max_iterations";
    case Termination::GradTolerance: return "grad_tolerance";
    case Termination::SuboptimalityTolerance: return "suboptimality_tolerance";
    case Termination::BitBudget: return "bit_budget";
    case Termination::WallClock: return "wall_clock";
    case Termination::Diverged: return "diverged";
  }
  return "?";
}

struct RunResult {
  std::vector<RunRecord> records;
  DenseVector x;
  Termination reason = Termination::MaxIterations;
  std::vector<DenseVector> iterates;  // only with keep_iterates
  std::uint64_t total_bits = 0;       // summed over workers
};

/// Error the server's estimates carry against the true local gradients.
inline double compute_G(std::span<const DenseVector> estimates,
                        std::span<const DenseVector> grads, ErrorForm form) {
  const std::size_t n = estimates.size();
  if (form == ErrorForm::Aggregated) {
    const std::size_t d = estimates[0].size();
    DenseVector diff(d);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < d; ++j) diff[j] += estimates[i][j] - grads[i][j];
    const double inv = 1.0 / static_cast<double>(n);
    return sq_norm(diff) * inv * inv;
  }
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += sq_dist(estimates[i], grads[i]);
  return s / static_cast<double>(n);
}

inline ErrorForm resolve_error_form(const RunConfig& cfg) {
  if (cfg.error_form != ErrorForm::Auto) return cfg.error_form;
  return cfg.method.method == Method::MARINA ? ErrorForm::Aggregated
                                             : ErrorForm::PerWorker;
}

/// Thrown when the server's reconstruction disagrees with a worker's state.
class ConsistencyError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Runs the compressed gradient method
///   x^{t+1} = x^t − γ g^t,  g_i^{t+1} = C_{g_i^t, ∇f_i(x^t)}(∇f_i(x^{t+1})),
///   g^{t+1} = (1/n) Σ g_i^{t+1},
/// with every g_i rebuilt on the server side from the uplink payloads only.
inline RunResult run(const Problem& problem, const RunConfig& cfg) {
  const std::size_t n = problem.clients();
  const std::size_t d = problem.dim();
  if (n == 0 || d == 0) throw ParameterError("run: empty problem");
  if (!(cfg.gamma > 0.0)) throw ParameterError("run: stepsize must be positive");
  if (cfg.t_max < 1) throw ParameterError("run: t_max must be at least 1");
  validate(cfg.method, d, n);
  const int rules = int(cfg.stop.grad_norm_sq_tol.has_value()) +
                    int(cfg.stop.grad_norm_tol.has_value()) +
                    int(cfg.stop.suboptimality_tol.has_value()) +
                    int(cfg.stop.bit_budget_per_worker.has_value());
  if (rules > 1) throw ParameterError("run: at most one stopping rule");

  const auto started = std::chrono::steady_clock::now();
  const RngStream master(cfg.seed);
  const ErrorForm form = resolve_error_form(cfg);
  const auto coin_p = coin_probability(cfg.method);
  std::vector<double> smooth(n, 0.0);
  if (cfg.method.trigger == LagTrigger::IterateDifference)
    for (std::size_t i = 0; i < n; ++i) smooth[i] = problem.client_smoothness(i);

  ThreadPool pool(cfg.threads);
  RunResult res;
  DenseVector x = problem.initial_point();
  std::vector<DenseVector> grads(n, DenseVector(d));
  std::vector<double> fvals(n, 0.0);
  pool.parallel_for(n, [&](std::size_t i) {
    fvals[i] = problem.gradient(i, x, grads[i]);
  });

  std::vector<MechanismState> workers(n);
  std::vector<DenseVector> server(n);  // server's copy of each g_i
  std::vector<std::uint64_t> bits(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    switch (cfg.g0) {
      case G0Mode::FullGradient:
        server[i] = grads[i];
        bits[i] = 32ULL * d;
        break;
      case G0Mode::Zero:
        server[i] = DenseVector(d);
        break;
      case G0Mode::Compressed: {
        const CompressorSpec& c =
            cfg.method.method == Method::LAG     ? CompressorSpec::identity()
            : cfg.method.method == Method::MARINA ? cfg.method.q
                                                  : cfg.method.c;
        CompressionContext cctx;
        cctx.rng = master.derive("init", i);
        cctx.shared = master.derive("init-shared", 0);
        cctx.worker = i;
        cctx.n_workers = n;
        Compressed comp = compress(c, grads[i].span(), cctx);
        StepResult sr;
        server[i] = comp.dense();
        sr.payloads.push_back(detail::to_payload(std::move(comp), false));
        bits[i] = bits_for(sr, d);
        break;
      }
    }
    workers[i] = MechanismState{server[i], grads[i]};
  }

  auto mean_of = [&](const std::vector<DenseVector>& vs) {
    DenseVector m(d);
    for (const auto& v : vs) axpy(1.0, v.span(), m.span());
    for (auto& e : m) e /= static_cast<double>(n);
    return m;
  };

  DenseVector g = mean_of(server);
  std::size_t fired = n;

  auto emit = [&](std::size_t t, double step_sq) {
    RunRecord r;
    r.t = t;
    double f = 0.0;
    for (double v : fvals) f += v;
    r.f = f / static_cast<double>(n);
    r.grad_norm_sq = sq_norm(mean_of(grads));
    r.G = compute_G(server, grads, form);
    std::uint64_t total = 0;
    for (auto b : bits) total += b;
    res.total_bits = total;
    r.bits_cum_per_worker = static_cast<double>(total) / static_cast<double>(n);
    r.transmitted_fraction = static_cast<double>(fired) / static_cast<double>(n);
    r.step_sq = step_sq;
    r.suboptimality = problem.suboptimality(x);
    res.records.push_back(r);
    if (cfg.keep_iterates) res.iterates.push_back(x);
  };

  auto stop_reason = [&]() -> std::optional<Termination> {
    const RunRecord& r = res.records.back();
    if (!std::isfinite(r.f) || !std::isfinite(r.grad_norm_sq) ||
        !std::isfinite(r.G))
      return Termination::Diverged;
    if (cfg.stop.grad_norm_sq_tol && r.grad_norm_sq <= *cfg.stop.grad_norm_sq_tol)
      return Termination::GradTolerance;
    if (cfg.stop.grad_norm_tol &&
        std::sqrt(r.grad_norm_sq) < *cfg.stop.grad_norm_tol)
      return Termination::GradTolerance;
    if (cfg.stop.suboptimality_tol && r.suboptimality &&
        *r.suboptimality <= *cfg.stop.suboptimality_tol)
      return Termination::SuboptimalityTolerance;
    if (cfg.stop.bit_budget_per_worker &&
        r.bits_cum_per_worker >= *cfg.stop.bit_budget_per_worker)
      return Termination::BitBudget;
    if (cfg.stop.wall_clock_seconds) {
      const std::chrono::duration<double> el =
          std::chrono::steady_clock::now() - started;
      if (el.count() > *cfg.stop.wall_clock_seconds) return Termination::WallClock;
    }
    return std::nullopt;
  };

  emit(0, 0.0);
  if (auto why = stop_reason()) {
    res.reason = *why;
    res.x = x;
    return res;
  }

  std::vector<StepResult> steps(n);
  std::vector<char> sent(n, 0);
  for (std::size_t t = 0; t < cfg.t_max; ++t) {
    DenseVector x_next = x;
    axpy(-cfg.gamma, g.span(), x_next.span());
    const double step_sq = sq_dist(x_next, x);
    if (!all_finite(x_next) || std::sqrt(sq_norm(x_next)) > 1e100) {
      res.reason = Termination::Diverged;
      res.x = x;
      return res;
    }

    bool round_coin = true;
    if (coin_p && !cfg.method.per_worker_coin) {
      RngStream c = master.derive("round-coin", t);
      round_coin = c.bernoulli(*coin_p);
    }
    const RngStream shared = master.derive("round-shared", t);

    pool.parallel_for(n, [&](std::size_t i) {
      DenseVector grad_next(d);
      fvals[i] = problem.gradient(i, x_next, grad_next);
      StepContext ctx;
      ctx.rng = master.derive("worker", i).derive("round", t);
      ctx.shared = shared;
      ctx.worker = i;
      ctx.n_workers = n;
      ctx.coin = round_coin;
      if (coin_p && cfg.method.per_worker_coin) {
        RngStream c = ctx.rng.derive("coin", 0);
        ctx.coin = c.bernoulli(*coin_p);
      }
      ctx.iterate_step_sq = step_sq;
      ctx.smoothness = smooth[i];
      steps[i] = step(cfg.method, workers[i], grad_next, ctx);
      bits[i] += bits_for(steps[i], d);
      sent[i] = 0;
      for (const auto& p : steps[i].payloads)
        if (p.kind != PayloadKind::Flag) sent[i] = 1;
      server[i] = reconstruct(server[i], steps[i].payloads);
      workers[i].h = std::move(steps[i].g_next);
      workers[i].y = grad_next;
      grads[i] = std::move(grad_next);
    });

    for (std::size_t i = 0; i < n; ++i)
      if (!(server[i] == workers[i].h))
        throw ConsistencyError("server estimate diverged from worker " +
                               std::to_string(i) + " at round " +
                               std::to_string(t));
    fired = 0;
    for (char s : sent) fired += s;
    g = mean_of(server);
    x = std::move(x_next);
    emit(t + 1, step_sq);
    if (auto why = stop_reason()) {
      res.reason = *why;
      res.x = x;
      return res;
    }
  }
  res.reason = Termination::MaxIterations;
  res.x = x;
  return res;
}

// ---------------------------------------------------------------------------
// Runtime checks against the theory
// ---------------------------------------------------------------------------

struct RecursionReport {
  bool pass = true;
  std::size_t rounds_checked = 0;
  std::size_t violations = 0;
  std::optional<std::size_t> first_violation;
  double max_excess = -std::numeric_limits<double>::infinity();  // lhs − rhs
};

/// G^{t+1} ≤ (1 − A) G^t + B L+² ‖x^{t+1} − x^t‖², pointwise.
inline RecursionReport check_key_recursion(std::span<const RunRecord> recs,
                                           double A, double B, double L_plus) {
  RecursionReport rep;
  for (std::size_t t = 0; t + 1 < recs.size(); ++t) {
    const double lhs = recs[t + 1].G;
    const double rhs =
        (1.0 - A) * recs[t].G + B * L_plus * L_plus * recs[t + 1].step_sq;
    rep.max_excess = std::max(rep.max_excess, lhs - rhs);
    ++rep.rounds_checked;
    if (lhs > rhs) {
      ++rep.violations;
      rep.pass = false;
      if (!rep.first_violation) rep.first_violation = t;
    }
  }
  return rep;
}

/// Ensemble form: for every round, the mean over runs of
/// G^{t+1} − (1 − A) G^t − B L+² ‖Δx‖² must not exceed 3 standard errors.
inline RecursionReport check_key_recursion_ensemble(
    const std::vector<std::vector<RunRecord>>& runs, double A, double B,
    double L_plus) {
  RecursionReport rep;
  if (runs.empty()) return rep;
  std::size_t len = runs[0].size();
  for (const auto& r : runs) len = std::min(len, r.size());
  const double m = static_cast<double>(runs.size());
  for (std::size_t t = 0; t + 1 < len; ++t) {
    double mean = 0.0, m2 = 0.0;
    std::size_t k = 0;
    for (const auto& r : runs) {
      const double v = r[t + 1].G - (1.0 - A) * r[t].G -
                       B * L_plus * L_plus * r[t + 1].step_sq;
      ++k;
      const double delta = v - mean;
      mean += delta / static_cast<double>(k);
      m2 += delta * (v - mean);
    }
    const double se = runs.size() > 1 ? std::sqrt(m2 / (m - 1.0) / m) : 0.0;
    rep.max_excess = std::max(rep.max_excess, mean - 3.0 * se);
    ++rep.rounds_checked;
    if (mean > 3.0 * se) {
      ++rep.violations;
      rep.pass = false;
      if (!rep.first_violation) rep.first_violation = t;
    }
  }
  return rep;
}

struct BoundReport {
  bool pass = true;
  std::size_t checked = 0;
  std::optional<std::size_t> first_violation;
  double max_ratio = 0.0;  // observed / bound
};

/// (1/T) Σ_{t<T} ‖∇f(x^t)‖² ≤ 2Δ⁰/(γT) + G⁰/(AT) for every prefix T.
inline BoundReport check_noncvx_bound(std::span<const RunRecord> recs,
                                      double delta0, double gamma, double A) {
  BoundReport rep;
  if (recs.empty()) return rep;
  const double g0 = recs[0].G;
  double sum = 0.0;
  for (std::size_t T = 1; T <= recs.size(); ++T) {
    sum += recs[T - 1].grad_norm_sq;
    const double avg = sum / static_cast<double>(T);
    const double bound = bound_noncvx(delta0, gamma, T, g0, A);
    rep.max_ratio = std::max(rep.max_ratio, avg / bound);
    ++rep.checked;
    if (avg > bound) {
      rep.pass = false;
      if (!rep.first_violation) rep.first_violation = T;
    }
  }
  return rep;
}

/// f(x^t) − f* ≤ (1 − γμ)^t (Δ⁰ + γG⁰/A) for every recorded t.
inline BoundReport check_pl_bound(std::span<const RunRecord> recs,
                                  double delta0, double gamma, double mu,
                                  double A) {
  BoundReport rep;
  if (recs.empty()) return rep;
  const double g0 = recs[0].G;
  for (const auto& r : recs) {
    if (!r.suboptimality) continue;
    const double bound = bound_pl(delta0, gamma, mu, r.t, g0, A);
    rep.max_ratio = std::max(rep.max_ratio, *r.suboptimality / bound);
    ++rep.checked;
    if (*r.suboptimality > bound) {
      rep.pass = false;
      if (!rep.first_violation) rep.first_violation = r.t;
    }
  }
  return rep;
}

}  // namespace threepc

#endif  // THREEPC_ENGINE_HPP
