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
// threepc: command line driver for compressed-gradient experiments.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"

#include "threepc/config.hpp"
#include "threepc/experiments.hpp"
#include "threepc/io.hpp"
#include "threepc/problems.hpp"

namespace fs = std::filesystem;
using namespace threepc;

namespace {

enum Exit : int {
  kOk = 0,
  kFailure = 1,
  kConfigError = 2,
  kDiverged = 3,
  kBudgetExhausted = 4,
  kVerifyFailed = 5,
};

struct Common {
  std::string config;
  std::string out = "out";
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
  std::optional<double> time_limit;
};

void add_common(CLI::App* app, Common& c, bool need_config) {
  auto* opt = app->add_option("--config", c.config, "JSON configuration file");
  if (need_config) opt->required();
  app->add_option("--out", c.out, "output directory")->capture_default_str();
  app->add_option("--seed", c.seed, "override the master seed");
  app->add_option("--threads", c.threads, "worker threads");
  app->add_option("--time-limit-secs", c.time_limit,
                  "wall-clock limit per run in seconds");
}

void apply_overrides(ExperimentConfig& cfg, const Common& c) {
  if (c.seed) cfg.run.seed = *c.seed;
  if (c.threads) cfg.run.threads = *c.threads;
  if (c.time_limit) cfg.run.stop.wall_clock_seconds = *c.time_limit;
}

int exit_for(Termination t) {
  switch (t) {
    case Termination::Diverged: return kDiverged;
    case Termination::BitBudget:
    case Termination::WallClock: return kBudgetExhausted;
    default: return kOk;
  }
}

template <class F>
int guarded_config(F&& f) {
  try {
    return f();
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const ParameterError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const ParseError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  }
}

int cmd_run(const Common& c) {
  ExperimentConfig cfg;
  std::unique_ptr<Problem> problem;
  if (int rc = guarded_config([&] {
        cfg = experiment_from_json(load_json_file(c.config));
        apply_overrides(cfg, c);
        problem = make_problem(cfg.problem);
        validate(cfg.method, problem->dim(), problem->clients());
        return 0;
      }))
    return rc;
  const ExperimentResult r = run_experiment(cfg, *problem);
  fs::create_directories(c.out);
  write_file_atomic(fs::path(c.out) / "records.csv", records_csv(r.run.records));
  write_file_atomic(fs::path(c.out) / "meta.json",
                    run_meta_json(cfg, r).dump(2) + "\n");
  std::cout << "termination=" << to_string(r.run.reason)
            << " rounds=" << r.run.records.back().t
            << " grad_norm_sq=" << format_double(r.run.records.back().grad_norm_sq)
            << '\n';
  return exit_for(r.run.reason);
}

int cmd_sweep(const Common& c) {
  SweepConfig sc;
  std::unique_ptr<Problem> problem;
  if (int rc = guarded_config([&] {
        sc = sweep_from_json(load_json_file(c.config));
        apply_overrides(sc.base, c);
        problem = make_problem(sc.base.problem);
        validate(sc.base.method, problem->dim(), problem->clients());
        return 0;
      }))
    return rc;
  const std::size_t threads = sc.base.run.threads;
  const SweepResult s =
      sweep(sc.base, *problem, sc.multipliers, sc.selection, threads);
  fs::create_directories(c.out);
  write_file_atomic(fs::path(c.out) / "sweep.csv", sweep_csv(s));
  json meta;
  meta["config"] = experiment_to_json(sc.base);
  meta["multipliers"] = sc.multipliers;
  meta["selection"] = sc.selection == Selection::BitsToTolerance
                          ? "bits_to_tolerance"
                          : "final_grad_norm_sq";
  meta["tie_break"] = "smaller_multiplier";
  meta["best_multiplier"] =
      s.best ? json(s.entries[*s.best].multiplier) : json(nullptr);
  write_file_atomic(fs::path(c.out) / "meta.json", meta.dump(2) + "\n");
  if (s.best)
    std::cout << "best_multiplier=" << format_double(s.entries[*s.best].multiplier)
              << '\n';
  else
    std::cout << "no multiplier reached the target\n";
  return kOk;
}

int cmd_heatmap(const Common& c) {
  SweepConfig sc;
  std::unique_ptr<Problem> problem;
  if (int rc = guarded_config([&] {
        sc = sweep_from_json(load_json_file(c.config));
        apply_overrides(sc.base, c);
        problem = make_problem(sc.base.problem);
        if (sc.k_grid.empty()) sc.k_grid = even_k_grid(problem->dim(), 5);
        if (sc.zeta_grid.empty()) sc.zeta_grid = power_zeta_grid(-2, 6);
        for (std::size_t k : sc.k_grid)
          validate(CompressorSpec::top_k(k), problem->dim(), problem->clients());
        return 0;
      }))
    return rc;
  const HeatmapResult h = heatmap(sc, *problem, sc.base.run.threads);
  fs::create_directories(c.out);
  write_file_atomic(fs::path(c.out) / "heatmap.csv", heatmap_csv(h));
  json meta;
  meta["config"] = experiment_to_json(sc.base);
  meta["d"] = h.d;
  meta["k_grid"] = sc.k_grid;
  meta["zeta_grid"] = sc.zeta_grid;
  meta["multipliers"] = sc.multipliers;
  meta["tie_break"] = "smaller_multiplier";
  meta["ef21_column"] = {{"zeta", 0.0}};
  meta["lag_row"] = {{"K", h.d}};
  json cells = json::array();
  for (const auto& cell : h.cells) {
    json runs = json::array();
    for (const auto& e : cell.entries)
      runs.push_back({{"multiplier", e.multiplier},
                      {"bits", number_or_null(e.bits)},
                      {"rounds", e.rounds},
                      {"status", e.error.empty() ? to_string(e.reason) : e.error}});
    cells.push_back({{"K", cell.k},
                     {"zeta", cell.zeta},
                     {"ef21_column", cell.ef21_column},
                     {"lag_row", cell.lag_row},
                     {"bits", number_or_null(cell.bits)},
                     {"runs", runs}});
  }
  meta["cells"] = cells;
  write_file_atomic(fs::path(c.out) / "meta.json", meta.dump(2) + "\n");
  std::cout << "cells=" << h.cells.size() << '\n';
  return kOk;
}

int cmd_verify(const Common& c, std::size_t triples, std::size_t trials) {
  VerifyConfig vc;
  std::vector<std::string> labels;
  if (int rc = guarded_config([&] {
        if (!c.config.empty()) {
          vc = verify_from_json(load_json_file(c.config));
          for (const auto& cs : vc.cases) labels.push_back(method_to_json(cs.method).dump());
        } else {
          for (std::size_t d : {2u, 10u, 100u})
            for (auto& e : verify_catalog(d)) {
              VerifyCase cs;
              cs.method = e.method;
              cs.d = d;
              cs.triples = triples;
              cs.trials = trials;
              vc.cases.push_back(cs);
              labels.push_back(e.label);
            }
        }
        if (c.seed) vc.seed = *c.seed;
        for (const auto& cs : vc.cases) validate(cs.method, cs.d, cs.n_workers);
        return 0;
      }))
    return rc;
  std::vector<VerifyOutcome> out(vc.cases.size());
  ThreadPool pool(c.threads.value_or(1));
  pool.parallel_for(vc.cases.size(), [&](std::size_t i) {
    out[i] = verify_case(labels[i], vc.cases[i], vc.seed);
  });
  std::string csv = "method,d,A,B,max_ratio,max_excess_in_se,failures,pass\n";
  bool all = true;
  for (const auto& o : out) {
    const std::string label = '"' + [&] {
      std::string s;
      for (char ch : o.label) s += ch == '"' ? std::string("\"\"") : std::string(1, ch);
      return s;
    }() + '"';
    csv += label + ',' + std::to_string(o.d) + ',' + format_double(o.params.A) +
           ',' + format_double(o.params.B * o.b_scale) + ',' +
           format_double(o.report.max_ratio) + ',' +
           format_double(o.report.max_excess_in_se) + ',' +
           std::to_string(o.report.failures) + ',' +
           (o.report.pass ? "true" : "false") + '\n';
    std::cout << (o.report.pass ? "PASS " : "FAIL ") << o.label << " d=" << o.d
              << " max_ratio=" << format_double(o.report.max_ratio) << '\n';
    all = all && o.report.pass;
  }
  fs::create_directories(c.out);
  write_file_atomic(fs::path(c.out) / "verify.csv", csv);
  return all ? kOk : kVerifyFailed;
}

int cmd_gen_quadratic(std::size_t n, std::size_t d, double lambda, double s,
                      std::uint64_t seed, const std::string& out) {
  QuadraticProblem q;
  try {
    q = gen_quadratic(n, d, lambda, s, seed);
  } catch (const ParameterError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  }
  fs::create_directories(out);
  std::ostringstream os(std::ios::binary);
  write_snapshot(q, os);
  write_file_atomic(fs::path(out) / "quadratic.bin", os.str());
  json j = constants_json(q.constants());
  j["n"] = n;
  j["d"] = d;
  j["lambda"] = lambda;
  j["s"] = s;
  j["seed"] = seed;
  write_file_atomic(fs::path(out) / "constants.json", j.dump(2) + "\n");
  std::cout << j.dump() << '\n';
  return kOk;
}

int cmd_gen_logreg(std::size_t samples, std::size_t d, std::uint64_t seed,
                   const std::string& out) {
  const Dataset ds = make_synthetic_logreg(samples, d, seed);
  std::ostringstream os;
  write_libsvm(ds, os);
  const fs::path p(out);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  write_file_atomic(p, os.str());
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"threepc: distributed compressed-gradient experiments"};
  app.require_subcommand(1);

  Common run_opts, sweep_opts, heat_opts, verify_opts;
  auto* run_cmd = app.add_subcommand("run", "single training run");
  add_common(run_cmd, run_opts, true);
  auto* sweep_cmd = app.add_subcommand("sweep", "stepsize-multiplier sweep");
  add_common(sweep_cmd, sweep_opts, true);
  auto* heat_cmd = app.add_subcommand("heatmap", "CLAG K x zeta grid");
  add_common(heat_cmd, heat_opts, true);
  auto* verify_cmd =
      app.add_subcommand("verify", "Monte-Carlo check of the three-point inequality");
  add_common(verify_cmd, verify_opts, false);
  std::size_t triples = 10000, trials = 1000;
  verify_cmd->add_option("--triples", triples, "triples per case (catalog)")
      ->capture_default_str();
  verify_cmd->add_option("--trials", trials, "inner draws per triple (catalog)")
      ->capture_default_str();

  auto* gen_cmd = app.add_subcommand("gen-quadratic", "generate a quadratic task");
  std::size_t gn = 10, gd = 100;
  double glambda = 1e-6, gs = 0.0;
  std::uint64_t gseed = 0;
  std::string gout = "out";
  gen_cmd->add_option("--n", gn, "clients")->capture_default_str();
  gen_cmd->add_option("--d", gd, "dimension")->capture_default_str();
  gen_cmd->add_option("--lambda", glambda, "smallest eigenvalue of the mean")
      ->capture_default_str();
  gen_cmd->add_option("--s", gs, "client noise scale")->capture_default_str();
  gen_cmd->add_option("--seed", gseed, "seed")->capture_default_str();
  gen_cmd->add_option("--out", gout, "output directory")->capture_default_str();

  auto* logreg_cmd =
      app.add_subcommand("gen-logreg", "write a synthetic LIBSVM dataset");
  std::size_t ls = 1000, ld = 20;
  std::uint64_t lseed = 0;
  std::string lout = "synthetic.libsvm";
  logreg_cmd->add_option("--samples", ls, "rows")->capture_default_str();
  logreg_cmd->add_option("--d", ld, "features")->capture_default_str();
  logreg_cmd->add_option("--seed", lseed, "seed")->capture_default_str();
  logreg_cmd->add_option("--out", lout, "output file")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfigError;
  }

  try {
    if (*run_cmd) return cmd_run(run_opts);
    if (*sweep_cmd) return cmd_sweep(sweep_opts);
    if (*heat_cmd) return cmd_heatmap(heat_opts);
    if (*verify_cmd) return cmd_verify(verify_opts, triples, trials);
    if (*gen_cmd) return cmd_gen_quadratic(gn, gd, glambda, gs, gseed, gout);
    if (*logreg_cmd) return cmd_gen_logreg(ls, ld, lseed, lout);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kFailure;
}
