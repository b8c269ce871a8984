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
#ifndef THREEPC_IO_HPP
#define THREEPC_IO_HPP

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "threepc/config.hpp"
#include "threepc/engine.hpp"
#include "threepc/experiments.hpp"

namespace threepc {

/// Shortest text that reads back to the same double; "inf"/"nan" otherwise.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  if (v == std::floor(v) && std::fabs(v) < 1e15) {
    std::snprintf(buf, sizeof buf, "%.0f", v);
    return buf;
  }
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

inline constexpr const char* kRecordsHeader =
    "t,f,grad_norm_sq,G_t,bits_cum_per_worker,transmitted_fraction";

inline std::string records_csv(const std::vector<RunRecord>& recs) {
  std::string out = kRecordsHeader;
  out += '\n';
  for (const auto& r : recs) {
    out += std::to_string(r.t);
    for (double v : {r.f, r.grad_norm_sq, r.G, r.bits_cum_per_worker,
                     r.transmitted_fraction}) {
      out += ',';
      out += format_double(v);
    }
    out += '\n';
  }
  return out;
}

inline std::string heatmap_csv(const HeatmapResult& h) {
  std::string out = "K,zeta,best_multiplier,bits\n";
  for (const auto& c : h.cells) {
    out += std::to_string(c.k) + ',' + format_double(c.zeta) + ',' +
           (c.best_multiplier ? format_double(*c.best_multiplier) : "") + ',' +
           format_double(c.bits) + '\n';
  }
  return out;
}

inline std::string sweep_csv(const SweepResult& s) {
  std::string out =
      "multiplier,gamma,bits,final_grad_norm_sq,rounds,termination\n";
  for (const auto& e : s.entries) {
    out += format_double(e.multiplier) + ',' + format_double(e.gamma) + ',' +
           format_double(e.bits) + ',' + format_double(e.final_grad_norm_sq) +
           ',' + std::to_string(e.rounds) + ',' +
           (e.error.empty() ? to_string(e.reason) : std::string("error")) + '\n';
  }
  return out;
}

/// Writes through a temporary sibling and renames it into place.
inline void write_file_atomic(const std::filesystem::path& path,
                              const std::string& content) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot write " + tmp.string());
    os << content;
    if (!os) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline json number_or_null(double v) {
  return std::isfinite(v) ? json(v) : json(nullptr);
}

inline json theory_json(const TheoryParams& tp) {
  json j{{"A", tp.A}, {"B", tp.B}, {"aggregated_error", tp.aggregated_error}};
  if (tp.s_star) j["s_star"] = *tp.s_star;
  return j;
}

inline json constants_json(const SmoothnessConstants& k) {
  json j{{"L_minus", k.L_minus}, {"L_plus", k.L_plus}, {"L_pm", k.L_pm}};
  j["mu"] = k.mu ? json(*k.mu) : json(nullptr);
  return j;
}

inline json run_meta_json(const ExperimentConfig& cfg,
                          const ExperimentResult& r) {
  json j;
  j["config"] = experiment_to_json(cfg);
  j["theory"] = theory_json(r.params);
  j["constants"] = constants_json(r.constants);
  j["gamma"] = r.gamma;
  j["termination"] = to_string(r.run.reason);
  j["rounds"] = r.run.records.empty() ? 0 : r.run.records.back().t;
  j["total_bits"] = r.run.total_bits;
  if (!r.run.records.empty()) {
    j["delta0"] = r.run.records.front().suboptimality
                      ? json(*r.run.records.front().suboptimality)
                      : json(nullptr);
  }
  return j;
}

}  // namespace threepc

#endif  // THREEPC_IO_HPP
