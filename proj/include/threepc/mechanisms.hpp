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
#ifndef THREEPC_MECHANISMS_HPP
#define THREEPC_MECHANISMS_HPP

#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "threepc/compressors.hpp"
#include "threepc/core.hpp"

namespace threepc {

/// The gradient communication mechanisms. Each maps (h, y, x) to the next
/// estimate the server will hold for a worker:
///   h  last estimate the server holds (g_i^t)
///   y  previous local gradient        (∇f_i(x^t))
///   x  current local gradient         (∇f_i(x^{t+1}))
enum class Method { EF21, LAG, CLAG, V1, V2, V3, V4, V5, MARINA };

enum class LagTrigger {
  GradientDifference,  // ‖x − h‖² > ζ‖x − y‖²
  IterateDifference,   // ‖x − h‖² > ζ L_i² ‖x^{t+1} − x^t‖²
};

inline std::string to_string(Method m);

struct MethodSpec {
  Method method = Method::EF21;
  CompressorSpec c;   // contractive C; the outer C1 for V4
  CompressorSpec c2;  // V4 inner contractive C2
  CompressorSpec q;   // unbiased Q (V2, MARINA)
  double zeta = 0.0;
  double p = 1.0;
  bool per_worker_coin = false;
  LagTrigger trigger = LagTrigger::GradientDifference;
  std::shared_ptr<const MethodSpec> inner;  // V3

  static MethodSpec ef21(CompressorSpec c) {
    MethodSpec m;
    m.method = Method::EF21;
    m.c = std::move(c);
    return m;
  }
  static MethodSpec lag(double zeta) {
    MethodSpec m;
    m.method = Method::LAG;
    m.zeta = zeta;
    return m;
  }
  static MethodSpec clag(CompressorSpec c, double zeta) {
    MethodSpec m;
    m.method = Method::CLAG;
    m.c = std::move(c);
    m.zeta = zeta;
    return m;
  }
  static MethodSpec v1(CompressorSpec c) {
    MethodSpec m;
    m.method = Method::V1;
    m.c = std::move(c);
    return m;
  }
  static MethodSpec v2(CompressorSpec q, CompressorSpec c) {
    MethodSpec m;
    m.method = Method::V2;
    m.q = std::move(q);
    m.c = std::move(c);
    return m;
  }
  static MethodSpec v3(MethodSpec inner, CompressorSpec c) {
    MethodSpec m;
    m.method = Method::V3;
    m.inner = std::make_shared<const MethodSpec>(std::move(inner));
    m.c = std::move(c);
    return m;
  }
  static MethodSpec v4(CompressorSpec c1, CompressorSpec c2) {
    MethodSpec m;
    m.method = Method::V4;
    m.c = std::move(c1);
    m.c2 = std::move(c2);
    return m;
  }
  static MethodSpec v5(double p, CompressorSpec c) {
    MethodSpec m;
    m.method = Method::V5;
    m.p = p;
    m.c = std::move(c);
    return m;
  }
  static MethodSpec marina(double p, CompressorSpec q) {
    MethodSpec m;
    m.method = Method::MARINA;
    m.p = p;
    m.q = std::move(q);
    return m;
  }
};

struct MechanismState {
  DenseVector h;
  DenseVector y;
};

enum class PayloadKind { Flag, Dense, Sparse };

/// One message on the uplink. Dense and Sparse payloads either overwrite the
/// receiving coordinates or are added to them.
struct Payload {
  PayloadKind kind = PayloadKind::Flag;
  std::vector<std::uint32_t> index;  // Sparse only
  std::vector<double> value;
  bool overwrite = false;
  bool skip = false;  // Flag only: the worker keeps its previous estimate
  std::size_t index_count = 0;  // indices charged on the wire
  std::uint32_t flag_bits = 0;
};

struct StepResult {
  DenseVector g_next;
  std::vector<Payload> payloads;
};

/// Randomness and side information for one worker in one round.
struct StepContext {
  RngStream rng;     // keyed by (worker, round)
  RngStream shared;  // keyed by round only
  std::size_t worker = 0;
  std::size_t n_workers = 1;
  bool coin = true;  // round coin for V5, MARINA and BernoulliP
  double iterate_step_sq = 0.0;  // ‖x^{t+1} − x^t‖², IterateDifference only
  double smoothness = 0.0;       // L_i, IterateDifference only
};

// ---------------------------------------------------------------------------
// Payload plumbing
// ---------------------------------------------------------------------------

inline std::uint32_t index_bits(std::size_t d) {
  std::uint32_t b = 0;
  while ((std::size_t{1} << b) < d) ++b;
  return b;
}

inline std::uint64_t payload_bits(const Payload& p, std::size_t d) {
  return 32ULL * p.value.size() +
         static_cast<std::uint64_t>(index_bits(d)) * p.index_count +
         p.flag_bits;
}

inline std::uint64_t bits_for(const StepResult& r, std::size_t d) {
  std::uint64_t total = 0;
  for (const auto& p : r.payloads) total += payload_bits(p, d);
  return total;
}

inline Payload flag_payload(bool skip) {
  Payload p;
  p.kind = PayloadKind::Flag;
  p.skip = skip;
  p.flag_bits = 1;
  return p;
}

inline Payload dense_payload(const DenseVector& v) {
  Payload p;
  p.kind = PayloadKind::Dense;
  p.value = v.values();
  p.overwrite = true;
  return p;
}

/// Writes `payload` into `base`.
inline void apply_payload(DenseVector& base, const Payload& p) {
  if (p.kind == PayloadKind::Flag) return;
  if (p.kind == PayloadKind::Dense) {
    for (std::size_t j = 0; j < p.value.size(); ++j)
      base[j] = p.overwrite ? p.value[j] : base[j] + p.value[j];
    return;
  }
  for (std::size_t m = 0; m < p.index.size(); ++m) {
    const auto j = p.index[m];
    base[j] = p.overwrite ? p.value[m] : base[j] + p.value[m];
  }
}

/// Server side: rebuilds g_i^{t+1} from its copy of g_i^t and the messages.
inline DenseVector reconstruct(const DenseVector& h,
                               const std::vector<Payload>& payloads) {
  DenseVector g = h;
  for (const auto& p : payloads) apply_payload(g, p);
  return g;
}

namespace detail {

inline CompressionContext role_context(const StepContext& ctx,
                                       std::string_view role) {
  CompressionContext c;
  c.rng = ctx.rng.derive(role, 0);
  c.shared = ctx.shared.derive(role, 0);
  c.worker = ctx.worker;
  c.n_workers = ctx.n_workers;
  c.coin = ctx.coin;
  return c;
}

inline Payload to_payload(Compressed&& comp, bool overwrite) {
  Payload p;
  const bool dense = comp.index.size() == comp.dim;
  p.kind = dense ? PayloadKind::Dense : PayloadKind::Sparse;
  p.index_count = comp.index_on_wire && !dense ? comp.index.size() : 0;
  p.value = std::move(comp.value);
  if (!dense) p.index = std::move(comp.index);
  p.overwrite = overwrite;
  return p;
}

/// base + C(x − base). Coordinate-keeping compressors send the target value
/// x_j itself, which equals base_j + (x_j − base_j) exactly.
inline Payload correct(DenseVector& g, const DenseVector& base,
                       const DenseVector& x, const CompressorSpec& c,
                       const CompressionContext& cctx) {
  const DenseVector r = x - base;
  Compressed comp = compress(c, r.span(), cctx);
  if (comp.unscaled)
    for (std::size_t m = 0; m < comp.index.size(); ++m)
      comp.value[m] = x[comp.index[m]];
  const bool keep = comp.unscaled;
  Payload p = to_payload(std::move(comp), keep);
  g = base;
  apply_payload(g, p);
  return p;
}

/// h + C(x − y) as an additive message.
inline Payload shift(DenseVector& g, const DenseVector& h,
                     const DenseVector& x, const DenseVector& y,
                     const CompressorSpec& c, const CompressionContext& cctx) {
  const DenseVector r = x - y;
  Payload p = to_payload(compress(c, r.span(), cctx), false);
  g = h;
  apply_payload(g, p);
  return p;
}

inline double trigger_threshold(const MechanismState& s, const DenseVector& x,
                                double zeta, LagTrigger trigger,
                                const StepContext& ctx) {
  if (trigger == LagTrigger::IterateDifference)
    return zeta * ctx.smoothness * ctx.smoothness * ctx.iterate_step_sq;
  return zeta * sq_dist(x, s.y);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Update rules
// ---------------------------------------------------------------------------

/// EF21: h + C(x − h).
inline StepResult ef21_step(const MechanismState& s, const DenseVector& x,
                            const CompressorSpec& c, const StepContext& ctx) {
  StepResult r;
  r.payloads.push_back(
      detail::correct(r.g_next, s.h, x, c, detail::role_context(ctx, "C")));
  return r;
}

/// LAG: x if ‖x − h‖² > ζ‖x − y‖², otherwise h.
inline StepResult lag_step(const MechanismState& s, const DenseVector& x,
                           double zeta, const StepContext& ctx,
                           LagTrigger trigger = LagTrigger::GradientDifference) {
  StepResult r;
  const bool fire =
      sq_dist(x, s.h) > detail::trigger_threshold(s, x, zeta, trigger, ctx);
  if (fire) {
    r.g_next = x;
    r.payloads.push_back(dense_payload(x));
  } else {
    r.g_next = s.h;
    r.payloads.push_back(flag_payload(true));
  }
  return r;
}

/// CLAG: h + C(x − h) under the LAG trigger, otherwise h.
inline StepResult clag_step(const MechanismState& s, const DenseVector& x,
                            double zeta, const CompressorSpec& c,
                            const StepContext& ctx,
                            LagTrigger trigger = LagTrigger::GradientDifference) {
  StepResult r;
  const bool fire =
      sq_dist(x, s.h) > detail::trigger_threshold(s, x, zeta, trigger, ctx);
  if (fire) {
    r.payloads.push_back(
        detail::correct(r.g_next, s.h, x, c, detail::role_context(ctx, "C")));
  } else {
    r.g_next = s.h;
    r.payloads.push_back(flag_payload(true));
  }
  return r;
}

/// 3PCv1: y + C(x − y). The shift y itself travels uncompressed.
inline StepResult v1_step(const MechanismState& s, const DenseVector& x,
                          const CompressorSpec& c, const StepContext& ctx) {
  StepResult r;
  r.payloads.push_back(dense_payload(s.y));
  r.payloads.push_back(
      detail::correct(r.g_next, s.y, x, c, detail::role_context(ctx, "C")));
  return r;
}

/// 3PCv2: b + C(x − b) with b = h + Q(x − y).
inline StepResult v2_step(const MechanismState& s, const DenseVector& x,
                          const CompressorSpec& q, const CompressorSpec& c,
                          const StepContext& ctx) {
  StepResult r;
  DenseVector b;
  r.payloads.push_back(
      detail::shift(b, s.h, x, s.y, q, detail::role_context(ctx, "Q")));
  r.payloads.push_back(
      detail::correct(r.g_next, b, x, c, detail::role_context(ctx, "C")));
  return r;
}

inline StepResult step(const MethodSpec& spec, const MechanismState& s,
                       const DenseVector& x, const StepContext& ctx);

/// 3PCv3: b + C(x − b) with b the output of an inner mechanism.
inline StepResult v3_step(const MechanismState& s, const DenseVector& x,
                          const MethodSpec& inner, const CompressorSpec& c,
                          const StepContext& ctx) {
  StepContext inner_ctx = ctx;
  inner_ctx.rng = ctx.rng.derive("inner", 0);
  inner_ctx.shared = ctx.shared.derive("inner", 0);
  StepResult r = step(inner, s, x, inner_ctx);
  const DenseVector b = std::move(r.g_next);
  r.payloads.push_back(
      detail::correct(r.g_next, b, x, c, detail::role_context(ctx, "C")));
  return r;
}

/// 3PCv4: b + C1(x − b) with b = h + C2(x − h).
inline StepResult v4_step(const MechanismState& s, const DenseVector& x,
                          const CompressorSpec& c1, const CompressorSpec& c2,
                          const StepContext& ctx) {
  StepResult r;
  DenseVector b;
  r.payloads.push_back(
      detail::correct(b, s.h, x, c2, detail::role_context(ctx, "C2")));
  r.payloads.push_back(
      detail::correct(r.g_next, b, x, c1, detail::role_context(ctx, "C")));
  return r;
}

namespace detail {

inline StepResult coin_step(const MechanismState& s, const DenseVector& x,
                            const CompressorSpec& c, std::string_view role,
                            bool coin, bool per_worker_coin,
                            const StepContext& ctx) {
  StepResult r;
  if (per_worker_coin) r.payloads.push_back(flag_payload(false));
  if (coin) {
    r.g_next = x;
    r.payloads.push_back(dense_payload(x));
  } else {
    r.payloads.push_back(shift(r.g_next, s.h, x, s.y, c, role_context(ctx, role)));
  }
  return r;
}

}  // namespace detail

/// 3PCv5: x on a coin flip with probability p, otherwise h + C(x − y).
inline StepResult v5_step(const MechanismState& s, const DenseVector& x,
                          const CompressorSpec& c, bool coin,
                          const StepContext& ctx, bool per_worker_coin = false) {
  return detail::coin_step(s, x, c, "C", coin, per_worker_coin, ctx);
}

/// MARINA worker update: x on a coin flip, otherwise h + Q(x − y).
inline StepResult marina_step(const MechanismState& s, const DenseVector& x,
                              const CompressorSpec& q, bool coin,
                              const StepContext& ctx,
                              bool per_worker_coin = false) {
  return detail::coin_step(s, x, q, "Q", coin, per_worker_coin, ctx);
}

inline StepResult step(const MethodSpec& spec, const MechanismState& s,
                       const DenseVector& x, const StepContext& ctx) {
  switch (spec.method) {
    case Method::EF21: return ef21_step(s, x, spec.c, ctx);
    case Method::LAG: return lag_step(s, x, spec.zeta, ctx, spec.trigger);
    case Method::CLAG:
      return clag_step(s, x, spec.zeta, spec.c, ctx, spec.trigger);
    case Method::V1: return v1_step(s, x, spec.c, ctx);
    case Method::V2: return v2_step(s, x, spec.q, spec.c, ctx);
    case Method::V3:
      if (!spec.inner) throw ParameterError("3pcv3: missing inner mechanism");
      return v3_step(s, x, *spec.inner, spec.c, ctx);
    case Method::V4: return v4_step(s, x, spec.c, spec.c2, ctx);
    case Method::V5:
      return v5_step(s, x, spec.c, ctx.coin, ctx, spec.per_worker_coin);
    case Method::MARINA:
      return marina_step(s, x, spec.q, ctx.coin, ctx, spec.per_worker_coin);
  }
  throw ParameterError("unknown method");
}

// ---------------------------------------------------------------------------
// Method introspection
// ---------------------------------------------------------------------------

/// Probability of the coin a round flips for this mechanism, if it uses one.
inline std::optional<double> coin_probability(const MethodSpec& spec) {
  if (spec.method == Method::V5 || spec.method == Method::MARINA) return spec.p;
  auto bern = [](const CompressorSpec& c) -> std::optional<double> {
    if (c.kind == CompressorKind::BernoulliP) return c.p;
    for (const auto& part : c.parts)
      if (part.kind == CompressorKind::BernoulliP) return part.p;
    return std::nullopt;
  };
  if (auto p = bern(spec.c)) return p;
  if (auto p = bern(spec.c2)) return p;
  if (auto p = bern(spec.q)) return p;
  if (spec.inner) return coin_probability(*spec.inner);
  return std::nullopt;
}

/// Compressors the mechanism actually invokes.
inline std::vector<const CompressorSpec*> compressors_of(const MethodSpec& s) {
  std::vector<const CompressorSpec*> out;
  switch (s.method) {
    case Method::LAG: break;
    case Method::EF21:
    case Method::CLAG:
    case Method::V1:
    case Method::V5: out.push_back(&s.c); break;
    case Method::V2: out = {&s.q, &s.c}; break;
    case Method::V3:
      if (s.inner) out = compressors_of(*s.inner);
      out.push_back(&s.c);
      break;
    case Method::V4: out = {&s.c, &s.c2}; break;
    case Method::MARINA: out.push_back(&s.q); break;
  }
  return out;
}

inline bool is_deterministic(const MethodSpec& spec) {
  if (auto p = coin_probability(spec); p && *p < 1.0) return false;
  for (const auto* c : compressors_of(spec))
    if (!is_deterministic(*c)) return false;
  return true;
}

inline void validate(const MethodSpec& spec, std::size_t d,
                     std::size_t n_workers) {
  auto need_contractive = [&](const CompressorSpec& c, const char* what) {
    validate(c, d, n_workers);
    if (!is_contractive(c))
      throw ParameterError(to_string(spec.method) + ": " + what +
                           " must be contractive");
  };
  auto need_unbiased = [&](const CompressorSpec& c, const char* what) {
    validate(c, d, n_workers);
    if (!is_unbiased(c))
      throw ParameterError(to_string(spec.method) + ": " + what +
                           " must be unbiased");
  };
  if (spec.zeta < 0.0) throw ParameterError("zeta must be nonnegative");
  switch (spec.method) {
    case Method::EF21:
    case Method::CLAG:
    case Method::V1: need_contractive(spec.c, "C"); break;
    case Method::LAG: break;
    case Method::V2:
      need_unbiased(spec.q, "Q");
      need_contractive(spec.c, "C");
      break;
    case Method::V3:
      if (!spec.inner) throw ParameterError("3pcv3: missing inner mechanism");
      validate(*spec.inner, d, n_workers);
      need_contractive(spec.c, "C");
      break;
    case Method::V4:
      need_contractive(spec.c, "C1");
      need_contractive(spec.c2, "C2");
      break;
    case Method::V5:
      need_contractive(spec.c, "C");
      [[fallthrough]];
    case Method::MARINA:
      if (!(spec.p > 0.0 && spec.p <= 1.0))
        throw ParameterError(to_string(spec.method) + ": p must lie in (0, 1]");
      if (spec.method == Method::MARINA) need_unbiased(spec.q, "Q");
      break;
  }
}

inline std::string to_string(Method m) {
  switch (m) {
    case Method::EF21: return "ef21";
    case Method::LAG: return "lag";
    case Method::CLAG: return "clag";
    case Method::V1: return "3pcv1";
    case Method::V2: return "3pcv2";
    case Method::V3: return "3pcv3";
    case Method::V4: return "3pcv4";
    case Method::V5: return "3pcv5";
    case Method::MARINA: return "marina";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Monte-Carlo check of the three-point inequality
//   E‖C_{h,y}(x) − x‖² ≤ (1 − A)‖h − y‖² + B‖x − y‖²
// ---------------------------------------------------------------------------

struct VerifyOptions {
  std::size_t d = 10;
  std::size_t triples = 10000;
  std::size_t trials = 1000;  // inner draws per triple; 1 if deterministic
  std::size_t n_workers = 1;
  std::uint64_t seed = 0;
  /// Append the aligned triple on which the EF21 bound is attained.
  bool adversarial = false;
};

struct VerifyReport {
  double max_ratio = 0.0;           // max over triples of LHS/RHS
  double max_excess_in_se = -1e300;  // max over triples of (ratio − 1)/SE
  std::size_t worst_triple = 0;
  std::size_t triples_checked = 0;
  std::size_t failures = 0;
  bool deterministic = false;
  bool pass = true;
};

namespace detail {

/// h = 0, y = u/(1+s), x = u with u the all-ones vector: every Young and
/// Top-K step in the EF21 bound is an equality when s is the optimal split.
inline std::optional<MechanismState> adversarial_triple(const MethodSpec& spec,
                                                        std::size_t d,
                                                        DenseVector& x) {
  if (spec.method != Method::EF21 && spec.method != Method::CLAG)
    return std::nullopt;
  if (spec.c.kind != CompressorKind::TopK) return std::nullopt;
  const double alpha = alpha_of(spec.c, d);
  if (alpha >= 1.0) return std::nullopt;
  const double s = 1.0 / std::sqrt(1.0 - alpha) - 1.0;
  x = DenseVector(d, 1.0);
  return MechanismState{DenseVector(d), DenseVector(d, 1.0 / (1.0 + s))};
}

}  // namespace detail

inline VerifyReport verify_3pc_inequality(const MethodSpec& spec, double a,
                                          double b,
                                          const VerifyOptions& opt) {
  validate(spec, opt.d, opt.n_workers);
  VerifyReport rep;
  rep.deterministic = is_deterministic(spec);
  const std::size_t trials = rep.deterministic ? 1 : opt.trials;
  const auto coin_p = coin_probability(spec);
  const RngStream master(opt.seed);

  auto check = [&](std::size_t k, const MechanismState& s,
                   const DenseVector& x, const RngStream& triple_rng) {
    const double rhs = (1.0 - a) * sq_dist(s.h, s.y) + b * sq_dist(x, s.y);
    double mean = 0.0, m2 = 0.0;
    for (std::size_t j = 0; j < trials; ++j) {
      StepContext ctx;
      ctx.rng = triple_rng.derive("draw", j);
      ctx.shared = triple_rng.derive("shared", j);
      ctx.n_workers = opt.n_workers;
      if (coin_p) {
        RngStream coin = triple_rng.derive("coin", j);
        ctx.coin = coin.bernoulli(*coin_p);
      }
      const double e = sq_dist(step(spec, s, x, ctx).g_next, x);
      const double delta = e - mean;
      mean += delta / static_cast<double>(j + 1);
      m2 += delta * (e - mean);
    }
    const double se =
        trials > 1 ? std::sqrt(m2 / static_cast<double>(trials - 1) /
                               static_cast<double>(trials))
                   : 0.0;
    double ratio;
    if (rhs > 0.0)
      ratio = mean / rhs;
    else
      ratio = mean > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
    const double se_ratio = rhs > 0.0 ? se / rhs : 0.0;
    const bool ok = ratio <= 1.0 + 3.0 * se_ratio;
    const double excess =
        se_ratio > 0.0 ? (ratio - 1.0) / se_ratio
                       : (ratio > 1.0 ? std::numeric_limits<double>::infinity()
                                      : -std::numeric_limits<double>::infinity());
    if (ratio > rep.max_ratio || rep.triples_checked == 0) {
      rep.max_ratio = ratio;
      rep.worst_triple = k;
    }
    rep.max_excess_in_se = std::max(rep.max_excess_in_se, excess);
    ++rep.triples_checked;
    if (!ok) {
      ++rep.failures;
      rep.pass = false;
    }
  };

  for (std::size_t k = 0; k < opt.triples; ++k) {
    RngStream rng = master.derive("triple", k);
    MechanismState s{normal_vector(opt.d, rng), normal_vector(opt.d, rng)};
    const DenseVector x = normal_vector(opt.d, rng);
    check(k, s, x, rng);
  }
  if (opt.adversarial) {
    DenseVector x;
    if (auto s = detail::adversarial_triple(spec, opt.d, x))
      check(opt.triples, *s, x, master.derive("adversarial", 0));
  }
  return rep;
}

}  // namespace threepc

#endif  // THREEPC_MECHANISMS_HPP
