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
#ifndef THREEPC_THEORY_HPP
#define THREEPC_THEORY_HPP

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>

#include "threepc/compressors.hpp"
#include "threepc/core.hpp"
#include "threepc/mechanisms.hpp"

namespace threepc {

/// Constants (A, B) of a three-point compressor, optionally with the free
/// parameter s at which they were instantiated.
struct TheoryParams {
  double A = 1.0;
  double B = 0.0;
  std::optional<double> s_star;
  /// MARINA's constants bound ‖g − ∇f‖² of the aggregate, not the average
  /// of per-worker errors.
  bool aggregated_error = false;

  double ratio() const { return B / A; }
};

struct SmoothnessConstants {
  double L_minus = 0.0;
  double L_plus = 0.0;
  double L_pm = 0.0;
  std::optional<double> mu;
};

namespace detail {

inline void check_unit_interval(double v, const char* name) {
  if (!(v > 0.0 && v <= 1.0))
    throw ParameterError(std::string(name) + " must lie in (0, 1]");
}

/// A = 1 − √(1−a), B = c(1−a)/(1 − √(1−a)), s* = 1/√(1−a) − 1, with the a = 1
/// limit taken explicitly.
inline TheoryParams sqrt_shaped(double a, double c) {
  TheoryParams tp;
  if (a >= 1.0) {
    tp.A = 1.0;
    tp.B = 0.0;
    return tp;
  }
  const double r = std::sqrt(1.0 - a);
  tp.A = 1.0 - r;
  tp.B = c * (1.0 - a) / (1.0 - r);
  tp.s_star = 1.0 / r - 1.0;
  return tp;
}

}  // namespace detail

inline TheoryParams params_ef21(double alpha) {
  detail::check_unit_interval(alpha, "alpha");
  return detail::sqrt_shaped(alpha, 1.0);
}

/// EF21 constants at an arbitrary split s ∈ (0, α/(1−α)).
inline TheoryParams params_ef21_at(double alpha, double s) {
  detail::check_unit_interval(alpha, "alpha");
  if (!(s > 0.0) || (1.0 - alpha) * (1.0 + s) >= 1.0)
    throw ParameterError("ef21: need s > 0 and (1-alpha)(1+s) < 1");
  TheoryParams tp;
  tp.A = 1.0 - (1.0 - alpha) * (1.0 + s);
  tp.B = (1.0 - alpha) * (1.0 + 1.0 / s);
  tp.s_star = s;
  return tp;
}

inline TheoryParams params_lag(double zeta) {
  if (zeta < 0.0) throw ParameterError("zeta must be nonnegative");
  return {1.0, zeta, std::nullopt, false};
}

inline TheoryParams params_clag(double alpha, double zeta) {
  if (zeta < 0.0) throw ParameterError("zeta must be nonnegative");
  TheoryParams tp = params_ef21(alpha);
  tp.B = std::max(tp.B, zeta);
  return tp;
}

inline TheoryParams params_v1(double alpha) {
  detail::check_unit_interval(alpha, "alpha");
  return {1.0, 1.0 - alpha, std::nullopt, false};
}

inline TheoryParams params_v2(double alpha, double omega) {
  detail::check_unit_interval(alpha, "alpha");
  if (omega < 0.0) throw ParameterError("omega must be nonnegative");
  return {alpha, (1.0 - alpha) * omega, std::nullopt, false};
}

inline TheoryParams params_v3(double alpha, double a1, double b1) {
  detail::check_unit_interval(alpha, "alpha");
  detail::check_unit_interval(a1, "A1");
  if (b1 < 0.0) throw ParameterError("B1 must be nonnegative");
  return {1.0 - (1.0 - alpha) * (1.0 - a1), (1.0 - alpha) * b1, std::nullopt,
          false};
}

inline TheoryParams params_v4(double alpha1, double alpha2) {
  detail::check_unit_interval(alpha1, "alpha1");
  detail::check_unit_interval(alpha2, "alpha2");
  const double alpha_bar = 1.0 - (1.0 - alpha1) * (1.0 - alpha2);
  return detail::sqrt_shaped(alpha_bar, 1.0);
}

/// 3PCv5 at its optimal split. α may be 0 here (C ≡ 0 is allowed).
inline TheoryParams params_v5(double p, double alpha) {
  detail::check_unit_interval(p, "p");
  if (!(alpha >= 0.0 && alpha <= 1.0))
    throw ParameterError("alpha must lie in [0, 1]");
  return detail::sqrt_shaped(p, 1.0 - alpha);
}

/// 3PCv5 constants at an arbitrary split s ∈ (0, p/(1−p)).
inline TheoryParams params_v5_at(double p, double alpha, double s) {
  detail::check_unit_interval(p, "p");
  if (!(s > 0.0) || (1.0 - p) * (1.0 + s) >= 1.0)
    throw ParameterError("3pcv5: need s > 0 and (1-p)(1+s) < 1");
  TheoryParams tp;
  tp.A = p - s * (1.0 - p);
  tp.B = (1.0 - p) * (1.0 + 1.0 / s) * (1.0 - alpha);
  tp.s_star = s;
  return tp;
}

inline TheoryParams params_marina(double p, double omega, std::size_t n) {
  detail::check_unit_interval(p, "p");
  if (omega < 0.0) throw ParameterError("omega must be nonnegative");
  if (n < 1) throw ParameterError("n must be positive");
  return {p, (1.0 - p) * omega / static_cast<double>(n), std::nullopt, true};
}

/// Constants for a configured mechanism on dimension d with n workers.
inline TheoryParams params_for(const MethodSpec& spec, std::size_t d,
                               std::size_t n) {
  switch (spec.method) {
    case Method::EF21: return params_ef21(alpha_of(spec.c, d, n));
    case Method::LAG: return params_lag(spec.zeta);
    case Method::CLAG: return params_clag(alpha_of(spec.c, d, n), spec.zeta);
    case Method::V1: return params_v1(alpha_of(spec.c, d, n));
    case Method::V2:
      return params_v2(alpha_of(spec.c, d, n), omega_of(spec.q, d, n));
    case Method::V3: {
      if (!spec.inner) throw ParameterError("3pcv3: missing inner mechanism");
      const TheoryParams inner = params_for(*spec.inner, d, n);
      return params_v3(alpha_of(spec.c, d, n), inner.A, inner.B);
    }
    case Method::V4:
      return params_v4(alpha_of(spec.c, d, n), alpha_of(spec.c2, d, n));
    case Method::V5: return params_v5(spec.p, alpha_of(spec.c, d, n));
    case Method::MARINA:
      return params_marina(spec.p, omega_of(spec.q, d, n), n);
  }
  throw ParameterError("unknown method");
}

// ---------------------------------------------------------------------------
// Stepsizes and bounds
// ---------------------------------------------------------------------------

inline double stepsize_noncvx(const SmoothnessConstants& k,
                              const TheoryParams& tp) {
  return 1.0 / (k.L_minus + k.L_plus * std::sqrt(tp.ratio()));
}

inline double stepsize_pl(const SmoothnessConstants& k,
                          const TheoryParams& tp) {
  if (!k.mu || !(*k.mu > 0.0))
    throw DomainError("stepsize_pl: needs a positive PL constant mu");
  return std::min(1.0 / (k.L_minus + k.L_plus * std::sqrt(2.0 * tp.ratio())),
                  tp.A / (2.0 * *k.mu));
}

/// Bound on (1/T) Σ_{t<T} ‖∇f(x^t)‖².
inline double bound_noncvx(double delta0, double gamma, std::size_t T,
                           double g0, double A) {
  const double t = static_cast<double>(T);
  return 2.0 * delta0 / (gamma * t) + g0 / (A * t);
}

/// Bound on f(x^T) − f*.
inline double bound_pl(double delta0, double gamma, double mu, std::size_t T,
                       double g0, double A) {
  return std::pow(1.0 - gamma * mu, static_cast<double>(T)) *
         (delta0 + gamma / A * g0);
}

/// Iteration count for the PL rate, up to the hidden constant:
/// max{(L− + L+√(B/A))/μ, A} · log((Δ⁰ + G⁰γ/A)/ε).
inline double complexity_pl(const SmoothnessConstants& k,
                            const TheoryParams& tp, double delta0, double g0,
                            double gamma, double eps) {
  if (!k.mu) throw DomainError("complexity_pl: needs mu");
  const double lead =
      std::max((k.L_minus + k.L_plus * std::sqrt(tp.ratio())) / *k.mu, tp.A);
  return lead * std::log((delta0 + g0 * gamma / tp.A) / eps);
}

/// a γ² + b γ ≤ 1, which holds for every γ ≤ 1/(√a + b).
inline bool stepsize_fact_check(double a, double b, double gamma) {
  return a * gamma * gamma + b * gamma <= 1.0;
}

}  // namespace threepc

#endif  // THREEPC_THEORY_HPP
