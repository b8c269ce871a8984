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
#ifndef THREEPC_COMPRESSORS_HPP
#define THREEPC_COMPRESSORS_HPP

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "threepc/core.hpp"

namespace threepc {

enum class CompressorKind {
  Identity,
  TopK,
  RandKUnbiased,
  CRandK,
  PermK,
  CPermK,
  BernoulliP,
  Compose,
};

inline std::string to_string(CompressorKind kind);

/// Declarative description of a primitive compressor. Sparsifiers use `k`,
/// BernoulliP uses `p`; PermK/CPermK take the worker count from the call
/// context. Compose(outer, inner) is plain composition outer(inner(x)).
struct CompressorSpec {
  CompressorKind kind = CompressorKind::Identity;
  std::size_t k = 0;
  double p = 1.0;
  /// Indices can be regenerated by the server from shared randomness, so they
  /// are not charged on the wire.
  bool shared_seed = false;
  std::vector<CompressorSpec> parts;  // Compose only: {outer, inner}

  static CompressorSpec identity() { return {}; }
  static CompressorSpec top_k(std::size_t k) {
    return {CompressorKind::TopK, k, 1.0, false, {}};
  }
  static CompressorSpec rand_k(std::size_t k, bool shared = false) {
    return {CompressorKind::RandKUnbiased, k, 1.0, shared, {}};
  }
  static CompressorSpec crand_k(std::size_t k, bool shared = false) {
    return {CompressorKind::CRandK, k, 1.0, shared, {}};
  }
  static CompressorSpec perm_k(bool shared = false) {
    return {CompressorKind::PermK, 0, 1.0, shared, {}};
  }
  static CompressorSpec cperm_k(bool shared = false) {
    return {CompressorKind::CPermK, 0, 1.0, shared, {}};
  }
  static CompressorSpec bernoulli(double p) {
    return {CompressorKind::BernoulliP, 0, p, false, {}};
  }
  static CompressorSpec compose(CompressorSpec outer, CompressorSpec inner) {
    CompressorSpec s{CompressorKind::Compose, 0, 1.0, false, {}};
    s.parts = {std::move(outer), std::move(inner)};
    return s;
  }

  bool operator==(const CompressorSpec&) const = default;
};

/// Randomness and topology visible to a compressor invocation.
struct CompressionContext {
  RngStream rng;            // private to this (worker, round, role)
  RngStream shared;         // identical for every worker in the round
  std::size_t worker = 0;
  std::size_t n_workers = 1;
  bool coin = true;         // BernoulliP outcome
};

/// Output of a compressor in sparse form. `value[j]` is the output at
/// coordinate `index[j]`; all other coordinates are zero. When `unscaled` is
/// set every value is a bitwise copy of the input coordinate.
struct Compressed {
  std::size_t dim = 0;
  std::vector<std::uint32_t> index;  // ascending
  std::vector<double> value;
  bool unscaled = true;
  bool index_on_wire = true;

  DenseVector dense() const {
    DenseVector out(dim);
    for (std::size_t j = 0; j < index.size(); ++j) out[index[j]] = value[j];
    return out;
  }
};

// ---------------------------------------------------------------------------
// Validation and theoretical constants
// ---------------------------------------------------------------------------

inline void validate(const CompressorSpec& spec, std::size_t d,
                     std::size_t n_workers) {
  switch (spec.kind) {
    case CompressorKind::Identity:
      return;
    case CompressorKind::TopK:
    case CompressorKind::RandKUnbiased:
    case CompressorKind::CRandK:
      if (spec.k < 1 || spec.k > d)
        throw ParameterError(to_string(spec.kind) + ": K=" +
                             std::to_string(spec.k) + " outside [1, " +
                             std::to_string(d) + "]");
      return;
    case CompressorKind::PermK:
    case CompressorKind::CPermK:
      if (n_workers == 0 || d % n_workers != 0)
        throw ParameterError(to_string(spec.kind) + ": n=" +
                             std::to_string(n_workers) +
                             " does not divide d=" + std::to_string(d));
      return;
    case CompressorKind::BernoulliP:
      if (!(spec.p > 0.0 && spec.p <= 1.0))
        throw ParameterError("bernoulli: p must lie in (0, 1]");
      return;
    case CompressorKind::Compose:
      if (spec.parts.size() != 2)
        throw ParameterError("compose: needs exactly two parts");
      validate(spec.parts[0], d, n_workers);
      validate(spec.parts[1], d, n_workers);
      return;
  }
}

inline bool is_contractive(const CompressorSpec& spec) {
  switch (spec.kind) {
    case CompressorKind::Identity:
    case CompressorKind::TopK:
    case CompressorKind::CRandK:
    case CompressorKind::CPermK:
    case CompressorKind::BernoulliP:
      return true;
    case CompressorKind::RandKUnbiased:
    case CompressorKind::PermK:
      return false;
    case CompressorKind::Compose:
      return spec.parts.size() == 2 && is_contractive(spec.parts[0]) &&
             is_contractive(spec.parts[1]);
  }
  return false;
}

inline bool is_unbiased(const CompressorSpec& spec) {
  switch (spec.kind) {
    case CompressorKind::Identity:
    case CompressorKind::RandKUnbiased:
    case CompressorKind::PermK:
      return true;
    case CompressorKind::Compose:
      return spec.parts.size() == 2 && is_unbiased(spec.parts[0]) &&
             is_unbiased(spec.parts[1]);
    default:
      return false;
  }
}

/// True when the output depends on nothing but the input vector.
inline bool is_deterministic(const CompressorSpec& spec) {
  switch (spec.kind) {
    case CompressorKind::Identity:
    case CompressorKind::TopK:
      return true;
    case CompressorKind::BernoulliP:
      return spec.p >= 1.0;
    case CompressorKind::Compose:
      return is_deterministic(spec.parts[0]) && is_deterministic(spec.parts[1]);
    default:
      return false;
  }
}

/// Contraction parameter α: E‖C(x) − x‖² ≤ (1 − α)‖x‖².
///
/// For Compose of two contractive (coordinate-keeping) compressors the kept
/// mass of the outer stage is at least α₁ of what the inner stage kept, which
/// gives α = α₁α₂.
inline double alpha_of(const CompressorSpec& spec, std::size_t d,
                       std::size_t n_workers = 1) {
  switch (spec.kind) {
    case CompressorKind::Identity:
      return 1.0;
    case CompressorKind::TopK:
    case CompressorKind::CRandK:
      return static_cast<double>(spec.k) / static_cast<double>(d);
    case CompressorKind::CPermK:
      return 1.0 / static_cast<double>(n_workers);
    case CompressorKind::BernoulliP:
      return spec.p;
    case CompressorKind::Compose:
      if (is_contractive(spec))
        return alpha_of(spec.parts[0], d, n_workers) *
               alpha_of(spec.parts[1], d, n_workers);
      break;
    default:
      break;
  }
  throw DomainError(to_string(spec.kind) + " is not a contractive compressor");
}

/// Variance parameter ω: E‖Q(x) − x‖² ≤ ω‖x‖² for unbiased Q.
inline double omega_of(const CompressorSpec& spec, std::size_t d,
                       std::size_t n_workers = 1) {
  switch (spec.kind) {
    case CompressorKind::Identity:
      return 0.0;
    case CompressorKind::RandKUnbiased:
      return static_cast<double>(d) / static_cast<double>(spec.k) - 1.0;
    case CompressorKind::PermK:
      return static_cast<double>(n_workers) - 1.0;
    case CompressorKind::Compose:
      if (is_unbiased(spec))
        return (1.0 + omega_of(spec.parts[0], d, n_workers)) *
                   (1.0 + omega_of(spec.parts[1], d, n_workers)) -
               1.0;
      break;
    default:
      break;
  }
  throw DomainError(to_string(spec.kind) + " is not an unbiased compressor");
}

inline std::string to_string(CompressorKind kind) {
  switch (kind) {
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
}

// ---------------------------------------------------------------------------
// Selection kernels
// ---------------------------------------------------------------------------

namespace detail {

/// Indices of the K largest |x_j|, ties broken toward the lower index,
/// returned in ascending order.
inline std::vector<std::uint32_t> top_k_indices(std::span<const double> x,
                                                std::size_t k) {
  std::vector<std::uint32_t> idx(x.size());
  std::iota(idx.begin(), idx.end(), 0u);
  if (k < x.size()) {
    auto before = [&](std::uint32_t a, std::uint32_t b) {
      const double fa = std::fabs(x[a]);
      const double fb = std::fabs(x[b]);
      return fa > fb || (fa == fb && a < b);
    };
    std::nth_element(idx.begin(), idx.begin() + static_cast<long>(k),
                     idx.end(), before);
    idx.resize(k);
  }
  std::sort(idx.begin(), idx.end());
  return idx;
}

/// Uniformly random K-subset of [0, d), ascending. Partial Fisher-Yates.
inline std::vector<std::uint32_t> random_subset(std::size_t d, std::size_t k,
                                                RngStream& rng) {
  std::vector<std::uint32_t> pool(d);
  std::iota(pool.begin(), pool.end(), 0u);
  for (std::size_t j = 0; j < k; ++j) {
    const std::size_t r = j + rng.index(d - j);
    std::swap(pool[j], pool[r]);
  }
  pool.resize(k);
  std::sort(pool.begin(), pool.end());
  return pool;
}

/// Block `worker` of `perm` split into n contiguous blocks of d/n entries,
/// ascending.
inline std::vector<std::uint32_t> block_of(std::span<const std::uint32_t> perm,
                                           std::size_t worker, std::size_t n) {
  const std::size_t b = perm.size() / n;
  std::vector<std::uint32_t> block(perm.begin() + static_cast<long>(worker * b),
                                   perm.begin() +
                                       static_cast<long>((worker + 1) * b));
  std::sort(block.begin(), block.end());
  return block;
}

/// Uniformly random permutation of [0, d) drawn from the shared stream.
inline std::vector<std::uint32_t> shared_permutation(std::size_t d,
                                                     RngStream shared) {
  std::vector<std::uint32_t> perm(d);
  std::iota(perm.begin(), perm.end(), 0u);
  for (std::size_t j = d; j > 1; --j) {
    const std::size_t r = shared.index(j);
    std::swap(perm[j - 1], perm[r]);
  }
  return perm;
}

inline std::vector<std::uint32_t> perm_block(std::size_t d, std::size_t worker,
                                             std::size_t n, RngStream shared) {
  return block_of(shared_permutation(d, shared), worker, n);
}

inline Compressed gather(std::span<const double> x,
                         std::vector<std::uint32_t> idx, double scale,
                         bool index_on_wire) {
  Compressed out;
  out.dim = x.size();
  out.value.resize(idx.size());
  for (std::size_t j = 0; j < idx.size(); ++j)
    out.value[j] = scale == 1.0 ? x[idx[j]] : scale * x[idx[j]];
  out.index = std::move(idx);
  out.unscaled = scale == 1.0;
  out.index_on_wire = index_on_wire && out.index.size() < x.size();
  return out;
}

}  // namespace detail

/// Applies `spec` to `x`. Every worker-private draw comes from ctx.rng and
/// every round-shared draw (PermK permutations) from ctx.shared.
inline Compressed compress(const CompressorSpec& spec,
                           std::span<const double> x,
                           const CompressionContext& ctx) {
  const std::size_t d = x.size();
  const double n = static_cast<double>(ctx.n_workers);
  switch (spec.kind) {
    case CompressorKind::Identity: {
      std::vector<std::uint32_t> all(d);
      std::iota(all.begin(), all.end(), 0u);
      return detail::gather(x, std::move(all), 1.0, false);
    }
    case CompressorKind::TopK:
      return detail::gather(x, detail::top_k_indices(x, spec.k), 1.0, true);
    case CompressorKind::RandKUnbiased: {
      RngStream rng = ctx.rng;
      return detail::gather(
          x, detail::random_subset(d, spec.k, rng),
          static_cast<double>(d) / static_cast<double>(spec.k),
          !spec.shared_seed);
    }
    case CompressorKind::CRandK: {
      RngStream rng = ctx.rng;
      return detail::gather(x, detail::random_subset(d, spec.k, rng), 1.0,
                            !spec.shared_seed);
    }
    case CompressorKind::PermK:
      return detail::gather(
          x, detail::perm_block(d, ctx.worker, ctx.n_workers, ctx.shared), n,
          !spec.shared_seed);
    case CompressorKind::CPermK:
      // PermK scaled by 1/(1+ω) with ω = n − 1: the kept block is unscaled.
      return detail::gather(
          x, detail::perm_block(d, ctx.worker, ctx.n_workers, ctx.shared), 1.0,
          !spec.shared_seed);
    case CompressorKind::BernoulliP: {
      std::vector<std::uint32_t> idx;
      if (ctx.coin) {
        idx.resize(d);
        std::iota(idx.begin(), idx.end(), 0u);
      }
      return detail::gather(x, std::move(idx), 1.0, false);
    }
    case CompressorKind::Compose: {
      CompressionContext inner_ctx = ctx;
      inner_ctx.rng = ctx.rng.derive("compose", 1);
      CompressionContext outer_ctx = ctx;
      outer_ctx.rng = ctx.rng.derive("compose", 0);
      const Compressed inner = compress(spec.parts[1], x, inner_ctx);
      const DenseVector z = inner.dense();
      Compressed outer = compress(spec.parts[0], z.span(), outer_ctx);
      // Restrict to the inner support so that unscaled outputs stay bitwise
      // copies of x.
      std::vector<char> in_support(d, 0);
      for (auto j : inner.index) in_support[j] = 1;
      Compressed out;
      out.dim = d;
      for (std::size_t m = 0; m < outer.index.size(); ++m) {
        if (in_support[outer.index[m]]) {
          out.index.push_back(outer.index[m]);
          out.value.push_back(outer.value[m]);
        }
      }
      out.unscaled = inner.unscaled && outer.unscaled;
      out.index_on_wire = (inner.index_on_wire || outer.index_on_wire) &&
                          out.index.size() < d;
      return out;
    }
  }
  throw ParameterError("unknown compressor kind");
}

// ---------------------------------------------------------------------------
// Dense convenience wrappers for the individual operators
// ---------------------------------------------------------------------------

inline void check_k(std::size_t k, std::size_t d) {
  if (k < 1 || k > d)
    throw ParameterError("K=" + std::to_string(k) + " outside [1, " +
                         std::to_string(d) + "]");
}

inline DenseVector top_k(const DenseVector& x, std::size_t k) {
  check_k(k, x.size());
  return detail::gather(x.span(), detail::top_k_indices(x.span(), k), 1.0, true)
      .dense();
}

inline DenseVector rand_k_unbiased(const DenseVector& x, std::size_t k,
                                   RngStream rng) {
  check_k(k, x.size());
  const double scale =
      static_cast<double>(x.size()) / static_cast<double>(k);
  return detail::gather(x.span(), detail::random_subset(x.size(), k, rng),
                        scale, true)
      .dense();
}

inline DenseVector crand_k(const DenseVector& x, std::size_t k, RngStream rng) {
  check_k(k, x.size());
  return detail::gather(x.span(), detail::random_subset(x.size(), k, rng), 1.0,
                        true)
      .dense();
}

inline void check_perm(std::size_t worker, std::size_t n, std::size_t d) {
  if (n == 0 || d % n != 0)
    throw ParameterError("perm: n=" + std::to_string(n) +
                         " does not divide d=" + std::to_string(d));
  if (worker >= n) throw ParameterError("perm: worker id out of range");
}

inline DenseVector perm_k(const DenseVector& x, std::size_t worker,
                          std::size_t n, const RngStream& shared) {
  check_perm(worker, n, x.size());
  return detail::gather(x.span(),
                        detail::perm_block(x.size(), worker, n, shared),
                        static_cast<double>(n), true)
      .dense();
}

inline DenseVector cperm_k(const DenseVector& x, std::size_t worker,
                           std::size_t n, const RngStream& shared) {
  check_perm(worker, n, x.size());
  return detail::gather(x.span(),
                        detail::perm_block(x.size(), worker, n, shared), 1.0,
                        true)
      .dense();
}

inline DenseVector bernoulli_c(const DenseVector& x, double p, bool coin) {
  if (!(p > 0.0 && p <= 1.0))
    throw ParameterError("bernoulli: p must lie in (0, 1]");
  return coin ? x : DenseVector(x.size());
}

}  // namespace threepc

#endif  // THREEPC_COMPRESSORS_HPP
