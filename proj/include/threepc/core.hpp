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
#ifndef THREEPC_CORE_HPP
#define THREEPC_CORE_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace threepc {

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

/// An argument lies outside the range an operation accepts (K > d, p > 1, ...).
class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A constant was requested for an object that does not define it, e.g. the
/// contraction parameter of an unbiased-only compressor.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : std::runtime_error("line " + std::to_string(line) + ": " + what),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// ---------------------------------------------------------------------------
// DenseVector
// ---------------------------------------------------------------------------

/// Fixed-length vector of doubles. Parameters, gradients and compressed
/// messages all travel as DenseVector.
class DenseVector {
 public:
  DenseVector() = default;
  explicit DenseVector(std::size_t d, double fill = 0.0) : v_(d, fill) {}
  DenseVector(std::initializer_list<double> init) : v_(init) {}
  explicit DenseVector(std::vector<double> v) : v_(std::move(v)) {}

  std::size_t size() const noexcept { return v_.size(); }
  bool empty() const noexcept { return v_.empty(); }

  double& operator[](std::size_t j) noexcept { return v_[j]; }
  double operator[](std::size_t j) const noexcept { return v_[j]; }

  double* data() noexcept { return v_.data(); }
  const double* data() const noexcept { return v_.data(); }
  auto begin() noexcept { return v_.begin(); }
  auto end() noexcept { return v_.end(); }
  auto begin() const noexcept { return v_.begin(); }
  auto end() const noexcept { return v_.end(); }

  std::span<double> span() noexcept { return v_; }
  std::span<const double> span() const noexcept { return v_; }
  const std::vector<double>& values() const noexcept { return v_; }

  void assign(std::size_t d, double fill) { v_.assign(d, fill); }
  void fill(double value) { std::fill(v_.begin(), v_.end(), value); }

  bool operator==(const DenseVector&) const = default;

 private:
  std::vector<double> v_;
};

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) s += a[j] * b[j];
  return s;
}

inline double sq_norm(std::span<const double> v) { return dot(v, v); }

inline double sq_norm(const DenseVector& v) { return sq_norm(v.span()); }

inline double dot(const DenseVector& a, const DenseVector& b) {
  return dot(a.span(), b.span());
}

/// ‖a − b‖² without materializing the difference.
inline double sq_dist(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const double t = a[j] - b[j];
    s += t * t;
  }
  return s;
}

inline double sq_dist(const DenseVector& a, const DenseVector& b) {
  return sq_dist(a.span(), b.span());
}

inline DenseVector operator-(const DenseVector& a, const DenseVector& b) {
  DenseVector out(a.size());
  for (std::size_t j = 0; j < a.size(); ++j) out[j] = a[j] - b[j];
  return out;
}

inline DenseVector operator+(const DenseVector& a, const DenseVector& b) {
  DenseVector out(a.size());
  for (std::size_t j = 0; j < a.size(); ++j) out[j] = a[j] + b[j];
  return out;
}

inline DenseVector operator*(double s, const DenseVector& a) {
  DenseVector out(a.size());
  for (std::size_t j = 0; j < a.size(); ++j) out[j] = s * a[j];
  return out;
}

/// y += a * x
inline void axpy(double a, std::span<const double> x, std::span<double> y) {
  for (std::size_t j = 0; j < x.size(); ++j) y[j] += a * x[j];
}

inline bool all_finite(std::span<const double> v) {
  for (double e : v)
    if (!std::isfinite(e)) return false;
  return true;
}

inline bool all_finite(const DenseVector& v) { return all_finite(v.span()); }

// ---------------------------------------------------------------------------
// RngStream
// ---------------------------------------------------------------------------

namespace detail {

constexpr std::uint64_t splitmix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t fnv1a(std::string_view s) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace detail

/// Counter-based random stream. A stream is identified by a 64-bit key that is
/// a hash of (master seed, derivation path); the n-th output is a pure function
/// of (key, n). Child streams never share a mutable generator with their
/// parent, so workers can draw concurrently without coordination.
///
/// Satisfies UniformRandomBitGenerator.
class RngStream {
 public:
  using result_type = std::uint64_t;

  explicit RngStream(std::uint64_t master_seed = 0)
      : key_(detail::splitmix64(master_seed ^ 0x3c6ef372fe94f82bULL)) {}

  RngStream derive(std::string_view label, std::uint64_t index) const {
    RngStream child;
    const std::uint64_t l = detail::splitmix64(detail::fnv1a(label));
    const std::uint64_t i = detail::splitmix64(index ^ 0xa54ff53a5f1d36f1ULL);
    child.key_ = detail::splitmix64(key_ ^ l ^ (i * 0x9e3779b97f4a7c15ULL));
    child.counter_ = 0;
    return child;
  }

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()() noexcept {
    return detail::splitmix64(key_ + 0xd1b54a32d192ed03ULL * ++counter_);
  }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept {
    return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
  }

  /// Uniform integer on [0, n).
  std::size_t index(std::size_t n) noexcept {
    // Lemire's multiply-shift with rejection.
    std::uint64_t x = (*this)();
    __uint128_t m = static_cast<__uint128_t>(x) * n;
    auto low = static_cast<std::uint64_t>(m);
    if (low < n) {
      const std::uint64_t threshold = (0 - static_cast<std::uint64_t>(n)) % n;
      while (low < threshold) {
        x = (*this)();
        m = static_cast<__uint128_t>(x) * n;
        low = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::size_t>(m >> 64);
  }

  bool bernoulli(double p) noexcept { return uniform() < p; }

  /// Standard normal via Box-Muller; consumes two outputs per call.
  double normal() noexcept {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

  std::uint64_t key() const noexcept { return key_; }

 private:
  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
};

inline RngStream derive_stream(const RngStream& master, std::string_view label,
                               std::uint64_t index) {
  return master.derive(label, index);
}

inline DenseVector normal_vector(std::size_t d, RngStream& rng) {
  DenseVector v(d);
  for (auto& e : v) e = rng.normal();
  return v;
}

}  // namespace threepc

#endif  // THREEPC_CORE_HPP
