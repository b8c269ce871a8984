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
#ifndef THREEPC_LINALG_HPP
#define THREEPC_LINALG_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "threepc/core.hpp"

namespace threepc::linalg {

/// Symmetric tridiagonal matrix: diagonal of length d, off-diagonal of d − 1.
struct SymTridiagonal {
  std::vector<double> diag;
  std::vector<double> off;

  std::size_t size() const { return diag.size(); }
};

/// Number of eigenvalues strictly below `x` (Sturm sequence count).
inline std::size_t sturm_count(const SymTridiagonal& t, double x) {
  const std::size_t d = t.size();
  std::size_t count = 0;
  double q = 1.0;
  for (std::size_t i = 0; i < d; ++i) {
    const double b2 = i == 0 ? 0.0 : t.off[i - 1] * t.off[i - 1];
    q = t.diag[i] - x - (i == 0 ? 0.0 : b2 / q);
    if (q == 0.0) q = -1e-300;
    if (q < 0.0) ++count;
  }
  return count;
}

inline std::pair<double, double> gershgorin(const SymTridiagonal& t) {
  double lo = 0.0, hi = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    double r = 0.0;
    if (i > 0) r += std::fabs(t.off[i - 1]);
    if (i + 1 < t.size()) r += std::fabs(t.off[i]);
    if (i == 0) {
      lo = t.diag[i] - r;
      hi = t.diag[i] + r;
    } else {
      lo = std::min(lo, t.diag[i] - r);
      hi = std::max(hi, t.diag[i] + r);
    }
  }
  return {lo, hi};
}

/// k-th smallest eigenvalue (0-based) by bisection on the Sturm count.
inline double eigenvalue(const SymTridiagonal& t, std::size_t k) {
  auto [lo, hi] = gershgorin(t);
  const double scale = std::max({std::fabs(lo), std::fabs(hi), 1e-300});
  lo -= 1e-12 * scale;
  hi += 1e-12 * scale;
  for (int it = 0; it < 300; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (sturm_count(t, mid) > k)
      hi = mid;
    else
      lo = mid;
  }
  return 0.5 * (lo + hi);
}

inline double min_eigenvalue(const SymTridiagonal& t) { return eigenvalue(t, 0); }
inline double max_eigenvalue(const SymTridiagonal& t) {
  return eigenvalue(t, t.size() - 1);
}

/// Dense symmetric matrix, row-major.
struct DenseSym {
  std::size_t n = 0;
  std::vector<double> a;

  explicit DenseSym(std::size_t n_ = 0) : n(n_), a(n_ * n_, 0.0) {}
  double& operator()(std::size_t i, std::size_t j) { return a[i * n + j]; }
  double operator()(std::size_t i, std::size_t j) const { return a[i * n + j]; }
};

/// Householder reduction to tridiagonal form; eigenvalues are preserved.
inline SymTridiagonal tridiagonalize(DenseSym m) {
  const std::size_t n = m.n;
  SymTridiagonal t;
  t.diag.assign(n, 0.0);
  t.off.assign(n > 0 ? n - 1 : 0, 0.0);
  std::vector<double> v(n), p(n);
  for (std::size_t k = 0; k + 2 < n; ++k) {
    const std::size_t len = n - k - 1;
    double norm2 = 0.0;
    for (std::size_t i = 0; i < len; ++i) {
      v[i] = m(k + 1 + i, k);
      norm2 += v[i] * v[i];
    }
    const double norm = std::sqrt(norm2);
    if (norm == 0.0) {
      t.diag[k] = m(k, k);
      t.off[k] = 0.0;
      continue;
    }
    const double alpha = v[0] > 0.0 ? -norm : norm;
    v[0] -= alpha;
    double vnorm2 = 0.0;
    for (std::size_t i = 0; i < len; ++i) vnorm2 += v[i] * v[i];
    if (vnorm2 == 0.0) {
      t.diag[k] = m(k, k);
      t.off[k] = m(k + 1, k);
      continue;
    }
    const double inv = 1.0 / std::sqrt(vnorm2);
    for (std::size_t i = 0; i < len; ++i) v[i] *= inv;
    // p = A22 v, K = vᵀp, q = p − K v, A22 -= 2 v qᵀ + 2 q vᵀ
    double kk = 0.0;
    for (std::size_t i = 0; i < len; ++i) {
      const double* row = &m.a[(k + 1 + i) * n + k + 1];
      double s = 0.0;
      for (std::size_t j = 0; j < len; ++j) s += row[j] * v[j];
      p[i] = s;
      kk += v[i] * s;
    }
    for (std::size_t i = 0; i < len; ++i) p[i] -= kk * v[i];
    for (std::size_t i = 0; i < len; ++i) {
      double* row = &m.a[(k + 1 + i) * n + k + 1];
      const double vi = 2.0 * v[i], pi = 2.0 * p[i];
      for (std::size_t j = 0; j < len; ++j) row[j] -= vi * p[j] + pi * v[j];
    }
    t.diag[k] = m(k, k);
    t.off[k] = alpha;
  }
  if (n >= 2) {
    t.diag[n - 2] = m(n - 2, n - 2);
    t.off[n - 2] = m(n - 1, n - 2);
  }
  if (n >= 1) t.diag[n - 1] = m(n - 1, n - 1);
  return t;
}

inline double max_eigenvalue(const DenseSym& m) {
  return max_eigenvalue(tridiagonalize(m));
}
inline double min_eigenvalue(const DenseSym& m) {
  return min_eigenvalue(tridiagonalize(m));
}

// ---------------------------------------------------------------------------
// Symmetric band matrices
// ---------------------------------------------------------------------------

/// Symmetric matrix with half-bandwidth w: band[k][j] = A(j, j + k) for
/// k = 0..w and j < d − k.
struct SymBand {
  std::size_t d = 0;
  std::vector<std::vector<double>> band;

  SymBand() = default;
  SymBand(std::size_t d_, std::size_t w) : d(d_), band(w + 1) {
    for (std::size_t k = 0; k <= w; ++k) band[k].assign(d_ > k ? d_ - k : 0, 0.0);
  }

  std::size_t bandwidth() const { return band.empty() ? 0 : band.size() - 1; }

  double operator()(std::size_t i, std::size_t j) const {
    if (i > j) std::swap(i, j);
    const std::size_t k = j - i;
    return k < band.size() ? band[k][i] : 0.0;
  }

  /// out = A x
  void multiply(std::span<const double> x, std::span<double> out) const {
    const auto& b0 = band[0];
    for (std::size_t i = 0; i < d; ++i) out[i] = b0[i] * x[i];
    for (std::size_t k = 1; k < band.size(); ++k) {
      const auto& bk = band[k];
      for (std::size_t i = 0; i + k < d; ++i) {
        out[i] += bk[i] * x[i + k];
        out[i + k] += bk[i] * x[i];
      }
    }
  }

  double quadratic_form(std::span<const double> x) const {
    double s = 0.0;
    for (std::size_t i = 0; i < d; ++i) s += band[0][i] * x[i] * x[i];
    for (std::size_t k = 1; k < band.size(); ++k)
      for (std::size_t i = 0; i + k < d; ++i)
        s += 2.0 * band[k][i] * x[i] * x[i + k];
    return s;
  }

  void add_diagonal(double shift) {
    for (auto& e : band[0]) e += shift;
  }

  DenseSym to_dense() const {
    DenseSym m(d);
    for (std::size_t k = 0; k < band.size(); ++k)
      for (std::size_t i = 0; i + k < d; ++i) {
        m(i, i + k) = band[k][i];
        m(i + k, i) = band[k][i];
      }
    return m;
  }

  SymTridiagonal to_tridiagonal() const {
    SymTridiagonal t;
    t.diag = band[0];
    t.off = band.size() > 1 ? band[1] : std::vector<double>(d > 0 ? d - 1 : 0);
    return t;
  }
};

/// Σ wᵢ Aᵢ over matrices of possibly different bandwidths.
inline SymBand weighted_sum(std::span<const SymBand> ms, double weight) {
  std::size_t w = 0;
  for (const auto& m : ms) w = std::max(w, m.bandwidth());
  SymBand out(ms.empty() ? 0 : ms[0].d, w);
  for (const auto& m : ms)
    for (std::size_t k = 0; k < m.band.size(); ++k)
      for (std::size_t i = 0; i < m.band[k].size(); ++i)
        out.band[k][i] += weight * m.band[k][i];
  return out;
}

/// A² for symmetric band A; bandwidth doubles.
inline SymBand square(const SymBand& a) {
  const std::size_t w = a.bandwidth();
  SymBand out(a.d, 2 * w);
  for (std::size_t i = 0; i < a.d; ++i) {
    const std::size_t jmax = std::min(a.d - 1, i + 2 * w);
    for (std::size_t j = i; j <= jmax; ++j) {
      const std::size_t lo = j >= w ? j - w : 0;
      const std::size_t hi = std::min(a.d - 1, i + w);
      double s = 0.0;
      for (std::size_t m = lo; m <= hi; ++m) s += a(i, m) * a(m, j);
      out.band[j - i][i] = s;
    }
  }
  return out;
}

inline SymBand difference(const SymBand& a, const SymBand& b) {
  SymBand out(a.d, std::max(a.bandwidth(), b.bandwidth()));
  for (std::size_t k = 0; k < out.band.size(); ++k)
    for (std::size_t i = 0; i < out.band[k].size(); ++i)
      out.band[k][i] = (k < a.band.size() ? a.band[k][i] : 0.0) -
                       (k < b.band.size() ? b.band[k][i] : 0.0);
  return out;
}

/// Extreme eigenvalue of a symmetric band matrix; exact tridiagonal path when
/// the bandwidth is at most one.
inline double max_eigenvalue(const SymBand& a) {
  if (a.bandwidth() <= 1) return max_eigenvalue(a.to_tridiagonal());
  return max_eigenvalue(a.to_dense());
}

inline double min_eigenvalue(const SymBand& a) {
  if (a.bandwidth() <= 1) return min_eigenvalue(a.to_tridiagonal());
  return min_eigenvalue(a.to_dense());
}

/// Solves A x = b for symmetric positive definite band A by band Cholesky.
/// Returns nullopt if A is not numerically positive definite.
inline std::optional<DenseVector> solve_spd(const SymBand& a,
                                            std::span<const double> b) {
  const std::size_t d = a.d, w = a.bandwidth();
  // L stored as l[k][i] = L(i + k, i)
  std::vector<std::vector<double>> l(w + 1, std::vector<double>(d, 0.0));
  for (std::size_t j = 0; j < d; ++j) {
    double s = a(j, j);
    for (std::size_t k = 1; k <= w && k <= j; ++k)
      s -= l[k][j - k] * l[k][j - k];
    if (!(s > 0.0)) return std::nullopt;
    const double ljj = std::sqrt(s);
    l[0][j] = ljj;
    for (std::size_t k = 1; k <= w && j + k < d; ++k) {
      const std::size_t i = j + k;
      double t = a(i, j);
      for (std::size_t m = 1; m + k <= w && m <= j; ++m)
        t -= l[k + m][j - m] * l[m][j - m];
      l[k][j] = t / ljj;
    }
  }
  DenseVector x(d);
  for (std::size_t i = 0; i < d; ++i) {
    double t = b[i];
    for (std::size_t k = 1; k <= w && k <= i; ++k) t -= l[k][i - k] * x[i - k];
    x[i] = t / l[0][i];
  }
  for (std::size_t i = d; i-- > 0;) {
    double t = x[i];
    for (std::size_t k = 1; k <= w && i + k < d; ++k) t -= l[k][i] * x[i + k];
    x[i] = t / l[0][i];
  }
  return x;
}

}  // namespace threepc::linalg

#endif  // THREEPC_LINALG_HPP
