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
#include <algorithm>
#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "threepc/core.hpp"
#include "threepc/linalg.hpp"

namespace {

using namespace threepc;
using namespace threepc::linalg;

// Cyclic Jacobi rotations; returns all eigenvalues, ascending.
std::vector<double> jacobi_eigenvalues(DenseSym m) {
  const std::size_t n = m.n;
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += m(p, q) * m(p, q);
    if (off < 1e-30) break;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) {
        if (m(p, q) == 0.0) continue;
        const double theta = (m(q, q) - m(p, p)) / (2 * m(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::fabs(theta) + std::sqrt(theta * theta + 1));
        const double c = 1 / std::sqrt(t * t + 1), s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double mkp = m(k, p), mkq = m(k, q);
          m(k, p) = c * mkp - s * mkq;
          m(k, q) = s * mkp + c * mkq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double mpk = m(p, k), mqk = m(q, k);
          m(p, k) = c * mpk - s * mqk;
          m(q, k) = s * mpk + c * mqk;
        }
      }
  }
  std::vector<double> ev(n);
  for (std::size_t i = 0; i < n; ++i) ev[i] = m(i, i);
  std::sort(ev.begin(), ev.end());
  return ev;
}

DenseSym random_sym(std::size_t n, RngStream& r) {
  DenseSym m(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) m(i, j) = m(j, i) = r.normal();
  return m;
}

TEST(Tridiagonal, SecondDifferenceSpectrum) {
  // tridiag(−1, 2, −1) of size d has eigenvalues 2 − 2cos(kπ/(d+1)).
  const std::size_t d = 40;
  SymTridiagonal t;
  t.diag.assign(d, 2.0);
  t.off.assign(d - 1, -1.0);
  for (std::size_t k = 0; k < d; ++k) {
    const double exact = 2 - 2 * std::cos(double(k + 1) * M_PI / double(d + 1));
    EXPECT_NEAR(eigenvalue(t, k), exact, 1e-12);
  }
  EXPECT_EQ(sturm_count(t, 0.0), 0u);
  EXPECT_EQ(sturm_count(t, 4.0), d);
}

TEST(Dense, HouseholderMatchesJacobi) {
  RngStream r(1);
  for (std::size_t n : {1u, 2u, 3u, 7u, 20u}) {
    const DenseSym m = random_sym(n, r);
    const auto ev = jacobi_eigenvalues(m);
    const SymTridiagonal t = tridiagonalize(m);
    for (std::size_t k = 0; k < n; ++k) EXPECT_NEAR(eigenvalue(t, k), ev[k], 1e-10);
    EXPECT_NEAR(max_eigenvalue(m), ev.back(), 1e-10);
    EXPECT_NEAR(min_eigenvalue(m), ev.front(), 1e-10);
  }
}

TEST(Band, EigenvaluesMatchJacobi) {
  RngStream r(2);
  for (std::size_t w : {0u, 1u, 2u, 3u}) {
    SymBand a(15, w);
    for (auto& b : a.band)
      for (auto& e : b) e = r.normal();
    const auto ev = jacobi_eigenvalues(a.to_dense());
    EXPECT_NEAR(max_eigenvalue(a), ev.back(), 1e-10);
    EXPECT_NEAR(min_eigenvalue(a), ev.front(), 1e-10);
  }
}

TEST(Band, SquareAndProducts) {
  RngStream r(3);
  SymBand a(9, 2);
  for (auto& b : a.band)
    for (auto& e : b) e = r.normal();
  const SymBand sq = square(a);
  const DenseSym da = a.to_dense();
  for (std::size_t i = 0; i < 9; ++i)
    for (std::size_t j = 0; j < 9; ++j) {
      double s = 0;
      for (std::size_t k = 0; k < 9; ++k) s += da(i, k) * da(k, j);
      EXPECT_NEAR(sq(i, j), s, 1e-12);
    }
  const DenseVector x = normal_vector(9, r);
  DenseVector ax(9);
  a.multiply(x.span(), ax.span());
  for (std::size_t i = 0; i < 9; ++i) {
    double s = 0;
    for (std::size_t k = 0; k < 9; ++k) s += da(i, k) * x[k];
    EXPECT_NEAR(ax[i], s, 1e-12);
  }
  EXPECT_NEAR(a.quadratic_form(x.span()), dot(x, ax), 1e-10);
}

TEST(Band, SolveSpd) {
  RngStream r(4);
  SymBand a(30, 2);
  for (auto& b : a.band)
    for (auto& e : b) e = 0.3 * r.normal();
  a.add_diagonal(3.0);
  const DenseVector b = normal_vector(30, r);
  const auto x = solve_spd(a, b.span());
  ASSERT_TRUE(x.has_value());
  DenseVector ax(30);
  a.multiply(x->span(), ax.span());
  for (std::size_t i = 0; i < 30; ++i) EXPECT_NEAR(ax[i], b[i], 1e-12);

  SymBand neg(3, 0);
  neg.band[0] = {1.0, -1.0, 1.0};
  EXPECT_FALSE(solve_spd(neg, b.span().first(3)).has_value());
}

TEST(Band, WeightedSumAndDifference) {
  SymBand a(4, 1), b(4, 0);
  a.band[0] = {1, 2, 3, 4};
  a.band[1] = {1, 1, 1};
  b.band[0] = {4, 4, 4, 4};
  const std::vector<SymBand> ms{a, b};
  const SymBand m = weighted_sum(ms, 0.5);
  EXPECT_DOUBLE_EQ(m(0, 0), 2.5);
  EXPECT_DOUBLE_EQ(m(1, 2), 0.5);
  const SymBand d = difference(a, b);
  EXPECT_DOUBLE_EQ(d(3, 3), 0.0);
  EXPECT_DOUBLE_EQ(d(2, 1), 1.0);
}

}  // namespace
