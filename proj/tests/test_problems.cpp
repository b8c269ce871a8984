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
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "threepc/problems.hpp"

namespace {

using namespace threepc;

// Central differences of f_i at step 1e-6.
DenseVector fd_gradient(const Problem& p, std::size_t i, const DenseVector& x) {
  DenseVector g(x.size()), tmp;
  for (std::size_t j = 0; j < x.size(); ++j) {
    DenseVector a = x, b = x;
    a[j] += 1e-6;
    b[j] -= 1e-6;
    g[j] = (p.gradient(i, a, tmp) - p.gradient(i, b, tmp)) / 2e-6;
  }
  return g;
}

void expect_gradient_matches_fd(const Problem& p, std::uint64_t seed, int points) {
  RngStream r(seed);
  for (int k = 0; k < points; ++k) {
    const DenseVector x = normal_vector(p.dim(), r);
    const std::size_t i = r.index(p.clients());
    DenseVector g;
    p.gradient(i, x, g);
    const DenseVector fd = fd_gradient(p, i, x);
    const double scale = std::max(1.0, std::sqrt(sq_norm(g)));
    ASSERT_LE(std::sqrt(sq_dist(g, fd)), 1e-5 * scale) << "point " << k;
  }
}

// Largest eigenvalue of a PSD matrix by power iteration.
double power_max(const linalg::SymBand& m, RngStream& r) {
  DenseVector v = normal_vector(m.d, r), w(m.d);
  double lam = 0.0;
  for (int it = 0; it < 20000; ++it) {
    m.multiply(v.span(), w.span());
    const double nw = std::sqrt(sq_norm(w));
    if (nw == 0.0) return 0.0;
    for (std::size_t j = 0; j < m.d; ++j) v[j] = w[j] / nw;
    lam = nw;
  }
  return m.quadratic_form(v.span()) > 0 ? m.quadratic_form(v.span()) : lam;
}

// ---------------------------------------------------------------------------

TEST(Quadratic, ZeroNoiseGivesIdenticalClients) {
  const auto q = gen_quadratic(5, 30, 1e-6, 0.0, 1);
  for (std::size_t i = 1; i < 5; ++i) {
    EXPECT_EQ(q.matrices[i].band, q.matrices[0].band);
    EXPECT_EQ(q.offsets[i], q.offsets[0]);
  }
  const auto k = q.constants();
  EXPECT_LT(k.L_pm, 1e-9);
  EXPECT_NEAR(k.L_plus, k.L_minus, 1e-9);
}

TEST(Quadratic, LargeDimensionSpectralNorm) {
  const auto q = gen_quadratic(2, 1000, 1e-6, 0.0, 1);
  EXPECT_NEAR(q.constants().L_minus, 1.0, 0.01);
}

TEST(Quadratic, ShiftPinsSmallestEigenvalue) {
  auto q = gen_quadratic(3, 4, 0.0, 0.0, 1);
  EXPECT_NEAR(linalg::min_eigenvalue(q.mean_matrix()), 0.0, 1e-12);
  for (double lambda : {1e-6, 1e-2, 0.5}) {
    for (double s : {0.0, 0.8}) {
      const auto p = gen_quadratic(7, 50, lambda, s, 3);
      EXPECT_NEAR(linalg::min_eigenvalue(p.mean_matrix()), lambda, 1e-9);
      const auto k = p.constants();
      ASSERT_TRUE(k.mu.has_value());
      EXPECT_NEAR(*k.mu, lambda, 1e-9);
      EXPECT_LE(k.L_minus, k.L_plus + 1e-12);
    }
  }
}

TEST(Quadratic, StartingPointAndGradientAtZero) {
  const auto q = gen_quadratic(3, 16, 1e-3, 0.5, 2);
  EXPECT_EQ(q.x0[0], 4.0);
  for (std::size_t j = 1; j < 16; ++j) EXPECT_EQ(q.x0[j], 0.0);
  DenseVector g;
  for (std::size_t i = 0; i < 3; ++i) {
    q.gradient(i, DenseVector(16), g);
    EXPECT_EQ(g, -1.0 * q.offsets[i]);
  }
}

TEST(Quadratic, IdentityMatrixGradient) {
  QuadraticProblem q;
  linalg::SymBand eye(3, 0);
  eye.band[0] = {1, 1, 1};
  q.matrices = {eye};
  q.offsets = {DenseVector(3)};
  q.x0 = DenseVector(3);
  const DenseVector x{1.5, -2, 7};
  DenseVector g;
  q.gradient(0, x, g);
  EXPECT_EQ(g, x);
  EXPECT_EQ(q.constants().L_pm, 0.0);
}

TEST(Quadratic, GradientMatchesFiniteDifferences) {
  expect_gradient_matches_fd(gen_quadratic(4, 12, 1e-2, 0.8, 5), 6, 100);
}

TEST(Quadratic, SingleClientHasNoVariance) {
  EXPECT_NEAR(gen_quadratic(1, 20, 1e-3, 0.8, 4).constants().L_pm, 0.0, 1e-12);
}

TEST(Quadratic, ConstantsMatchRayleighOracle) {
  const auto q = gen_quadratic(3, 5, 1e-3, 0.8, 7);
  const auto k = q.constants();
  // Variance matrix mean A_i² − Ā², built densely.
  linalg::SymBand var(5, 2);
  const auto& mean = q.mean_matrix();
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = i; j < std::min<std::size_t>(5, i + 3); ++j) {
      double s = 0.0, m2 = 0.0;
      for (const auto& a : q.matrices)
        for (std::size_t t = 0; t < 5; ++t) s += a(i, t) * a(t, j) / 3.0;
      for (std::size_t t = 0; t < 5; ++t) m2 += mean(i, t) * mean(t, j);
      var.band[j - i][i] = s - m2;
    }
  RngStream r(8);
  const double oracle = power_max(var, r);
  EXPECT_NEAR(k.L_pm * k.L_pm, oracle, 1e-6);
}

TEST(Quadratic, HessianVarianceInequality) {
  const auto q = gen_quadratic(6, 20, 1e-3, 0.8, 9);
  const auto k = q.constants();
  RngStream r(10);
  for (int t = 0; t < 200; ++t) {
    const DenseVector x = normal_vector(20, r), y = normal_vector(20, r);
    DenseVector gx, gy, mx(20), my(20);
    double avg = 0.0;
    for (std::size_t i = 0; i < 6; ++i) {
      q.gradient(i, x, gx);
      q.gradient(i, y, gy);
      avg += sq_dist(gx, gy) / 6.0;
      axpy(1.0 / 6.0, gx.span(), mx.span());
      axpy(1.0 / 6.0, gy.span(), my.span());
    }
    EXPECT_LE(avg - sq_dist(mx, my), k.L_pm * k.L_pm * sq_dist(x, y) * (1 + 1e-9) + 1e-12);
    EXPECT_LE(avg, k.L_plus * k.L_plus * sq_dist(x, y) * (1 + 1e-9));
  }
}

TEST(Quadratic, SuboptimalityIsExact) {
  const auto q = gen_quadratic(4, 10, 1e-2, 0.5, 11);
  const auto fstar = q.optimal_value();
  ASSERT_TRUE(fstar.has_value());
  RngStream r(12);
  const DenseVector x = normal_vector(10, r);
  EXPECT_NEAR(*q.suboptimality(x), q.value(x) - *fstar, 1e-10);
  EXPECT_NEAR(*q.suboptimality(*q.minimizer()), 0.0, 1e-20);
}

TEST(Quadratic, GenerationIsDeterministic) {
  const auto a = gen_quadratic(3, 8, 1e-6, 0.8, 42);
  const auto b = gen_quadratic(3, 8, 1e-6, 0.8, 42);
  std::ostringstream sa, sb;
  write_snapshot(a, sa);
  write_snapshot(b, sb);
  EXPECT_EQ(sa.str(), sb.str());
  const auto c = gen_quadratic(3, 8, 1e-6, 0.8, 43);
  std::ostringstream sc;
  write_snapshot(c, sc);
  EXPECT_NE(sa.str(), sc.str());
}

TEST(Quadratic, SnapshotRoundTrip) {
  const auto a = gen_quadratic(3, 9, 1e-4, 0.8, 13);
  std::stringstream ss;
  write_snapshot(a, ss);
  const auto b = read_snapshot(ss);
  EXPECT_EQ(b.dim(), 9u);
  EXPECT_EQ(b.clients(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(b.matrices[i].band, a.matrices[i].band);
    EXPECT_EQ(b.offsets[i], a.offsets[i]);
  }
  EXPECT_EQ(b.x0, a.x0);
  EXPECT_EQ(b.lambda_reg, a.lambda_reg);
  std::stringstream bad("XXXX");
  EXPECT_THROW(read_snapshot(bad), std::runtime_error);
}

TEST(Quadratic, RejectsBadParameters) {
  EXPECT_THROW(gen_quadratic(0, 5, 0, 0, 1), ParameterError);
  EXPECT_THROW(gen_quadratic(2, 1, 0, 0, 1), ParameterError);
  EXPECT_THROW(gen_quadratic(2, 5, -1, 0, 1), ParameterError);
}

// ---------------------------------------------------------------------------

Dataset parse(const std::string& text) {
  std::istringstream in(text);
  return parse_libsvm(in);
}

TEST(LibSVM, ParsesExamples) {
  auto ds = parse("+1 1:0.5 3:2\n");
  ASSERT_EQ(ds.size(), 1u);
  EXPECT_EQ(ds.d, 3u);
  EXPECT_EQ(ds.labels[0], 1.0);
  EXPECT_EQ(ds.rows[0], (std::vector<double>{0.5, 0, 2}));

  ds = parse("0 2:1\n");
  EXPECT_EQ(ds.labels[0], -1.0);
  EXPECT_EQ(ds.rows[0], (std::vector<double>{0, 1}));

  ds = parse("");
  EXPECT_EQ(ds.size(), 0u);
  EXPECT_EQ(ds.d, 0u);
}

TEST(LibSVM, MixedLabelsCommentsAndBlankLines) {
  const auto ds = parse("# header\n-1 1:1\n\n1 2:3 # trailing\n");
  ASSERT_EQ(ds.size(), 2u);
  EXPECT_EQ(ds.labels, (std::vector<double>{-1, 1}));
  EXPECT_EQ(ds.rows[1], (std::vector<double>{0, 3}));
}

TEST(LibSVM, ReportsLineNumbers) {
  try {
    parse("1 1:1\n1 3:1 2:1\n");
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  EXPECT_THROW(parse("1 0:1\n"), ParseError);
  EXPECT_THROW(parse("1 1:x\n"), ParseError);
  EXPECT_THROW(parse("1 1\n"), ParseError);
  EXPECT_THROW(parse("2 1:1\n"), ParseError);
  EXPECT_THROW(parse("abc 1:1\n"), ParseError);
  EXPECT_THROW(parse("1 1:1 1:2\n"), ParseError);
}

TEST(LibSVM, WriteParseRoundTrip) {
  const Dataset ds = make_synthetic_logreg(50, 6, 3);
  std::stringstream ss;
  write_libsvm(ds, ss);
  const Dataset back = parse_libsvm(ss);
  ASSERT_EQ(back.size(), ds.size());
  EXPECT_EQ(back.labels, ds.labels);
  for (std::size_t r = 0; r < ds.size(); ++r)
    for (std::size_t j = 0; j < back.d; ++j) EXPECT_EQ(back.rows[r][j], ds.rows[r][j]);
}

TEST(Partition, EvenShardsWithRemainderDropped) {
  Dataset ds;
  ds.d = 1;
  for (int r = 0; r < 10; ++r) {
    ds.rows.push_back({double(r)});
    ds.labels.push_back(1);
  }
  auto sh = partition_even(ds, 3, RngStream(1));
  ASSERT_EQ(sh.size(), 3u);
  std::vector<int> seen(10, 0);
  for (const auto& s : sh) {
    EXPECT_EQ(s.size(), 3u);
    for (const auto& row : s.rows) ++seen[static_cast<int>(row[0])];
  }
  int total = 0;
  for (int v : seen) {
    EXPECT_LE(v, 1);
    total += v;
  }
  EXPECT_EQ(total, 9);

  sh = partition_even(ds, 10, RngStream(1));
  for (const auto& s : sh) EXPECT_EQ(s.size(), 1u);
  sh = partition_even(ds, 1, RngStream(1));
  EXPECT_EQ(sh[0].size(), 10u);
  EXPECT_THROW(partition_even(ds, 11, RngStream(1)), ParameterError);
}

// ---------------------------------------------------------------------------

Dataset single(std::vector<double> row, double label) {
  Dataset ds;
  ds.d = row.size();
  ds.rows = {std::move(row)};
  ds.labels = {label};
  return ds;
}

TEST(LogReg, ValueAtZero) {
  const Dataset ds = make_synthetic_logreg(40, 5, 1);
  const LogRegProblem p(partition_even(ds, 4, RngStream(2)), 0.1);
  EXPECT_NEAR(p.value(DenseVector(5)), std::log(2.0), 1e-15);
}

TEST(LogReg, SingleSampleGradient) {
  const LogRegProblem p({single({1, 0}, 1)}, 0.0);
  DenseVector g;
  p.gradient(0, DenseVector(2), g);
  EXPECT_EQ(g, (DenseVector{-0.5, 0}));
}

TEST(LogReg, GradientMatchesFiniteDifferences) {
  const Dataset ds = make_synthetic_logreg(60, 8, 4);
  const LogRegProblem p(partition_even(ds, 3, RngStream(5)), 0.1);
  expect_gradient_matches_fd(p, 6, 100);
}

TEST(LogReg, StableForLargeMargins) {
  const LogRegProblem p({single({1000, 0}, 1)}, 0.1);
  DenseVector g;
  const double f = p.gradient(0, DenseVector{-5, 0}, g);
  EXPECT_TRUE(std::isfinite(f));
  EXPECT_TRUE(all_finite(g));
  EXPECT_NEAR(f, 5000.0 + 0.1 * 25.0 / 26.0, 1e-9);
}

TEST(LogReg, SmoothnessExamples) {
  EXPECT_NEAR(LogRegProblem({single({2, 0}, 1)}, 0.0).client_smoothness(0), 1.0, 1e-12);
  EXPECT_NEAR(LogRegProblem({single({0, 0}, 1)}, 0.3).client_smoothness(0), 0.6, 1e-12);
}

TEST(LogReg, LipschitzBoundHoldsOnSamples) {
  const Dataset ds = make_synthetic_logreg(100, 6, 7);
  const LogRegProblem p(partition_even(ds, 5, RngStream(8)), 0.1);
  const auto k = p.constants();
  EXPECT_LE(k.L_minus, k.L_plus + 1e-12);
  RngStream r(9);
  for (int t = 0; t < 1000; ++t) {
    const DenseVector x = normal_vector(6, r), y = normal_vector(6, r);
    const std::size_t i = r.index(5);
    DenseVector gx, gy;
    p.gradient(i, x, gx);
    p.gradient(i, y, gy);
    ASSERT_LE(std::sqrt(sq_dist(gx, gy)),
              p.client_smoothness(i) * std::sqrt(sq_dist(x, y)) * (1 + 1e-12));
  }
}

TEST(LogReg, RejectsEmptyData) {
  EXPECT_THROW(LogRegProblem({}, 0.1), ParameterError);
  Dataset empty;
  EXPECT_THROW(LogRegProblem({empty}, 0.1), ParameterError);
}

}  // namespace
