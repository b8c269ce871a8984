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
#ifndef THREEPC_PROBLEMS_HPP
#define THREEPC_PROBLEMS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "threepc/core.hpp"
#include "threepc/linalg.hpp"
#include "threepc/theory.hpp"

namespace threepc {

/// A finite-sum objective f(x) = (1/n) Σ f_i(x) split across n clients.
class Problem {
 public:
  virtual ~Problem() = default;

  virtual std::size_t dim() const = 0;
  virtual std::size_t clients() const = 0;
  virtual DenseVector initial_point() const = 0;

  /// Writes ∇f_i(x) into `out` and returns f_i(x).
  virtual double gradient(std::size_t i, const DenseVector& x,
                          DenseVector& out) const = 0;

  virtual double value(const DenseVector& x) const = 0;

  /// f(x) − f* when the minimum is known in closed form.
  virtual std::optional<double> suboptimality(const DenseVector&) const {
    return std::nullopt;
  }

  virtual SmoothnessConstants constants() const = 0;

  /// Smoothness constant of f_i alone.
  virtual double client_smoothness(std::size_t i) const = 0;

  virtual std::string name() const = 0;
};

// ---------------------------------------------------------------------------
// Synthetic quadratics: f_i(x) = ½ xᵀ A_i x − xᵀ b_i
// ---------------------------------------------------------------------------

class QuadraticProblem final : public Problem {
 public:
  std::vector<linalg::SymBand> matrices;
  std::vector<DenseVector> offsets;
  DenseVector x0;
  double lambda_reg = 0.0;
  double noise_scale = 0.0;

  std::size_t dim() const override { return x0.size(); }
  std::size_t clients() const override { return matrices.size(); }
  DenseVector initial_point() const override { return x0; }

  double gradient(std::size_t i, const DenseVector& x,
                  DenseVector& out) const override {
    out.assign(x.size(), 0.0);
    matrices[i].multiply(x.span(), out.span());
    double v = 0.5 * dot(x, out) - dot(x, offsets[i]);
    for (std::size_t j = 0; j < out.size(); ++j) out[j] -= offsets[i][j];
    return v;
  }

  double value(const DenseVector& x) const override {
    double s = 0.0;
    DenseVector tmp;
    for (std::size_t i = 0; i < clients(); ++i) s += gradient(i, x, tmp);
    return s / static_cast<double>(clients());
  }

  /// ½ (x − x*)ᵀ Ā (x − x*), exact up to rounding even when f* is large.
  std::optional<double> suboptimality(const DenseVector& x) const override {
    const auto& m = minimizer();
    if (!m) return std::nullopt;
    const DenseVector e = x - *m;
    return 0.5 * mean_matrix().quadratic_form(e.span());
  }

  const linalg::SymBand& mean_matrix() const {
    if (!mean_) {
      mean_ = linalg::weighted_sum(matrices,
                                   1.0 / static_cast<double>(clients()));
    }
    return *mean_;
  }

  const std::optional<DenseVector>& minimizer() const {
    if (!minimizer_) {
      DenseVector bbar(dim());
      for (const auto& b : offsets)
        axpy(1.0 / static_cast<double>(clients()), b.span(), bbar.span());
      minimizer_ = linalg::solve_spd(mean_matrix(), bbar.span());
    }
    return *minimizer_;
  }

  std::optional<double> optimal_value() const {
    const auto& m = minimizer();
    if (!m) return std::nullopt;
    return value(*m);
  }

  SmoothnessConstants constants() const override;

  double client_smoothness(std::size_t i) const override {
    return std::max(std::fabs(linalg::max_eigenvalue(matrices[i])),
                    std::fabs(linalg::min_eigenvalue(matrices[i])));
  }

  std::string name() const override { return "quadratic"; }

 private:
  mutable std::optional<linalg::SymBand> mean_;
  mutable std::optional<std::optional<DenseVector>> minimizer_;
};

/// Quadratic task generator: A_i = (ν_i/4) tridiag(−1, 2, −1) with
/// ν_i = 1 + sξ, b_i = (ν_i/4)(−1 + sξ', 0, …, 0), then every A_i is shifted
/// so that the mean matrix has smallest eigenvalue exactly λ.
inline QuadraticProblem gen_quadratic(std::size_t n, std::size_t d,
                                      double lambda, double s,
                                      std::uint64_t seed) {
  if (n < 1) throw ParameterError("gen_quadratic: n must be positive");
  if (d < 2) throw ParameterError("gen_quadratic: d must be at least 2");
  if (lambda < 0.0 || s < 0.0)
    throw ParameterError("gen_quadratic: lambda and s must be nonnegative");
  QuadraticProblem q;
  q.lambda_reg = lambda;
  q.noise_scale = s;
  const RngStream master(seed);
  for (std::size_t i = 0; i < n; ++i) {
    RngStream rng = master.derive("quadratic-client", i);
    const double nu_s = 1.0 + s * rng.normal();
    const double nu_b = s * rng.normal();
    DenseVector b(d);
    b[0] = nu_s / 4.0 * (-1.0 + nu_b);
    linalg::SymBand a(d, 1);
    for (auto& e : a.band[0]) e = nu_s / 4.0 * 2.0;
    for (auto& e : a.band[1]) e = nu_s / 4.0 * -1.0;
    q.matrices.push_back(std::move(a));
    q.offsets.push_back(std::move(b));
  }
  const linalg::SymBand mean =
      linalg::weighted_sum(q.matrices, 1.0 / static_cast<double>(n));
  const double shift = lambda - linalg::min_eigenvalue(mean);
  for (auto& a : q.matrices) a.add_diagonal(shift);
  q.x0 = DenseVector(d);
  q.x0[0] = std::sqrt(static_cast<double>(d));
  return q;
}

/// L− = λ_max(Ā), L+² = λ_max(mean A_i²), L±² = λ_max(mean (A_i − Ā)²),
/// μ = λ_min(Ā).
inline SmoothnessConstants quad_constants(const QuadraticProblem& q) {
  const auto& mean = q.mean_matrix();
  const double w = 1.0 / static_cast<double>(q.clients());
  std::vector<linalg::SymBand> squares, centered;
  squares.reserve(q.clients());
  centered.reserve(q.clients());
  for (const auto& a : q.matrices) {
    squares.push_back(linalg::square(a));
    centered.push_back(linalg::square(linalg::difference(a, mean)));
  }
  SmoothnessConstants k;
  k.L_minus = linalg::max_eigenvalue(mean);
  k.L_plus =
      std::sqrt(std::max(0.0, linalg::max_eigenvalue(linalg::weighted_sum(squares, w))));
  k.L_pm = std::sqrt(
      std::max(0.0, linalg::max_eigenvalue(linalg::weighted_sum(centered, w))));
  k.mu = linalg::min_eigenvalue(mean);
  return k;
}

inline SmoothnessConstants QuadraticProblem::constants() const {
  return quad_constants(*this);
}

/// Binary snapshot: magic "3PCQ", u32 version, u64 d, n, bandwidth w,
/// f64 λ, s, then per matrix its w+1 bands (band k holds d − k values),
/// then the n offsets and x⁰; all little-endian.
inline void write_snapshot(const QuadraticProblem& q, std::ostream& os) {
  auto put_u64 = [&](std::uint64_t v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof v);
  };
  auto put_f64 = [&](double v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof v);
  };
  os.write("3PCQ", 4);
  const std::uint32_t version = 1;
  os.write(reinterpret_cast<const char*>(&version), sizeof version);
  std::uint64_t w = 0;
  for (const auto& a : q.matrices) w = std::max<std::uint64_t>(w, a.bandwidth());
  put_u64(q.dim());
  put_u64(q.clients());
  put_u64(w);
  put_f64(q.lambda_reg);
  put_f64(q.noise_scale);
  for (const auto& a : q.matrices)
    for (std::size_t k = 0; k <= w; ++k)
      for (std::size_t j = 0; j + k < q.dim(); ++j)
        put_f64(k < a.band.size() ? a.band[k][j] : 0.0);
  for (const auto& b : q.offsets)
    for (double e : b) put_f64(e);
  for (double e : q.x0) put_f64(e);
  if (!os) throw std::runtime_error("snapshot: write failed");
}

inline QuadraticProblem read_snapshot(std::istream& is) {
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "3PCQ", 4) != 0)
    throw std::runtime_error("snapshot: bad magic");
  std::uint32_t version = 0;
  is.read(reinterpret_cast<char*>(&version), sizeof version);
  if (version != 1) throw std::runtime_error("snapshot: unsupported version");
  auto get_u64 = [&] {
    std::uint64_t v = 0;
    is.read(reinterpret_cast<char*>(&v), sizeof v);
    return v;
  };
  auto get_f64 = [&] {
    double v = 0;
    is.read(reinterpret_cast<char*>(&v), sizeof v);
    return v;
  };
  const std::uint64_t d = get_u64(), n = get_u64(), w = get_u64();
  if (!is || d == 0 || n == 0 || w >= d)
    throw std::runtime_error("snapshot: bad header");
  QuadraticProblem q;
  q.lambda_reg = get_f64();
  q.noise_scale = get_f64();
  for (std::uint64_t i = 0; i < n; ++i) {
    linalg::SymBand a(d, w);
    for (auto& band : a.band)
      for (auto& e : band) e = get_f64();
    q.matrices.push_back(std::move(a));
  }
  for (std::uint64_t i = 0; i < n; ++i) {
    DenseVector b(d);
    for (auto& e : b) e = get_f64();
    q.offsets.push_back(std::move(b));
  }
  q.x0 = DenseVector(d);
  for (auto& e : q.x0) e = get_f64();
  if (!is) throw std::runtime_error("snapshot: truncated");
  return q;
}

// ---------------------------------------------------------------------------
// LIBSVM datasets and nonconvex logistic regression
// ---------------------------------------------------------------------------

struct Dataset {
  std::size_t d = 0;
  std::vector<std::vector<double>> rows;  // dense, each of length d
  std::vector<double> labels;             // ±1

  std::size_t size() const { return rows.size(); }
};

/// Parses "label idx:val idx:val ..." lines with 1-based, strictly ascending
/// indices. Labels 0 and −1 map to −1, label 1 to +1.
inline Dataset parse_libsvm(std::istream& in) {
  struct Entry {
    std::size_t idx;
    double val;
  };
  std::vector<std::vector<Entry>> sparse;
  Dataset ds;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream ls(line);
    std::string tok;
    if (!(ls >> tok)) continue;
    double label;
    try {
      std::size_t used = 0;
      label = std::stod(tok, &used);
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw ParseError("bad label '" + tok + "'", lineno);
    }
    if (label == 1.0)
      ds.labels.push_back(1.0);
    else if (label == 0.0 || label == -1.0)
      ds.labels.push_back(-1.0);
    else
      throw ParseError("label '" + tok + "' is not binary", lineno);
    std::vector<Entry> row;
    std::size_t last = 0;
    while (ls >> tok) {
      const auto colon = tok.find(':');
      if (colon == std::string::npos || colon == 0 || colon + 1 == tok.size())
        throw ParseError("malformed feature '" + tok + "'", lineno);
      std::size_t idx;
      double val;
      try {
        std::size_t used = 0;
        const std::string is = tok.substr(0, colon);
        if (is.find_first_not_of("0123456789") != std::string::npos)
          throw std::invalid_argument(is);
        idx = std::stoul(is, &used);
        const std::string vs = tok.substr(colon + 1);
        val = std::stod(vs, &used);
        if (used != vs.size()) throw std::invalid_argument(vs);
      } catch (const std::exception&) {
        throw ParseError("malformed feature '" + tok + "'", lineno);
      }
      if (idx == 0) throw ParseError("feature indices are 1-based", lineno);
      if (idx <= last)
        throw ParseError("feature indices must be strictly ascending", lineno);
      if (!std::isfinite(val)) throw ParseError("non-finite feature", lineno);
      last = idx;
      row.push_back({idx, val});
    }
    ds.d = std::max(ds.d, last);
    sparse.push_back(std::move(row));
  }
  ds.rows.reserve(sparse.size());
  for (const auto& row : sparse) {
    std::vector<double> dense(ds.d, 0.0);
    for (const auto& e : row) dense[e.idx - 1] = e.val;
    ds.rows.push_back(std::move(dense));
  }
  return ds;
}

inline Dataset parse_libsvm_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return parse_libsvm(in);
}

inline void write_libsvm(const Dataset& ds, std::ostream& os) {
  char buf[64];
  for (std::size_t r = 0; r < ds.size(); ++r) {
    os << (ds.labels[r] > 0 ? "+1" : "-1");
    for (std::size_t j = 0; j < ds.d; ++j) {
      if (ds.rows[r][j] == 0.0) continue;
      std::snprintf(buf, sizeof buf, " %zu:%.17g", j + 1, ds.rows[r][j]);
      os << buf;
    }
    os << '\n';
  }
}

/// Shuffles rows with `rng` and splits the first n⌊N/n⌋ of them into n
/// contiguous shards; the remainder is dropped.
inline std::vector<Dataset> partition_even(const Dataset& ds, std::size_t n,
                                           RngStream rng) {
  if (n == 0 || ds.size() < n)
    throw ParameterError("partition_even: need at least n rows for n clients");
  std::vector<std::size_t> order(ds.size());
  for (std::size_t r = 0; r < order.size(); ++r) order[r] = r;
  for (std::size_t j = order.size(); j > 1; --j)
    std::swap(order[j - 1], order[rng.index(j)]);
  const std::size_t per = ds.size() / n;
  std::vector<Dataset> shards(n);
  for (std::size_t i = 0; i < n; ++i) {
    shards[i].d = ds.d;
    for (std::size_t r = i * per; r < (i + 1) * per; ++r) {
      shards[i].rows.push_back(ds.rows[order[r]]);
      shards[i].labels.push_back(ds.labels[order[r]]);
    }
  }
  return shards;
}

/// Deterministic linearly-separable-ish binary dataset for offline runs.
/// Each client draws features around its own center so that local gradients
/// differ; labels follow a noisy linear teacher.
inline Dataset make_synthetic_logreg(std::size_t samples, std::size_t d,
                                     std::uint64_t seed) {
  Dataset ds;
  ds.d = d;
  RngStream rng = RngStream(seed).derive("synthetic-logreg", 0);
  const DenseVector teacher = normal_vector(d, rng);
  const std::size_t groups = 10;
  std::vector<DenseVector> centers;
  for (std::size_t g = 0; g < groups; ++g) {
    DenseVector c = normal_vector(d, rng);
    for (auto& e : c) e *= 1.5;
    centers.push_back(std::move(c));
  }
  for (std::size_t r = 0; r < samples; ++r) {
    const auto& c = centers[r % groups];
    std::vector<double> row(d);
    for (std::size_t j = 0; j < d; ++j) {
      // Sparse-ish rows with a heavy first coordinate keep TopK meaningful.
      const double scale = 1.0 / (1.0 + static_cast<double>(j) * 0.25);
      row[j] = (c[j] + rng.normal()) * scale;
    }
    // Log-normal row norms, so clients differ in smoothness.
    const double norm = std::exp(rng.normal());
    for (auto& e : row) e *= norm;
    const double margin = dot(std::span<const double>(row), teacher.span());
    const double noise = 0.5 * rng.normal();
    ds.rows.push_back(std::move(row));
    ds.labels.push_back(margin + noise >= 0.0 ? 1.0 : -1.0);
  }
  return ds;
}

/// f_i(x) = (1/N_i) Σ log(1 + exp(−y aᵀx)) + λ Σ_j x_j²/(1 + x_j²).
class LogRegProblem final : public Problem {
 public:
  std::vector<Dataset> shards;
  double lambda = 0.1;

  LogRegProblem() = default;
  LogRegProblem(std::vector<Dataset> s, double lam)
      : shards(std::move(s)), lambda(lam) {
    if (shards.empty() || shards[0].size() == 0 || shards[0].d == 0)
      throw ParameterError("logreg: empty dataset");
    for (const auto& sh : shards)
      if (sh.size() != shards[0].size())
        throw ParameterError("logreg: shards must have equal size");
  }

  std::size_t dim() const override { return shards[0].d; }
  std::size_t clients() const override { return shards.size(); }
  DenseVector initial_point() const override { return DenseVector(dim()); }

  static double log1pexp(double z) {
    return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
  }
  /// σ(z) = 1/(1 + e^{−z}), evaluated without overflow.
  static double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
  }

  double gradient(std::size_t i, const DenseVector& x,
                  DenseVector& out) const override {
    const Dataset& sh = shards[i];
    const std::size_t d = dim();
    out.assign(d, 0.0);
    double loss = 0.0;
    const double inv = 1.0 / static_cast<double>(sh.size());
    for (std::size_t r = 0; r < sh.size(); ++r) {
      const double* a = sh.rows[r].data();
      double m = 0.0;
      for (std::size_t j = 0; j < d; ++j) m += a[j] * x[j];
      m *= sh.labels[r];
      loss += log1pexp(-m);
      const double coef = -sh.labels[r] * sigmoid(-m) * inv;
      for (std::size_t j = 0; j < d; ++j) out[j] += coef * a[j];
    }
    double reg = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double x2 = x[j] * x[j];
      const double den = 1.0 + x2;
      reg += x2 / den;
      out[j] += 2.0 * lambda * x[j] / (den * den);
    }
    return loss * inv + lambda * reg;
  }

  double value(const DenseVector& x) const override {
    double s = 0.0;
    DenseVector tmp;
    for (std::size_t i = 0; i < clients(); ++i) s += gradient(i, x, tmp);
    return s / static_cast<double>(clients());
  }

  SmoothnessConstants constants() const override;

  double client_smoothness(std::size_t i) const override {
    if (client_l_.empty()) compute_client_l();
    return client_l_[i];
  }

  std::string name() const override { return "logreg"; }

 private:
  void compute_client_l() const {
    client_l_.clear();
    for (const auto& sh : shards) {
      linalg::DenseSym gram(sh.d);
      for (const auto& row : sh.rows)
        for (std::size_t a = 0; a < sh.d; ++a)
          for (std::size_t b = 0; b < sh.d; ++b) gram(a, b) += row[a] * row[b];
      for (auto& e : gram.a) e /= static_cast<double>(sh.size());
      client_l_.push_back(linalg::max_eigenvalue(gram) / 4.0 + 2.0 * lambda);
    }
  }
  mutable std::vector<double> client_l_;
};

/// Per-client L_i = λ_max(Gram_i)/4 + 2λ; L− = mean L_i and L+² = mean L_i²
/// bound the global and averaged smoothness; L± is bounded by L+.
inline SmoothnessConstants logreg_constants(const LogRegProblem& p) {
  SmoothnessConstants k;
  double s1 = 0.0, s2 = 0.0;
  for (std::size_t i = 0; i < p.clients(); ++i) {
    const double l = p.client_smoothness(i);
    s1 += l;
    s2 += l * l;
  }
  const double n = static_cast<double>(p.clients());
  k.L_minus = s1 / n;
  k.L_plus = std::sqrt(s2 / n);
  k.L_pm = k.L_plus;
  return k;
}

inline SmoothnessConstants LogRegProblem::constants() const {
  return logreg_constants(*this);
}

}  // namespace threepc

#endif  // THREEPC_PROBLEMS_HPP
