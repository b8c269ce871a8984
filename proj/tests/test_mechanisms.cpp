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
#include <vector>

#include <gtest/gtest.h>

#include "threepc/mechanisms.hpp"
#include "threepc/theory.hpp"

namespace {

using namespace threepc;

StepContext ctx_for(std::uint64_t seed, bool coin = true, std::size_t worker = 0,
                    std::size_t n = 1) {
  StepContext c;
  c.rng = RngStream(seed).derive("worker", worker);
  c.shared = RngStream(seed).derive("shared", 0);
  c.worker = worker;
  c.n_workers = n;
  c.coin = coin;
  return c;
}

StepResult run_step(const MethodSpec& m, const DenseVector& h, const DenseVector& y,
                    const DenseVector& x, const StepContext& ctx) {
  return step(m, MechanismState{h, y}, x, ctx);
}

const auto kTop1 = CompressorSpec::top_k(1);
const auto kId = CompressorSpec::identity();

// ---------------------------------------------------------------------------

TEST(EF21, Examples) {
  const DenseVector h{5, -1, 2}, y{0, 0, 1}, x{3, 1, 4};
  EXPECT_EQ(run_step(MethodSpec::ef21(kId), h, y, x, ctx_for(1)).g_next, x);
  EXPECT_EQ(run_step(MethodSpec::ef21(kTop1), x, y, x, ctx_for(1)).g_next, x);
  EXPECT_EQ(run_step(MethodSpec::ef21(kTop1), DenseVector{0, 0}, DenseVector{0, 0},
                     DenseVector{3, 1}, ctx_for(1))
                .g_next,
            (DenseVector{3, 0}));
}

TEST(LAG, Examples) {
  const DenseVector v{1, 2};
  auto r = run_step(MethodSpec::lag(1.0), v, v, v, ctx_for(1));
  EXPECT_EQ(r.g_next, v);
  EXPECT_EQ(bits_for(r, 2), 1u);

  r = run_step(MethodSpec::lag(0.0), DenseVector{0, 0}, DenseVector{5, 5},
               DenseVector{1, 0}, ctx_for(1));
  EXPECT_EQ(r.g_next, (DenseVector{1, 0}));

  r = run_step(MethodSpec::lag(3.0), DenseVector{0, 0}, DenseVector{1, 0},
               DenseVector{2, 0}, ctx_for(1));
  EXPECT_EQ(r.g_next, (DenseVector{2, 0}));
  EXPECT_EQ(bits_for(r, 2), 64u);
}

TEST(LAG, SkipCostsOneBit) {
  const auto r = run_step(MethodSpec::lag(100.0), DenseVector{0, 0}, DenseVector{1, 0},
                          DenseVector{2, 0}, ctx_for(1));
  EXPECT_EQ(r.g_next, (DenseVector{0, 0}));
  EXPECT_EQ(bits_for(r, 2), 1u);
}

TEST(CLAG, Examples) {
  const auto r = run_step(MethodSpec::clag(kTop1, 1.0), DenseVector{0, 0, 0},
                          DenseVector{1, 1, 1}, DenseVector{1, 1, 1}, ctx_for(1));
  EXPECT_EQ(r.g_next, (DenseVector{1, 0, 0}));
}

TEST(CLAG, ZeroTriggerMatchesEF21) {
  RngStream rng(2);
  for (int t = 0; t < 1000; ++t) {
    const DenseVector h = normal_vector(6, rng), y = normal_vector(6, rng),
                      x = normal_vector(6, rng);
    for (const auto& c : {CompressorSpec::top_k(2), CompressorSpec::crand_k(3)}) {
      const auto a = run_step(MethodSpec::clag(c, 0.0), h, y, x, ctx_for(t));
      const auto b = run_step(MethodSpec::ef21(c), h, y, x, ctx_for(t));
      ASSERT_EQ(a.g_next, b.g_next);
    }
  }
}

TEST(CLAG, IdentityMatchesLAG) {
  RngStream rng(3);
  for (int t = 0; t < 1000; ++t) {
    const DenseVector h = normal_vector(5, rng), y = normal_vector(5, rng),
                      x = normal_vector(5, rng);
    const double zeta = rng.uniform() * 3;
    const auto a = run_step(MethodSpec::clag(kId, zeta), h, y, x, ctx_for(t));
    const auto b = run_step(MethodSpec::lag(zeta), h, y, x, ctx_for(t));
    ASSERT_EQ(a.g_next, b.g_next);
    ASSERT_EQ(bits_for(a, 5), bits_for(b, 5));
  }
}

TEST(V1, Examples) {
  const DenseVector h{9, 9};
  EXPECT_EQ(run_step(MethodSpec::v1(kTop1), h, DenseVector{3, 4}, DenseVector{3, 4}, ctx_for(1)).g_next,
            (DenseVector{3, 4}));
  EXPECT_EQ(run_step(MethodSpec::v1(kId), h, DenseVector{1, 0}, DenseVector{3, 4}, ctx_for(1)).g_next,
            (DenseVector{3, 4}));
  const auto r =
      run_step(MethodSpec::v1(kTop1), h, DenseVector{1, 0}, DenseVector{3, 4}, ctx_for(1));
  EXPECT_EQ(r.g_next, (DenseVector{1, 4}));
  // dense y (64 bits) + one value (32) + one index (1 bit at d = 2)
  EXPECT_EQ(bits_for(r, 2), 64u + 32u + 1u);
}

TEST(V2, Examples) {
  const DenseVector h{1, 2}, y{0, 1}, x{4, -1};
  // Q = Bernoulli coin 0 (zero output), C = Identity.
  EXPECT_EQ(run_step(MethodSpec::v2(CompressorSpec::bernoulli(0.5), kId), h, y, x,
                     ctx_for(1, false))
                .g_next,
            x);
  EXPECT_EQ(run_step(MethodSpec::v2(kId, kId), h, y, x, ctx_for(1)).g_next, x);
}

TEST(V2, BernoulliOuterIsMarina) {
  RngStream rng(4);
  const auto q = CompressorSpec::rand_k(2);
  for (int t = 0; t < 1000; ++t) {
    const DenseVector h = normal_vector(6, rng), y = normal_vector(6, rng),
                      x = normal_vector(6, rng);
    const bool coin = rng.bernoulli(0.3);
    const auto a = run_step(MethodSpec::v2(q, CompressorSpec::bernoulli(0.3)), h, y, x,
                            ctx_for(t, coin));
    const auto b = run_step(MethodSpec::marina(0.3, q), h, y, x, ctx_for(t, coin));
    ASSERT_EQ(a.g_next, b.g_next);
    if (coin) ASSERT_EQ(a.g_next, x);
  }
}

TEST(V3, Examples) {
  RngStream rng(5);
  const DenseVector h = normal_vector(4, rng), y = normal_vector(4, rng),
                    x = normal_vector(4, rng);
  EXPECT_EQ(run_step(MethodSpec::v3(MethodSpec::ef21(kTop1), kId), h, y, x, ctx_for(1)).g_next, x);
  for (double zeta : {0.1, 1.0, 10.0}) {
    EXPECT_EQ(run_step(MethodSpec::v3(MethodSpec::lag(zeta), kId), h, y, x, ctx_for(1)).g_next, x);
    // Outer EF21 step taken from the inner output.
    const auto b = run_step(MethodSpec::lag(zeta), h, y, x, ctx_for(1)).g_next;
    const auto a = run_step(MethodSpec::v3(MethodSpec::lag(zeta), kTop1), h, y, x, ctx_for(1));
    EXPECT_EQ(a.g_next, run_step(MethodSpec::ef21(kTop1), b, y, x, ctx_for(1)).g_next);
  }
}

TEST(V4, Examples) {
  EXPECT_EQ(run_step(MethodSpec::v4(kTop1, kTop1), DenseVector{0, 0}, DenseVector{0, 0},
                     DenseVector{3, 1}, ctx_for(1))
                .g_next,
            (DenseVector{3, 1}));
  RngStream rng(6);
  const DenseVector h = normal_vector(5, rng), y = normal_vector(5, rng),
                    x = normal_vector(5, rng);
  EXPECT_EQ(run_step(MethodSpec::v4(kId, kTop1), h, y, x, ctx_for(1)).g_next, x);
  const auto a = run_step(MethodSpec::v4(CompressorSpec::top_k(2), CompressorSpec::bernoulli(0.5)),
                          h, y, x, ctx_for(1, false));
  const auto b = run_step(MethodSpec::ef21(CompressorSpec::top_k(2)), h, y, x, ctx_for(1));
  EXPECT_EQ(a.g_next, b.g_next);
}

TEST(V5, Examples) {
  RngStream rng(7);
  const DenseVector h = normal_vector(3, rng), y = normal_vector(3, rng),
                    x = normal_vector(3, rng);
  EXPECT_EQ(run_step(MethodSpec::v5(1.0, kTop1), h, y, x, ctx_for(1, true)).g_next, x);
  EXPECT_EQ(run_step(MethodSpec::v5(0.5, kId), h, y, x, ctx_for(1, false)).g_next, h + (x - y));
  EXPECT_EQ(run_step(MethodSpec::v5(0.5, kTop1), DenseVector{1, 0}, DenseVector{1, 1},
                     DenseVector{2, 3}, ctx_for(1, false))
                .g_next,
            (DenseVector{1, 2}));
}

TEST(Marina, Examples) {
  const auto q = CompressorSpec::rand_k(1);
  const DenseVector z{0, 0}, x{2, 4};
  EXPECT_EQ(run_step(MethodSpec::marina(0.5, q), z, z, x, ctx_for(1, true)).g_next, x);
  // Enumeration oracle: outcomes (4,0) and (0,8) each with probability 1/2.
  const DenseVector o1{4, 0}, o2{0, 8};
  EXPECT_EQ(0.5 * (o1 + o2), x);
  int first = 0;
  const int draws = 4000;
  for (int t = 0; t < draws; ++t) {
    const auto g = run_step(MethodSpec::marina(0.5, q), z, z, x, ctx_for(100 + t, false)).g_next;
    ASSERT_TRUE(g == o1 || g == o2);
    first += g == o1;
  }
  EXPECT_NEAR(double(first) / draws, 0.5, 3 * std::sqrt(0.25 / draws));
}

// ---------------------------------------------------------------------------

TEST(Bits, AccountingModel) {
  EXPECT_EQ(index_bits(1024), 10u);
  EXPECT_EQ(index_bits(1000), 10u);
  EXPECT_EQ(index_bits(2), 1u);
  RngStream rng(8);
  const DenseVector x = normal_vector(1024, rng);
  const auto r = run_step(MethodSpec::ef21(CompressorSpec::top_k(10)), DenseVector(1024),
                          DenseVector(1024), x, ctx_for(1));
  EXPECT_EQ(bits_for(r, 1024), 420u);

  const DenseVector v = normal_vector(100, rng);
  const auto full = run_step(MethodSpec::ef21(kId), DenseVector(100), DenseVector(100), v, ctx_for(1));
  EXPECT_EQ(bits_for(full, 100), 3200u);

  const auto shared = run_step(MethodSpec::ef21(CompressorSpec::crand_k(10, true)),
                               DenseVector(100), DenseVector(100), v, ctx_for(1));
  EXPECT_EQ(bits_for(shared, 100), 320u);
  const auto unshared = run_step(MethodSpec::ef21(CompressorSpec::crand_k(10)),
                                 DenseVector(100), DenseVector(100), v, ctx_for(1));
  EXPECT_EQ(bits_for(unshared, 100), 320u + 70u);
}

// ---------------------------------------------------------------------------

std::vector<MethodSpec> all_methods() {
  const auto t2 = CompressorSpec::top_k(2);
  const auto c3 = CompressorSpec::crand_k(3);
  const auto r2 = CompressorSpec::rand_k(2);
  return {MethodSpec::ef21(t2),
          MethodSpec::ef21(c3),
          MethodSpec::lag(0.5),
          MethodSpec::clag(t2, 0.5),
          MethodSpec::clag(c3, 2.0),
          MethodSpec::v1(t2),
          MethodSpec::v2(r2, t2),
          MethodSpec::v2(CompressorSpec::perm_k(), c3),
          MethodSpec::v3(MethodSpec::clag(t2, 1.0), c3),
          MethodSpec::v4(t2, c3),
          MethodSpec::v5(0.4, t2),
          MethodSpec::marina(0.4, r2),
          MethodSpec::marina(0.4, CompressorSpec::perm_k()),
          MethodSpec::ef21(CompressorSpec::compose(CompressorSpec::crand_k(2), CompressorSpec::cperm_k()))};
}

TEST(Server, ReplayReproducesWorkerState) {
  RngStream rng(9);
  const std::size_t d = 6, n = 2;
  for (const auto& m : all_methods()) {
    for (int t = 0; t < 1000; ++t) {
      const DenseVector h = normal_vector(d, rng), y = normal_vector(d, rng),
                        x = normal_vector(d, rng);
      const auto r = run_step(m, h, y, x, ctx_for(t, rng.bernoulli(0.4), t % n, n));
      ASSERT_EQ(reconstruct(h, r.payloads), r.g_next) << to_string(m.method);
    }
  }
}

TEST(FixedPoint, StationaryGradientIsKept) {
  RngStream rng(10);
  for (const auto& m : all_methods()) {
    if (!is_deterministic(m)) continue;
    for (int t = 0; t < 50; ++t) {
      const DenseVector x = normal_vector(6, rng);
      ASSERT_EQ(run_step(m, x, x, x, ctx_for(t, true, 0, 2)).g_next, x) << to_string(m.method);
    }
  }
}

TEST(Validate, MechanismRequirements) {
  EXPECT_THROW(validate(MethodSpec::ef21(CompressorSpec::rand_k(2)), 4, 1), ParameterError);
  EXPECT_THROW(validate(MethodSpec::marina(0.5, CompressorSpec::top_k(2)), 4, 1), ParameterError);
  EXPECT_THROW(validate(MethodSpec::v5(0.0, CompressorSpec::top_k(2)), 4, 1), ParameterError);
  EXPECT_THROW(validate(MethodSpec::lag(-1.0), 4, 1), ParameterError);
  EXPECT_NO_THROW(validate(MethodSpec::v2(CompressorSpec::rand_k(1), CompressorSpec::top_k(1)), 4, 1));
}

TEST(Determinism, Classification) {
  EXPECT_TRUE(is_deterministic(MethodSpec::lag(1.0)));
  EXPECT_TRUE(is_deterministic(MethodSpec::ef21(kTop1)));
  EXPECT_TRUE(is_deterministic(MethodSpec::clag(kTop1, 1.0)));
  EXPECT_FALSE(is_deterministic(MethodSpec::ef21(CompressorSpec::crand_k(1))));
  EXPECT_FALSE(is_deterministic(MethodSpec::v5(0.5, kTop1)));
  EXPECT_TRUE(is_deterministic(MethodSpec::v5(1.0, kTop1)));
}

// ---------------------------------------------------------------------------

TEST(Verify, EF21TopKPasses) {
  VerifyOptions opt;
  opt.d = 10;
  opt.triples = 2000;
  const auto tp = params_ef21(alpha_of(CompressorSpec::top_k(3), 10));
  const auto rep = verify_3pc_inequality(MethodSpec::ef21(CompressorSpec::top_k(3)), tp.A, tp.B, opt);
  EXPECT_TRUE(rep.pass);
  EXPECT_TRUE(rep.deterministic);
  EXPECT_LE(rep.max_ratio, 1.0);
}

TEST(Verify, LAGIsDeterministicPass) {
  VerifyOptions opt;
  opt.d = 10;
  opt.triples = 2000;
  const auto rep = verify_3pc_inequality(MethodSpec::lag(2.0), 1.0, 2.0, opt);
  EXPECT_TRUE(rep.pass);
  EXPECT_TRUE(rep.deterministic);
  EXPECT_LE(rep.max_ratio, 1.0);
}

TEST(Verify, HalvedBFails) {
  VerifyOptions opt;
  opt.d = 2;
  opt.triples = 2000;
  opt.adversarial = true;
  const auto tp = params_ef21(0.5);
  const auto rep = verify_3pc_inequality(MethodSpec::ef21(kTop1), tp.A, tp.B / 2, opt);
  EXPECT_FALSE(rep.pass);
  EXPECT_GT(rep.max_ratio, 1.0);
}

TEST(Verify, AdversarialTripleAttainsBound) {
  VerifyOptions opt;
  opt.d = 4;
  opt.triples = 0;
  opt.adversarial = true;
  const auto tp = params_ef21(0.25);
  const auto rep = verify_3pc_inequality(MethodSpec::ef21(kTop1), tp.A, tp.B, opt);
  EXPECT_EQ(rep.triples_checked, 1u);
  EXPECT_NEAR(rep.max_ratio, 1.0, 1e-12);
}

TEST(Verify, RandomizedMethodPassesWithSlack) {
  VerifyOptions opt;
  opt.d = 10;
  opt.triples = 200;
  opt.trials = 500;
  const auto m = MethodSpec::v5(0.5, CompressorSpec::top_k(2));
  const auto tp = params_for(m, 10, 1);
  const auto rep = verify_3pc_inequality(m, tp.A, tp.B, opt);
  EXPECT_FALSE(rep.deterministic);
  EXPECT_TRUE(rep.pass) << rep.max_ratio;
}

}  // namespace
