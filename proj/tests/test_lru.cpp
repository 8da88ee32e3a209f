#include <doctest.h>

#include <cmath>
#include <complex>

#include "blur/lru.hpp"
#include "blur/probes.hpp"
#include "gradcheck.hpp"

using namespace blur;
using blur::testing::grad_check;
using blur::testing::random_tensor;

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
}

TEST_CASE("init_lru samples inside the ring") {
  SUBCASE("full ring keeps every magnitude in [0, 1)") {
    RingInit ring{0.0, 1.0, kTwoPi, 99};
    LruParams p = init_lru(128, 4, ring, LruDirection::forward);
    for (const auto& lam : eigenvalues(p)) {
      CHECK(std::abs(lam) >= 0.0);
      CHECK(std::abs(lam) < 1.0);
    }
  }
  SUBCASE("degenerate ring pins the magnitude") {
    RingInit ring{0.9, 0.9, kTwoPi, 7};
    LruParams p = init_lru(32, 4, ring, LruDirection::forward);
    for (const auto& lam : eigenvalues(p)) CHECK(std::abs(lam) == doctest::Approx(0.9).epsilon(1e-12));
    for (double g : p.gamma.value()) CHECK(g == doctest::Approx(std::sqrt(1.0 - 0.81)).epsilon(1e-12));
  }
  SUBCASE("spectral radius below one across a seed sweep") {
    for (uint64_t seed = 0; seed < 1000; ++seed) {
      RingInit ring{0.0, 1.0, kTwoPi, seed};
      LruParams p = init_lru(8, 2, ring, LruDirection::forward);
      CHECK(spectral_radius(p) < 1.0);
    }
  }
  SUBCASE("invalid rings are rejected") {
    CHECK_THROWS_AS(init_lru(4, 2, RingInit{0.5, 0.4, kTwoPi, 0}, LruDirection::forward), ConfigError);
    CHECK_THROWS_AS(init_lru(4, 2, RingInit{0.0, 1.2, kTwoPi, 0}, LruDirection::forward), ConfigError);
    CHECK_THROWS_AS(init_lru(4, 2, RingInit{0.0, 1.0, -1.0, 0}, LruDirection::forward), ConfigError);
  }
}

TEST_CASE("eigenvalues closed-form inversions") {
  LruParams p;
  p.nu_log = Tensor::from({2}, {std::log(std::log(2.0)), std::log(std::log(2.0))});
  p.theta = Tensor::from({2}, {0.0, 3.14159265358979323846});
  p.gamma = Tensor::full({2}, 1.0);
  p.b_re = Tensor::zeros({2, 1});
  p.b_im = Tensor::zeros({2, 1});
  const auto lam = eigenvalues(p);
  CHECK(lam[0].real() == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(lam[0].imag() == doctest::Approx(0.0));
  CHECK(lam[1].real() == doctest::Approx(-0.5).epsilon(1e-12));
  CHECK(spectral_radius(p) == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("init radius round-trips through the exponential parameterization") {
  for (double r : {0.1, 0.5, 0.9, 0.99}) {
    RingInit ring{r, r, kTwoPi, 3};
    LruParams p = init_lru(16, 2, ring, LruDirection::forward);
    for (const auto& lam : eigenvalues(p)) CHECK(std::abs(lam) == doctest::Approx(r).epsilon(1e-12));
  }
}

TEST_CASE("nu_log toward -inf approaches magnitude one from below") {
  LruParams p;
  p.nu_log = Tensor::from({1}, {-20.0});
  p.theta = Tensor::zeros({1});
  p.gamma = Tensor::full({1}, 1.0);
  p.b_re = Tensor::zeros({1, 1});
  p.b_im = Tensor::zeros({1, 1});
  const double rho = spectral_radius(p);
  CHECK(rho < 1.0);
  CHECK(rho > 0.999999);
}

TEST_CASE("parameterization keeps |lambda| < 1 for any finite parameter value") {
  Rng rng = make_rng(21);
  LruParams p;
  p.theta = Tensor::zeros({1});
  p.gamma = Tensor::full({1}, 1.0);
  p.b_re = Tensor::zeros({1, 1});
  p.b_im = Tensor::zeros({1, 1});
  for (int t = 0; t < 1000; ++t) {
    p.nu_log = Tensor::from({1}, {rng.uniform(-50.0, 50.0)});
    CHECK(spectral_radius(p) < 1.0);
  }
}

TEST_CASE("lru_apply with zero eigenvalues embeds the input memorylessly") {
  const int64_t n = 3, m = 3, N = 4;
  LruParams p;
  p.nu_log = Tensor::full({n}, 30.0);  // exp(-exp(30)) underflows to exactly 0
  p.theta = Tensor::zeros({n});
  p.gamma = Tensor::full({n}, 1.0);
  p.b_re = Tensor::zeros({n, m});
  for (int64_t i = 0; i < n; ++i) p.b_re.value()[static_cast<size_t>(i * m + i)] = 1.0;
  p.b_im = Tensor::zeros({n, m});
  p.direction = LruDirection::forward;

  Rng rng = make_rng(31);
  Tensor u = random_tensor(rng, {1, N, m});
  HiddenStates h = lru_apply(nullptr, p, u);
  for (int64_t k = 0; k < N; ++k)
    for (int64_t j = 0; j < n; ++j) {
      CHECK(h.re.value()[static_cast<size_t>(k * n + j)] ==
            doctest::Approx(u.value()[static_cast<size_t>(k * m + j)]).epsilon(1e-15));
      CHECK(h.im.value()[static_cast<size_t>(k * n + j)] == 0.0);
    }
}

TEST_CASE("forward states ignore the future, backward states ignore the past") {
  const int64_t N = 24;
  RingInit ring{0.5, 0.95, kTwoPi, 17};
  Rng rng = make_rng(18);
  Tensor u = random_tensor(rng, {1, N, 4});
  const int64_t k = 10;

  for (auto dir : {LruDirection::forward, LruDirection::backward}) {
    LruParams p = init_lru(8, 4, ring, dir);
    HiddenStates base = lru_apply(nullptr, p, u);
    for (int trial = 0; trial < 20; ++trial) {
      const int64_t j = dir == LruDirection::forward ? rng.integer(k + 1, N - 1) : rng.integer(0, k - 1);
      Tensor pert = Tensor::from(u.shape(), u.value());
      pert.value()[static_cast<size_t>(j * 4 + rng.integer(0, 3))] += 5.0;
      HiddenStates h = lru_apply(nullptr, p, pert);
      for (int64_t c = 0; c < 8; ++c) {
        CHECK(h.re.value()[static_cast<size_t>(k * 8 + c)] == base.re.value()[static_cast<size_t>(k * 8 + c)]);
        CHECK(h.im.value()[static_cast<size_t>(k * 8 + c)] == base.im.value()[static_cast<size_t>(k * 8 + c)]);
      }
    }
  }
}

TEST_CASE("forward/backward duality under shared parameters") {
  const int64_t N = 33, n = 6, m = 3;
  RingInit ring{0.3, 0.98, kTwoPi, 23};
  LruParams fwd = init_lru(n, m, ring, LruDirection::forward);
  LruParams bwd = fwd;
  bwd.direction = LruDirection::backward;

  Rng rng = make_rng(29);
  Tensor u = random_tensor(rng, {1, N, m});
  Tensor u_rev = Tensor::zeros({1, N, m});
  for (int64_t k = 0; k < N; ++k)
    for (int64_t f = 0; f < m; ++f)
      u_rev.value()[static_cast<size_t>(k * m + f)] = u.value()[static_cast<size_t>((N - 1 - k) * m + f)];

  HiddenStates hb = lru_apply(nullptr, bwd, u);
  HiddenStates hf = lru_apply(nullptr, fwd, u_rev);
  double worst = 0;
  for (int64_t k = 0; k < N; ++k)
    for (int64_t j = 0; j < n; ++j) {
      worst = std::max(worst, std::abs(hb.re.value()[static_cast<size_t>(k * n + j)] -
                                       hf.re.value()[static_cast<size_t>((N - 1 - k) * n + j)]));
      worst = std::max(worst, std::abs(hb.im.value()[static_cast<size_t>(k * n + j)] -
                                       hf.im.value()[static_cast<size_t>((N - 1 - k) * n + j)]));
    }
  CHECK(worst == 0.0);  // identical arithmetic, just reindexed
}

TEST_CASE("hidden states stay within the geometric stability bound") {
  RingInit ring{0.999, 0.999, kTwoPi, 41};
  LruParams p = init_lru(16, 4, ring, LruDirection::forward);
  const auto report = probe_stability(p, 100000, 1.0);
  INFO(report.context);
  CHECK(report.pass);
}

TEST_CASE("a raw eigenvalue above one diverges geometrically") {
  const auto report = probe_divergence_witness(2000);
  INFO(report.context);
  CHECK(report.pass);
}

TEST_CASE("lru_apply validates dimensions and finiteness") {
  RingInit ring{0.1, 0.9, kTwoPi, 2};
  LruParams p = init_lru(4, 3, ring, LruDirection::forward);
  CHECK_THROWS_AS(lru_apply(nullptr, p, Tensor::zeros({1, 5, 2})), DimensionError);
  CHECK_THROWS_AS(lru_apply(nullptr, p, Tensor::zeros({5, 2})), DimensionError);
  Tensor bad = Tensor::zeros({1, 2, 3});
  bad.value()[1] = std::nan("");
  CHECK_THROWS_AS(lru_apply(nullptr, p, bad), NumericError);
}

TEST_CASE("lru_apply end-to-end gradients pass finite differences") {
  RingInit ring{0.4, 0.9, kTwoPi, 55};
  LruParams p = init_lru(3, 2, ring, LruDirection::forward);
  p.gamma_learnable = true;
  Rng rng = make_rng(56);
  Tensor u = random_tensor(rng, {2, 5, 2});
  Tensor w_re = random_tensor(rng, {2, 5, 3});
  Tensor w_im = random_tensor(rng, {2, 5, 3});
  const auto r = grad_check(
      [&](Tape* t) {
        HiddenStates h = lru_apply(t, p, u);
        return ops::add(t, ops::sum_all(t, ops::mul(t, h.re, w_re)),
                        ops::sum_all(t, ops::mul(t, h.im, w_im)));
      },
      {{"nu_log", p.nu_log},
       {"theta", p.theta},
       {"gamma", p.gamma},
       {"b_re", p.b_re},
       {"b_im", p.b_im},
       {"u", u}});
  INFO("worst at " << r.worst);
  CHECK(r.max_rel_error <= 1e-4);
}
