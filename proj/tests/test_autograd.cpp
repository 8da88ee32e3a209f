#include <doctest.h>

#include <cmath>
#include <complex>

#include "blur/lru.hpp"
#include "blur/network.hpp"
#include "blur/tensor.hpp"
#include "gradcheck.hpp"

using namespace blur;
using blur::testing::grad_check;
using blur::testing::random_tensor;

TEST_CASE("tape rejects a loss it did not produce") {
  Tape tape;
  Tensor loose = Tensor::scalar(1.0);
  CHECK_THROWS_AS(tape.backward(loose), ContractError);
}

TEST_CASE("backward requires a scalar loss") {
  Tape tape;
  Tensor a = Tensor::from({2}, {1.0, 2.0});
  Tensor out = ops::scale(&tape, a, 2.0);
  CHECK_THROWS_AS(tape.backward(out), ContractError);
}

TEST_CASE("gradient accumulation is additive and zeroing resets it") {
  Tensor a = Tensor::from({2}, {1.0, 2.0});
  for (int round = 0; round < 2; ++round) {
    Tape tape;
    Tensor loss = ops::sum_all(&tape, ops::mul(&tape, a, a));
    tape.backward(loss);
  }
  // d/da Σ a² = 2a, accumulated twice.
  CHECK(a.grad()[0] == doctest::Approx(4.0));
  CHECK(a.grad()[1] == doctest::Approx(8.0));
  a.zero_grad();
  CHECK(a.grad()[0] == 0.0);
}

TEST_CASE("elementwise primitives pass finite-difference checks") {
  Rng rng = make_rng(5);
  Tensor a = random_tensor(rng, {3, 4});
  Tensor b = random_tensor(rng, {3, 4});

  auto check = [&](const char* name, std::function<Tensor(Tape*)> f) {
    const auto r = grad_check(f, {{"a", a}, {"b", b}});
    INFO(name << " worst at " << r.worst);
    CHECK(r.max_rel_error <= 1e-6);
  };
  check("add", [&](Tape* t) { return ops::sum_all(t, ops::mul(t, ops::add(t, a, b), b)); });
  check("sub", [&](Tape* t) { return ops::sum_all(t, ops::mul(t, ops::sub(t, a, b), a)); });
  check("mul", [&](Tape* t) { return ops::sum_all(t, ops::mul(t, a, b)); });
  check("scale", [&](Tape* t) { return ops::sum_all(t, ops::scale(t, ops::mul(t, a, b), -1.7)); });
  check("exp", [&](Tape* t) { return ops::sum_all(t, ops::exp_(t, ops::mul(t, a, b))); });
  check("sin", [&](Tape* t) { return ops::sum_all(t, ops::mul(t, ops::sin_(t, a), b)); });
  check("cos", [&](Tape* t) { return ops::sum_all(t, ops::mul(t, ops::cos_(t, a), b)); });
  check("sigmoid", [&](Tape* t) { return ops::sum_all(t, ops::mul(t, ops::sigmoid(t, a), b)); });
}

TEST_CASE("row-vector broadcast ops pass finite-difference checks") {
  Rng rng = make_rng(6);
  Tensor x = random_tensor(rng, {2, 5, 3});
  Tensor v = random_tensor(rng, {3});
  auto r1 = grad_check(
      [&](Tape* t) { return ops::sum_all(t, ops::exp_(t, ops::mul_rowvec(t, x, v))); },
      {{"x", x}, {"v", v}});
  CHECK(r1.max_rel_error <= 1e-6);
  auto r2 = grad_check(
      [&](Tape* t) { return ops::sum_all(t, ops::exp_(t, ops::add_rowvec(t, x, v))); },
      {{"x", x}, {"v", v}});
  CHECK(r2.max_rel_error <= 1e-6);
}

TEST_CASE("linear layer passes finite-difference checks") {
  Rng rng = make_rng(7);
  Tensor x = random_tensor(rng, {2, 4, 3});
  Tensor w = random_tensor(rng, {6, 3});
  Tensor v = random_tensor(rng, {2, 4, 6});
  const auto r = grad_check(
      [&](Tape* t) { return ops::sum_all(t, ops::mul(t, ops::linear(t, x, w), v)); },
      {{"x", x}, {"w", w}});
  INFO("worst at " << r.worst);
  CHECK(r.max_rel_error <= 1e-6);
}

TEST_CASE("linear layer rejects shape mismatches") {
  Tensor x = Tensor::zeros({2, 3});
  Tensor w = Tensor::zeros({4, 5});
  CHECK_THROWS_AS(ops::linear(nullptr, x, w), DimensionError);
}

TEST_CASE("mean_over_time passes finite-difference checks") {
  Rng rng = make_rng(8);
  Tensor x = random_tensor(rng, {3, 5, 2});
  Tensor v = random_tensor(rng, {3, 2});
  const auto r = grad_check(
      [&](Tape* t) { return ops::sum_all(t, ops::mul(t, ops::mean_over_time(t, x), v)); },
      {{"x", x}});
  CHECK(r.max_rel_error <= 1e-6);
}

TEST_CASE("dropout with a fixed mask passes finite-difference checks") {
  Rng rng = make_rng(9);
  Tensor x = random_tensor(rng, {4, 6});
  const auto r = grad_check(
      [&](Tape* t) {
        Rng mask_rng = make_rng(123);  // same mask on every call
        return ops::sum_all(t, ops::exp_(t, ops::dropout(t, x, 0.4, mask_rng)));
      },
      {{"x", x}});
  CHECK(r.max_rel_error <= 1e-6);
}

TEST_CASE("losses match their oracles and gradients") {
  Rng rng = make_rng(10);
  Tensor pred = random_tensor(rng, {4, 3});
  Tensor target = random_tensor(rng, {4, 3});

  SUBCASE("mse examples and oracle") {
    CHECK(ops::mse_loss(nullptr, pred, pred).item() == 0.0);
    Tensor y = Tensor::from({2}, {0.0, 0.0});
    Tensor yhat = Tensor::from({2}, {1.0, -1.0});
    CHECK(ops::mse_loss(nullptr, yhat, y).item() == doctest::Approx(1.0));
    // Naive loop oracle.
    double acc = 0;
    for (int64_t i = 0; i < pred.numel(); ++i) {
      const double d = pred.value()[static_cast<size_t>(i)] - target.value()[static_cast<size_t>(i)];
      acc += d * d;
    }
    CHECK(ops::mse_loss(nullptr, pred, target).item() ==
          doctest::Approx(acc / static_cast<double>(pred.numel())).epsilon(1e-12));
  }
  SUBCASE("mae examples and oracle") {
    CHECK(ops::mae_loss(nullptr, pred, pred).item() == 0.0);
    Tensor y = Tensor::from({2}, {0.0, 0.0});
    Tensor yhat = Tensor::from({2}, {1.0, -1.0});
    CHECK(ops::mae_loss(nullptr, yhat, y).item() == doctest::Approx(1.0));
    double acc = 0;
    for (int64_t i = 0; i < pred.numel(); ++i)
      acc += std::abs(pred.value()[static_cast<size_t>(i)] - target.value()[static_cast<size_t>(i)]);
    CHECK(ops::mae_loss(nullptr, pred, target).item() ==
          doctest::Approx(acc / static_cast<double>(pred.numel())).epsilon(1e-12));
  }
  SUBCASE("gradient of mse at y == yhat is zero") {
    Tape tape;
    Tensor same = Tensor::from({3}, {1.0, 2.0, 3.0});
    Tensor loss = ops::mse_loss(&tape, same, Tensor::from({3}, {1.0, 2.0, 3.0}));
    tape.backward(loss);
    for (double g : same.grad()) CHECK(g == 0.0);
  }
  SUBCASE("finite differences") {
    auto r = grad_check([&](Tape* t) { return ops::mse_loss(t, pred, target); }, {{"pred", pred}});
    CHECK(r.max_rel_error <= 1e-6);
    auto r2 = grad_check([&](Tape* t) { return ops::mae_loss(t, pred, target); }, {{"pred", pred}});
    CHECK(r2.max_rel_error <= 1e-6);
  }
  SUBCASE("shape mismatch raises") {
    CHECK_THROWS_AS(ops::mse_loss(nullptr, pred, Tensor::zeros({2, 2})), DimensionError);
  }
}

TEST_CASE("softmax cross-entropy gradient") {
  Rng rng = make_rng(11);
  Tensor logits = random_tensor(rng, {6, 4});
  std::vector<int> labels = {0, 3, 1, 2, 2, 0};
  const auto r = grad_check(
      [&](Tape* t) { return ops::softmax_ce_loss(t, logits, labels); }, {{"logits", logits}});
  CHECK(r.max_rel_error <= 1e-6);
}

TEST_CASE("batch and layer norm pass finite-difference checks") {
  Rng rng = make_rng(12);
  Tensor x = random_tensor(rng, {3, 4, 5});
  Tensor gamma = random_tensor(rng, {5}, 0.3);
  for (auto& v : gamma.value()) v += 1.0;
  Tensor beta = random_tensor(rng, {5}, 0.3);
  Tensor w = random_tensor(rng, {3, 4, 5});

  SUBCASE("batch norm, train mode") {
    const auto r = grad_check(
        [&](Tape* t) {
          std::vector<double> rm(5, 0.0), rv(5, 1.0);  // fresh stats per call
          return ops::sum_all(t, ops::mul(t, batch_norm(t, x, gamma, beta, rm, rv, true), w));
        },
        {{"x", x}, {"gamma", gamma}, {"beta", beta}});
    INFO("worst at " << r.worst);
    CHECK(r.max_rel_error <= 1e-5);
  }
  SUBCASE("batch norm, eval mode") {
    std::vector<double> rm = {0.1, -0.2, 0.3, 0.0, 0.05};
    std::vector<double> rv = {1.1, 0.9, 1.3, 1.0, 0.7};
    const auto r = grad_check(
        [&](Tape* t) {
          auto rm2 = rm;
          auto rv2 = rv;
          return ops::sum_all(t, ops::mul(t, batch_norm(t, x, gamma, beta, rm2, rv2, false), w));
        },
        {{"x", x}, {"gamma", gamma}, {"beta", beta}});
    CHECK(r.max_rel_error <= 1e-6);
  }
  SUBCASE("layer norm") {
    const auto r = grad_check(
        [&](Tape* t) { return ops::sum_all(t, ops::mul(t, layer_norm(t, x, gamma, beta), w)); },
        {{"x", x}, {"gamma", gamma}, {"beta", beta}});
    CHECK(r.max_rel_error <= 1e-5);
  }
}

TEST_CASE("batch norm normalizes the batch in train mode") {
  Rng rng = make_rng(13);
  Tensor x = random_tensor(rng, {16, 8, 6});
  for (auto& v : x.value()) v = 2.0 * v + 0.5;
  Tensor gamma = Tensor::full({6}, 1.0);
  Tensor beta = Tensor::zeros({6});
  std::vector<double> rm(6, 0.0), rv(6, 1.0);
  Tensor y = batch_norm(nullptr, x, gamma, beta, rm, rv, true);
  const int64_t R = 16 * 8;
  for (int64_t f = 0; f < 6; ++f) {
    double m = 0;
    for (int64_t r = 0; r < R; ++r) m += y.value()[static_cast<size_t>(r * 6 + f)];
    m /= static_cast<double>(R);
    double var = 0;
    for (int64_t r = 0; r < R; ++r) {
      const double d = y.value()[static_cast<size_t>(r * 6 + f)] - m;
      var += d * d;
    }
    var /= static_cast<double>(R);
    CHECK(std::abs(m) <= 1e-6);
    CHECK(std::abs(var - 1.0) <= 1e-4);
  }
}

TEST_CASE("scan_op gradients match finite differences, both directions") {
  Rng rng = make_rng(14);
  for (auto dir : {LruDirection::forward, LruDirection::backward}) {
    Tensor lam_re = random_tensor(rng, {3}, 0.3);
    Tensor lam_im = random_tensor(rng, {3}, 0.3);
    Tensor b_re = random_tensor(rng, {2, 6, 3});
    Tensor b_im = random_tensor(rng, {2, 6, 3});
    Tensor w_re = random_tensor(rng, {2, 6, 3});
    Tensor w_im = random_tensor(rng, {2, 6, 3});
    const auto r = grad_check(
        [&](Tape* t) {
          auto [h_re, h_im] = scan_op(t, lam_re, lam_im, b_re, b_im, dir);
          return ops::add(t, ops::sum_all(t, ops::mul(t, h_re, w_re)),
                          ops::sum_all(t, ops::mul(t, h_im, w_im)));
        },
        {{"lam_re", lam_re}, {"lam_im", lam_im}, {"b_re", b_re}, {"b_im", b_im}});
    INFO("direction " << (dir == LruDirection::forward ? "fwd" : "bwd") << " worst " << r.worst);
    CHECK(r.max_rel_error <= 1e-6);
  }
}

TEST_CASE("scan gradient w.r.t. lambda matches the hand-derived closed form") {
  // N = 3, n = 1, h0 = 0:  h1 = b1, h2 = λb1 + b2, h3 = λ²b1 + λb2 + b3.
  // With L = Σ p_k·Re(h_k) + q_k·Im(h_k) and analytic h_k(λ):
  //   dL/dλ_re = Σ p_k·Re(h_k') + q_k·Im(h_k'),  h2' = b1, h3' = 2λb1 + b2
  //   dL/dλ_im = Σ -p_k·Im(h_k') + q_k·Re(h_k')
  Rng rng = make_rng(15);
  const std::complex<double> lam{0.4, 0.3};
  const std::complex<double> b1{rng.normal(0, 1), rng.normal(0, 1)};
  const std::complex<double> b2{rng.normal(0, 1), rng.normal(0, 1)};
  const std::complex<double> b3{rng.normal(0, 1), rng.normal(0, 1)};
  const double p[3] = {rng.normal(0, 1), rng.normal(0, 1), rng.normal(0, 1)};
  const double q[3] = {rng.normal(0, 1), rng.normal(0, 1), rng.normal(0, 1)};

  Tensor lam_re = Tensor::from({1}, {lam.real()});
  Tensor lam_im = Tensor::from({1}, {lam.imag()});
  Tensor b_re = Tensor::from({1, 3, 1}, {b1.real(), b2.real(), b3.real()});
  Tensor b_im = Tensor::from({1, 3, 1}, {b1.imag(), b2.imag(), b3.imag()});
  Tensor wp = Tensor::from({1, 3, 1}, {p[0], p[1], p[2]});
  Tensor wq = Tensor::from({1, 3, 1}, {q[0], q[1], q[2]});

  Tape tape;
  auto [h_re, h_im] = scan_op(&tape, lam_re, lam_im, b_re, b_im, LruDirection::forward);
  Tensor loss = ops::add(&tape, ops::sum_all(&tape, ops::mul(&tape, h_re, wp)),
                         ops::sum_all(&tape, ops::mul(&tape, h_im, wq)));
  tape.backward(loss);

  const std::complex<double> h2p = b1;
  const std::complex<double> h3p = 2.0 * lam * b1 + b2;
  const double want_re = p[1] * h2p.real() + q[1] * h2p.imag() + p[2] * h3p.real() + q[2] * h3p.imag();
  const double want_im = -p[1] * h2p.imag() + q[1] * h2p.real() - p[2] * h3p.imag() + q[2] * h3p.real();
  CHECK(lam_re.grad()[0] == doctest::Approx(want_re).epsilon(1e-12));
  CHECK(lam_im.grad()[0] == doctest::Approx(want_im).epsilon(1e-12));
}

TEST_CASE("scan adjoint through the blocked parallel path stays consistent") {
  // Long enough to engage time blocking in both the forward scan and its
  // adjoint; compare λ and b gradients against the pure serial path.
  Rng rng = make_rng(16);
  const int64_t N = 700, n = 2;
  Tensor lam_re = random_tensor(rng, {n}, 0.4);
  Tensor lam_im = random_tensor(rng, {n}, 0.4);
  Tensor b_re = random_tensor(rng, {1, N, n});
  Tensor b_im = random_tensor(rng, {1, N, n});
  Tensor w = random_tensor(rng, {1, N, n});

  Tape tape;
  auto [h_re, h_im] = scan_op(&tape, lam_re, lam_im, b_re, b_im, LruDirection::forward);
  Tensor loss = ops::sum_all(&tape, ops::mul(&tape, h_re, w));
  tape.backward(loss);

  Tensor lam_re2 = Tensor::from({n}, lam_re.value());
  Tensor lam_im2 = Tensor::from({n}, lam_im.value());
  Tensor b_re2 = Tensor::from({1, N, n}, b_re.value());
  Tensor b_im2 = Tensor::from({1, N, n}, b_im.value());
  Tape tape2;
  scan::ScanOptions serial_opt{1 << 30};
  auto [h_re2, h_im2] =
      scan_op(&tape2, lam_re2, lam_im2, b_re2, b_im2, LruDirection::forward, serial_opt);
  Tensor loss2 = ops::sum_all(&tape2, ops::mul(&tape2, h_re2, w));
  tape2.backward(loss2);

  CHECK(std::abs(loss.item() - loss2.item()) <= 1e-10 * std::max(1.0, std::abs(loss2.item())));
  for (int64_t j = 0; j < n; ++j) {
    CHECK(lam_re.grad()[static_cast<size_t>(j)] ==
          doctest::Approx(lam_re2.grad()[static_cast<size_t>(j)]).epsilon(1e-10));
    CHECK(lam_im.grad()[static_cast<size_t>(j)] ==
          doctest::Approx(lam_im2.grad()[static_cast<size_t>(j)]).epsilon(1e-10));
  }
  double worst = 0;
  for (int64_t i = 0; i < N * n; ++i)
    worst = std::max(worst,
                     std::abs(b_re.grad()[static_cast<size_t>(i)] - b_re2.grad()[static_cast<size_t>(i)]) /
                         std::max(1.0, std::abs(b_re2.grad()[static_cast<size_t>(i)])));
  CHECK(worst <= 1e-10);
}
