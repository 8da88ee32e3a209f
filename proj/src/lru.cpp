#include "blur/lru.hpp"

#include <cmath>

#include "blur/parallel.hpp"

namespace blur {

namespace {

// exp(-exp(nu)) rounds to exactly 1.0 in double precision once nu drops
// below about -36.7; the cap keeps |λ| < 1 for every finite parameter.
constexpr double kMaxMagnitude = 0.99999999999999989;  // nextafter(1.0, 0.0)

void validate_ring(const RingInit& ring) {
  if (!(ring.e_min >= 0.0 && ring.e_min <= ring.e_max && ring.e_max <= 1.0))
    throw ConfigError("ring bounds must satisfy 0 <= e_min <= e_max <= 1, got [" +
                      std::to_string(ring.e_min) + "," + std::to_string(ring.e_max) + "]");
  if (!(ring.phase_max > 0.0 && ring.phase_max <= 6.2831853071795872))
    throw ConfigError("phase_max must lie in (0, 2*pi]");
}

}  // namespace

LruParams init_lru(int64_t n, int64_t m, const RingInit& ring, LruDirection direction) {
  if (n < 1 || m < 1) throw ConfigError("init_lru: n and m must be >= 1");
  validate_ring(ring);
  Rng rng = make_rng(ring.seed);

  LruParams p;
  p.direction = direction;
  p.nu_log = Tensor::zeros({n});
  p.theta = Tensor::zeros({n});
  p.gamma = Tensor::zeros({n});
  p.b_re = Tensor::zeros({n, m});
  p.b_im = Tensor::zeros({n, m});

  const double e2min = ring.e_min * ring.e_min;
  const double e2max = ring.e_max * ring.e_max;
  for (int64_t j = 0; j < n; ++j) {
    const double u = rng.uniform();
    // Uniform over the annulus area, clamped so |λ| stays inside (0, 1).
    double radius = std::sqrt(e2min + u * (e2max - e2min));
    radius = std::min(radius, 1.0 - 1e-6);
    radius = std::max(radius, 1e-8);
    p.nu_log.value()[static_cast<size_t>(j)] = std::log(-std::log(radius));
    p.theta.value()[static_cast<size_t>(j)] = rng.uniform(0.0, ring.phase_max);
    p.gamma.value()[static_cast<size_t>(j)] = std::sqrt(1.0 - radius * radius);
  }
  const double sd = std::sqrt(1.0 / (2.0 * static_cast<double>(m)));
  for (auto& v : p.b_re.value()) v = rng.normal(0.0, sd);
  for (auto& v : p.b_im.value()) v = rng.normal(0.0, sd);
  return p;
}

std::vector<std::complex<double>> eigenvalues(const LruParams& params) {
  const int64_t n = params.width();
  std::vector<std::complex<double>> lam(static_cast<size_t>(n));
  for (int64_t j = 0; j < n; ++j) {
    const double mag =
        std::min(std::exp(-std::exp(params.nu_log.value()[static_cast<size_t>(j)])), kMaxMagnitude);
    const double th = params.theta.value()[static_cast<size_t>(j)];
    lam[static_cast<size_t>(j)] = {mag * std::cos(th), mag * std::sin(th)};
  }
  return lam;
}

double spectral_radius(const LruParams& params) {
  double rho = 0.0;
  for (double nu : params.nu_log.value())
    rho = std::max(rho, std::min(std::exp(-std::exp(nu)), kMaxMagnitude));
  return rho;
}

std::pair<Tensor, Tensor> lambda_planes(Tape* tape, const LruParams& params) {
  Tensor mag = ops::min_const(
      tape, ops::exp_(tape, ops::neg(tape, ops::exp_(tape, params.nu_log))), kMaxMagnitude);
  Tensor re = ops::mul(tape, mag, ops::cos_(tape, params.theta));
  Tensor im = ops::mul(tape, mag, ops::sin_(tape, params.theta));
  return {re, im};
}

HiddenStates lru_apply(Tape* tape, const LruParams& params, Tensor u) {
  if (u.rank() != 3)
    throw DimensionError("lru_apply: expected (B,N,m) input, got " + shape_str(u.shape()));
  if (u.dim(2) != params.input_dim())
    throw DimensionError("lru_apply: input feature dim " + std::to_string(u.dim(2)) +
                         " != projection dim " + std::to_string(params.input_dim()));
  if (!u.all_finite()) throw NumericError("lru_apply: non-finite input sequence");

  Tensor bu_re = ops::mul_rowvec(tape, ops::linear(tape, u, params.b_re), params.gamma);
  Tensor bu_im = ops::mul_rowvec(tape, ops::linear(tape, u, params.b_im), params.gamma);
  auto [lam_re, lam_im] = lambda_planes(tape, params);
  auto [h_re, h_im] = scan_op(tape, lam_re, lam_im, bu_re, bu_im, params.direction);
  return {h_re, h_im,
          params.direction == LruDirection::forward ? scan::Direction::forward
                                                    : scan::Direction::backward};
}

std::pair<Tensor, Tensor> scan_op(Tape* tape, Tensor lam_re, Tensor lam_im, Tensor b_re,
                                  Tensor b_im, LruDirection direction,
                                  const scan::ScanOptions& opt) {
  if (b_re.rank() != 3 || !b_re.same_shape(b_im))
    throw DimensionError("scan_op: b planes must both be (B,N,n)");
  const int64_t B = b_re.dim(0), N = b_re.dim(1), n = b_re.dim(2);
  if (lam_re.rank() != 1 || lam_re.dim(0) != n || !lam_re.same_shape(lam_im))
    throw DimensionError("scan_op: lambda planes must be (n) with n = " + std::to_string(n));

  const bool reversed = direction == LruDirection::backward;
  Tensor h_re = Tensor::zeros(b_re.shape());
  Tensor h_im = Tensor::zeros(b_re.shape());
  scan::par_scan_kernel(lam_re.data(), lam_im.data(), b_re.data(), b_im.data(), nullptr, nullptr,
                        h_re.data(), h_im.data(), B, N, n, reversed, opt);

  if (tape) {
    tape->record(
        [lam_re, lam_im, b_re, b_im, h_re, h_im, B, N, n, reversed, opt]() mutable {
          const double* ghr = h_re.grad().data();
          const double* ghi = h_im.grad().data();
          // Adjoint recurrence a_k = g_k + conj(λ) ⊙ a_(next), running in the
          // opposite time direction of the forward scan.
          std::vector<double> conj_im(static_cast<size_t>(n));
          const double* lr = lam_re.data();
          const double* li = lam_im.data();
          for (int64_t j = 0; j < n; ++j) conj_im[static_cast<size_t>(j)] = -li[j];
          std::vector<double> a_re(static_cast<size_t>(B * N * n)),
              a_im(static_cast<size_t>(B * N * n));
          scan::par_scan_kernel(lr, conj_im.data(), ghr, ghi, nullptr, nullptr, a_re.data(),
                                a_im.data(), B, N, n, !reversed, opt);

          double* dbr = b_re.grad().data();
          double* dbi = b_im.grad().data();
          parallel_chunks(B * N * n, [&](int64_t s, int64_t e) {
            for (int64_t i = s; i < e; ++i) {
              dbr[i] += a_re[static_cast<size_t>(i)];
              dbi[i] += a_im[static_cast<size_t>(i)];
            }
          });

          // grad λ = Σ over batch and steps of a_k ⊙ conj(h_prev), where
          // h_prev is the forward output one step earlier in scan order
          // (zero at the sequence edge). Fixed (b, k) order per channel.
          double* dlr = lam_re.grad().data();
          double* dli = lam_im.grad().data();
          const double* hr = h_re.data();
          const double* hi = h_im.data();
          parallel_for(n, [&](int64_t j) {
            double acc_re = 0.0, acc_im = 0.0;
            for (int64_t b = 0; b < B; ++b) {
              for (int64_t k = 0; k < N; ++k) {
                const int64_t t = reversed ? N - 1 - k : k;
                const int64_t tprev = reversed ? t + 1 : t - 1;
                if (tprev < 0 || tprev >= N) continue;
                const int64_t ia = (b * N + t) * n + j;
                const int64_t ip = (b * N + tprev) * n + j;
                const double ar = a_re[static_cast<size_t>(ia)];
                const double ai = a_im[static_cast<size_t>(ia)];
                acc_re += ar * hr[ip] + ai * hi[ip];
                acc_im += ai * hr[ip] - ar * hi[ip];
              }
            }
            dlr[j] += acc_re;
            dli[j] += acc_im;
          });
        },
        h_re);
    // Both output planes carry gradients; register the second so backward()
    // can be seeded from either.
    tape->record([]() {}, h_im);
  }
  return {h_re, h_im};
}

}  // namespace blur
