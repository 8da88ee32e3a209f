#pragma once

#include <complex>
#include <utility>

#include "blur/scan.hpp"
#include "blur/tensor.hpp"

namespace blur {

enum class LruDirection { forward, backward };

// Annulus e_min <= |λ| <= e_max, phases uniform on [0, phase_max).
struct RingInit {
  double e_min = 0.0;
  double e_max = 1.0;
  double phase_max = 6.283185307179586476925286766559;
  uint64_t seed = 0;
};

// Eigenvalues are λ_j = exp(-exp(nu_log_j)) · exp(i·theta_j), so |λ| < 1 for
// every finite parameter value. B is the complex input projection stored as
// two real planes; gamma is the per-channel input normalization.
struct LruParams {
  Tensor nu_log;  // (n)
  Tensor theta;   // (n)
  Tensor gamma;   // (n)
  Tensor b_re;    // (n, m)
  Tensor b_im;    // (n, m)
  LruDirection direction = LruDirection::forward;
  bool gamma_learnable = false;

  int64_t width() const { return nu_log.dim(0); }
  int64_t input_dim() const { return b_re.dim(1); }
};

// Tape-tracked hidden states, planes of shape (B, N, n).
struct HiddenStates {
  Tensor re, im;
  scan::Direction direction = scan::Direction::forward;
};

LruParams init_lru(int64_t n, int64_t m, const RingInit& ring, LruDirection direction);

std::vector<std::complex<double>> eigenvalues(const LruParams& params);
double spectral_radius(const LruParams& params);

// λ planes derived from (nu_log, theta) on the tape.
std::pair<Tensor, Tensor> lambda_planes(Tape* tape, const LruParams& params);

// b_k = gamma ⊙ (B u_k), then the diagonal recurrence in the parameter's
// direction via the parallel scan. u: (B, N, m) real.
HiddenStates lru_apply(Tape* tape, const LruParams& params, Tensor u);

// Taped scan primitive. The adjoint of h_k = λ⊙h_{k-1} + b_k is itself a
// linear recurrence in the opposite direction with coefficient conj(λ), so
// the backward pass also runs as a parallel scan.
std::pair<Tensor, Tensor> scan_op(Tape* tape, Tensor lam_re, Tensor lam_im, Tensor b_re,
                                  Tensor b_im, LruDirection direction,
                                  const scan::ScanOptions& opt = {});

}  // namespace blur
