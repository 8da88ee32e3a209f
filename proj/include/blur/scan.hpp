#pragma once

#include <complex>
#include <cstdint>
#include <vector>

#include "blur/error.hpp"

namespace blur::scan {

enum class Direction { forward, backward, merged };

// One step of the affine recurrence h <- a ⊙ h + b, width n.
// Complex values live in separate real/imaginary planes.
struct ScanElement {
  std::vector<double> a_re, a_im;
  std::vector<double> b_re, b_im;

  int64_t width() const { return static_cast<int64_t>(a_re.size()); }
};

ScanElement identity_element(int64_t n);
ScanElement make_element(const std::vector<std::complex<double>>& a,
                         const std::vector<std::complex<double>>& b);

// (e1 ⊕ e2) = (e2.a ⊙ e1.a, e2.a ⊙ e1.b + e2.b); associative, identity (1, 0).
ScanElement combine(const ScanElement& e1, const ScanElement& e2);

// Hidden states for a batch of sequences: planes of shape (B, N, n) row-major.
struct HiddenSequence {
  int64_t batch = 0, length = 0, width = 0;
  std::vector<double> re, im;
  Direction direction = Direction::forward;

  std::complex<double> at(int64_t b, int64_t k, int64_t j) const {
    const int64_t i = (b * length + k) * width + j;
    return {re[static_cast<size_t>(i)], im[static_cast<size_t>(i)]};
  }
};

struct ScanOptions {
  int64_t block_size = 256;  // time blocking; tree shape depends only on (N, block_size)
};

// Raw kernels over planar storage. lambda: (n). b and h: (B, N, n). h0: (n),
// may be null for zero. `reversed` walks time from N-1 down to 0, which is
// exactly par_scan on the reversed sequence followed by reversing the output.
void seq_scan_kernel(const double* lam_re, const double* lam_im, const double* b_re,
                     const double* b_im, const double* h0_re, const double* h0_im, double* h_re,
                     double* h_im, int64_t B, int64_t N, int64_t n, bool reversed);

void par_scan_kernel(const double* lam_re, const double* lam_im, const double* b_re,
                     const double* b_im, const double* h0_re, const double* h0_im, double* h_re,
                     double* h_im, int64_t B, int64_t N, int64_t n, bool reversed,
                     const ScanOptions& opt);

// Spec-facing single-sequence operations (B = 1). h0 empty means zero.
HiddenSequence seq_scan(const std::vector<std::complex<double>>& lambda,
                        const std::vector<std::vector<std::complex<double>>>& b,
                        const std::vector<std::complex<double>>& h0 = {});

HiddenSequence par_scan(const std::vector<std::complex<double>>& lambda,
                        const std::vector<std::vector<std::complex<double>>>& b,
                        const std::vector<std::complex<double>>& h0 = {},
                        const ScanOptions& opt = {});

// values[k] = λ ⊙ values[k+1] + b[k], evaluated from k = N-1 down to 0.
HiddenSequence reverse_scan(const std::vector<std::complex<double>>& lambda,
                            const std::vector<std::vector<std::complex<double>>>& b,
                            const std::vector<std::complex<double>>& h_end = {},
                            const ScanOptions& opt = {});

}  // namespace blur::scan
