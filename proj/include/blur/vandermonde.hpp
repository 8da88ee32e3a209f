#pragma once

#include <complex>
#include <vector>

#include "blur/scan.hpp"

namespace blur {

// V[j, i] = λ_j^(k-1-i): row j holds descending powers of eigenvalue j.
// A forward system maps the window u_(1:k) to the hidden state h_k; a
// backward system maps the reversed window u_(k:1) to h_1.
struct VandermondeSystem {
  std::vector<std::complex<double>> lambdas;
  int64_t k = 0;
  scan::Direction direction = scan::Direction::forward;
  std::vector<std::complex<double>> matrix;  // (n, k) row-major
  double condition_number = 0.0;             // inf when rank-deficient

  int64_t n() const { return static_cast<int64_t>(lambdas.size()); }
  std::complex<double> at(int64_t row, int64_t col) const {
    return matrix[static_cast<size_t>(row * k + col)];
  }
};

VandermondeSystem build_vandermonde(const std::vector<std::complex<double>>& lambdas, int64_t k,
                                    scan::Direction direction);

struct Reconstruction {
  std::vector<std::complex<double>> window;  // estimated inputs, length k
  bool rank_warning = false;
  int64_t rank = 0;
};

// Least squares û = V⁺ h via SVD with relative cutoff 1e-12 (the
// Moore-Penrose inverse). For forward systems û estimates u_(1:k); for
// backward systems it estimates u_(k:1).
Reconstruction reconstruct(const VandermondeSystem& system,
                           const std::vector<std::complex<double>>& h);

}  // namespace blur
