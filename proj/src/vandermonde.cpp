#include "blur/vandermonde.hpp"

#include <Eigen/Dense>
#include <limits>

namespace blur {

namespace {
constexpr double kSvdCutoff = 1e-12;  // relative to the largest singular value
}

VandermondeSystem build_vandermonde(const std::vector<std::complex<double>>& lambdas, int64_t k,
                                    scan::Direction direction) {
  if (lambdas.empty()) throw DimensionError("build_vandermonde: need n >= 1 eigenvalues");
  if (k < 1) throw DimensionError("build_vandermonde: need k >= 1");
  VandermondeSystem sys;
  sys.lambdas = lambdas;
  sys.k = k;
  sys.direction = direction;
  const int64_t n = sys.n();
  sys.matrix.resize(static_cast<size_t>(n * k));
  for (int64_t j = 0; j < n; ++j) {
    // Fill ascending from the right: V[j, k-1] = 1, V[j, k-2] = λ, ...
    std::complex<double> p(1.0, 0.0);
    for (int64_t i = k - 1; i >= 0; --i) {
      sys.matrix[static_cast<size_t>(j * k + i)] = p;
      p *= lambdas[static_cast<size_t>(j)];
    }
  }

  // Fewer than k distinct eigenvalues makes the column rank deficient by
  // construction, which double-precision singular values cannot separate
  // from conditioning around 1e16; report that case as infinite exactly.
  std::vector<std::complex<double>> distinct;
  for (const auto& lam : lambdas)
    if (std::find(distinct.begin(), distinct.end(), lam) == distinct.end()) distinct.push_back(lam);
  if (static_cast<int64_t>(distinct.size()) < k) {
    sys.condition_number = std::numeric_limits<double>::infinity();
    return sys;
  }

  Eigen::MatrixXcd V(n, k);
  for (int64_t j = 0; j < n; ++j)
    for (int64_t i = 0; i < k; ++i) V(j, i) = sys.at(j, i);
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(V);
  const auto& sv = svd.singularValues();
  const double smax = sv(0);
  const double smin = sv(sv.size() - 1);
  sys.condition_number = smin > 0.0 ? smax / smin : std::numeric_limits<double>::infinity();
  return sys;
}

Reconstruction reconstruct(const VandermondeSystem& system,
                           const std::vector<std::complex<double>>& h) {
  const int64_t n = system.n();
  if (static_cast<int64_t>(h.size()) != n)
    throw DimensionError("reconstruct: hidden state width " + std::to_string(h.size()) +
                         " != " + std::to_string(n));
  Eigen::MatrixXcd V(n, system.k);
  for (int64_t j = 0; j < n; ++j)
    for (int64_t i = 0; i < system.k; ++i) V(j, i) = system.at(j, i);
  Eigen::VectorXcd rhs(n);
  for (int64_t j = 0; j < n; ++j) rhs(j) = h[static_cast<size_t>(j)];

  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(V, Eigen::ComputeThinU | Eigen::ComputeThinV);
  svd.setThreshold(kSvdCutoff);
  Eigen::VectorXcd u = svd.solve(rhs);

  Reconstruction rec;
  rec.rank = svd.rank();
  rec.rank_warning = rec.rank < std::min<int64_t>(n, system.k);
  rec.window.resize(static_cast<size_t>(system.k));
  for (int64_t i = 0; i < system.k; ++i) rec.window[static_cast<size_t>(i)] = u(i);
  return rec;
}

}  // namespace blur
