#include <doctest.h>

#include <cmath>
#include <complex>
#include <cstdio>
#include <fstream>

#include "blur/probes.hpp"
#include "blur/vandermonde.hpp"

using namespace blur;
using Cplx = std::complex<double>;

TEST_CASE("vandermonde of the 4th roots of unity is perfectly conditioned") {
  const std::vector<Cplx> roots = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
  const auto sys = build_vandermonde(roots, 4, scan::Direction::forward);
  // Scaled discrete-Fourier matrix: every singular value equal, condition 1.
  CHECK(sys.condition_number == doctest::Approx(1.0).epsilon(1e-10));
  // Row structure: descending powers ending in 1.
  CHECK(sys.at(1, 3) == Cplx{1, 0});
  CHECK(std::abs(sys.at(1, 2) - Cplx{0, 1}) <= 1e-15);
  CHECK(std::abs(sys.at(1, 0) - Cplx{0, -1}) <= 1e-15);  // i^3 = -i
}

TEST_CASE("k = 1 yields a column of ones") {
  const auto sys = build_vandermonde({{0.5, 0.1}, {0.3, -0.2}}, 1, scan::Direction::forward);
  CHECK(sys.at(0, 0) == Cplx{1, 0});
  CHECK(sys.at(1, 0) == Cplx{1, 0});
}

TEST_CASE("repeated eigenvalues are rank-deficient with infinite condition") {
  const std::vector<Cplx> rep = {{0.5, 0.2}, {0.5, 0.2}, {0.9, 0.0}};
  const auto sys = build_vandermonde(rep, 3, scan::Direction::forward);
  CHECK(std::isinf(sys.condition_number));
  // Reconstruction still returns, flagged with a rank warning.
  std::vector<Cplx> h = {{1, 0}, {1, 0}, {2, 0}};
  const auto rec = reconstruct(sys, h);
  CHECK(rec.rank_warning);
  CHECK(rec.rank < 3);
}

TEST_CASE("lossless reconstruction at the roots of unity") {
  const std::vector<Cplx> roots = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
  const auto sys = build_vandermonde(roots, 4, scan::Direction::forward);
  const std::vector<Cplx> u = {{1, 0}, {2, 0}, {3, 0}, {4, 0}};
  std::vector<Cplx> h(4, {0, 0});
  for (int j = 0; j < 4; ++j)
    for (int i = 0; i < 4; ++i) h[static_cast<size_t>(j)] += sys.at(j, i) * u[static_cast<size_t>(i)];
  const auto rec = reconstruct(sys, h);
  for (int i = 0; i < 4; ++i) CHECK(std::abs(rec.window[static_cast<size_t>(i)] - u[static_cast<size_t>(i)]) <= 1e-10);
}

TEST_CASE("k = 1 reconstruction is the mean of the hidden state") {
  const std::vector<Cplx> lam = {{0.2, 0.1}, {0.5, -0.3}, {0.8, 0.0}};
  const auto sys = build_vandermonde(lam, 1, scan::Direction::forward);
  const std::vector<Cplx> h = {{3, 0}, {4, 1}, {5, -1}};
  const auto rec = reconstruct(sys, h);
  Cplx mean = (h[0] + h[1] + h[2]) / 3.0;
  CHECK(std::abs(rec.window[0] - mean) <= 1e-12);
}

TEST_CASE("reconstruct validates the hidden state width") {
  const auto sys = build_vandermonde({{0.5, 0.0}}, 1, scan::Direction::forward);
  CHECK_THROWS_AS(reconstruct(sys, {{1, 0}, {2, 0}}), DimensionError);
}

TEST_CASE("memorization probes pass forward and backward") {
  const auto fwd = probe_memorization(scan::Direction::forward, 32, 101);
  INFO(fwd.context << " measured " << fwd.measured);
  CHECK(fwd.pass);
  const auto bwd = probe_memorization(scan::Direction::backward, 32, 102);
  INFO(bwd.context << " measured " << bwd.measured);
  CHECK(bwd.pass);
}

TEST_CASE("reconstruction error grows with condition number") {
  const auto rep = probe_conditioning_monotonicity(103);
  INFO(rep.context);
  CHECK(rep.pass);
  CHECK(rep.measured >= 0.9);
}

TEST_CASE("scan equivalence probe passes on the compact grid") {
  const auto rep = probe_scan_equivalence({1, 8, 64}, {1, 2, 1023}, 3);
  INFO(rep.context << " measured " << rep.measured);
  CHECK(rep.pass);
}

TEST_CASE("causality probes") {
  CHECK(probe_causality_forward(64, 100, 7).pass);
  CHECK(probe_causality_backward(64, 100, 8).pass);
  const auto blk = probe_causality_block(32, 100, 9);
  INFO(blk.context);
  CHECK(blk.pass);
}

TEST_CASE("full probe suite passes and serializes to CSV") {
  const auto reports = run_probe_suite(2026);
  for (const auto& r : reports) {
    INFO(r.name << ": " << r.context << " measured=" << r.measured);
    CHECK(r.pass);
  }
  const std::string path = "/tmp/blur_probes.csv";
  write_probe_csv(reports, path);
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header == "probe,pass,measured,tolerance,context");
  int rows = 0;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) ++rows;
  CHECK(rows == static_cast<int>(reports.size()));
  std::remove(path.c_str());
}
