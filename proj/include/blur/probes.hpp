#pragma once

#include <string>
#include <vector>

#include "blur/lru.hpp"
#include "blur/network.hpp"
#include "blur/vandermonde.hpp"

namespace blur {

struct ProbeReport {
  std::string name;
  bool pass = false;
  double measured = 0.0;
  double tolerance = 0.0;
  std::string context;
};

// Runs the recurrence N steps under worst-case constant inputs |u| = bound
// and checks the geometric bound max|h| <= ‖gamma⊙B‖∞·U/(1-ρ).
ProbeReport probe_stability(const LruParams& params, int64_t steps, double input_bound);

// Same predicate on raw eigenvalues with B = all-ones; ρ >= 1 fails the
// sufficient condition outright (the bound does not exist).
ProbeReport probe_stability_raw(const std::vector<std::complex<double>>& lambdas, int64_t steps,
                                double input_bound);

// Expected-fail witness: raw |λ| = 1.01 (bypassing the parameterization)
// must diverge; pass means geometric growth was observed.
ProbeReport probe_divergence_witness(int64_t steps);

// Forward path bitwise invariant to future perturbations; backward path to
// past ones; the full block sensitive on both sides.
ProbeReport probe_causality_forward(int64_t length, int64_t trials, uint64_t seed);
ProbeReport probe_causality_backward(int64_t length, int64_t trials, uint64_t seed);
ProbeReport probe_causality_block(int64_t length, int64_t trials, uint64_t seed);

// par_scan vs seq_scan max relative error over a size/seed grid.
ProbeReport probe_scan_equivalence(const std::vector<int64_t>& widths,
                                   const std::vector<int64_t>& lengths, int64_t seeds,
                                   double tolerance = 1e-10);

// Empirical memorization: eigenvalues at scaled k-th roots of unity, inputs
// recovered from the boundary hidden state through the pseudoinverse.
ProbeReport probe_memorization(scan::Direction direction, int64_t max_k, uint64_t seed);

// Reconstruction error grows with the reported condition number across a
// clustering sweep (rank correlation).
ProbeReport probe_conditioning_monotonicity(uint64_t seed);

std::vector<ProbeReport> run_probe_suite(uint64_t seed);
void write_probe_csv(const std::vector<ProbeReport>& reports, const std::string& path);

}  // namespace blur
