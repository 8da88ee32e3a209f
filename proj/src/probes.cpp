#include "blur/probes.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace blur {

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

}  // namespace

ProbeReport probe_stability(const LruParams& params, int64_t steps, double input_bound) {
  const int64_t n = params.width();
  const int64_t m = params.input_dim();
  const auto lam = eigenvalues(params);
  const double rho = spectral_radius(params);

  // ‖gamma⊙B‖∞: max over channels of gamma_j · Σ_i |B_ji|.
  double b_norm = 0.0;
  for (int64_t j = 0; j < n; ++j) {
    double row = 0.0;
    for (int64_t i = 0; i < m; ++i) {
      const double re = params.b_re.value()[static_cast<size_t>(j * m + i)];
      const double im = params.b_im.value()[static_cast<size_t>(j * m + i)];
      row += std::hypot(re, im);
    }
    b_norm = std::max(b_norm, std::abs(params.gamma.value()[static_cast<size_t>(j)]) * row);
  }
  const double bound = b_norm * input_bound / (1.0 - rho);

  // Constant input u_i = U maximizes |b_j| up to phases; stream the
  // recurrence without storing the trajectory.
  std::vector<std::complex<double>> b(static_cast<size_t>(n), {0.0, 0.0});
  for (int64_t j = 0; j < n; ++j) {
    std::complex<double> acc(0.0, 0.0);
    for (int64_t i = 0; i < m; ++i)
      acc += std::complex<double>(params.b_re.value()[static_cast<size_t>(j * m + i)],
                                  params.b_im.value()[static_cast<size_t>(j * m + i)]) *
             input_bound;
    b[static_cast<size_t>(j)] = acc * params.gamma.value()[static_cast<size_t>(j)];
  }
  std::vector<std::complex<double>> h(static_cast<size_t>(n), {0.0, 0.0});
  double max_mag = 0.0;
  for (int64_t k = 0; k < steps; ++k) {
    for (int64_t j = 0; j < n; ++j) {
      h[static_cast<size_t>(j)] = lam[static_cast<size_t>(j)] * h[static_cast<size_t>(j)] + b[static_cast<size_t>(j)];
      max_mag = std::max(max_mag, std::abs(h[static_cast<size_t>(j)]));
    }
  }

  ProbeReport r;
  r.name = "stability_bound";
  r.measured = max_mag;
  r.tolerance = bound * (1.0 + 1e-9);
  r.pass = std::isfinite(max_mag) && max_mag <= r.tolerance;
  r.context = "rho=" + fmt(rho) + " steps=" + std::to_string(steps) + " bound=" + fmt(bound);
  return r;
}

ProbeReport probe_stability_raw(const std::vector<std::complex<double>>& lambdas, int64_t steps,
                                double input_bound) {
  double rho = 0.0;
  for (const auto& lam : lambdas) rho = std::max(rho, std::abs(lam));
  std::vector<std::complex<double>> h(lambdas.size(), {0.0, 0.0});
  double max_mag = 0.0;
  for (int64_t k = 0; k < steps; ++k) {
    for (size_t j = 0; j < lambdas.size(); ++j) {
      h[j] = lambdas[j] * h[j] + input_bound;
      if (std::isfinite(std::abs(h[j]))) max_mag = std::max(max_mag, std::abs(h[j]));
    }
  }
  ProbeReport r;
  r.name = "stability_bound";
  r.measured = max_mag;
  if (rho >= 1.0) {
    r.tolerance = 0.0;
    r.pass = false;
    r.context = "spectral radius " + fmt(rho) + " >= 1: sufficient condition violated, max|h|=" +
                fmt(max_mag) + " after " + std::to_string(steps) + " steps";
    return r;
  }
  const double bound = input_bound / (1.0 - rho);
  r.tolerance = bound * (1.0 + 1e-9);
  r.pass = max_mag <= r.tolerance;
  r.context = "rho=" + fmt(rho) + " steps=" + std::to_string(steps) + " bound=" + fmt(bound);
  return r;
}

ProbeReport probe_divergence_witness(int64_t steps) {
  const double lam = 1.01;
  double h = 0.0;
  for (int64_t k = 0; k < steps; ++k) h = lam * h + 1.0;
  const double floor = 0.3 * std::pow(lam, static_cast<double>(steps));
  ProbeReport r;
  r.name = "divergence_witness";
  r.measured = h;
  r.tolerance = floor;
  r.pass = h >= floor;  // pass = diverged as the growth rate predicts
  r.context = "lambda=1.01 steps=" + std::to_string(steps) + " expected >= " + fmt(floor);
  return r;
}

namespace {

struct CausalitySetup {
  LruParams params;
  Tensor input;
  int64_t n = 16, m = 4;
};

CausalitySetup causality_setup(int64_t length, uint64_t seed, LruDirection dir) {
  CausalitySetup s;
  RingInit ring{0.9, 0.99, 6.283185307179586, seed};
  s.params = init_lru(s.n, s.m, ring, dir);
  Rng rng = make_rng(seed ^ 0x5eedULL);
  s.input = Tensor::zeros({1, length, s.m});
  for (auto& v : s.input.value()) v = rng.normal(0.0, 1.0);
  return s;
}

bool hidden_equal_at(const HiddenStates& a, const HiddenStates& b, int64_t k, int64_t n) {
  const int64_t off = k * n;
  for (int64_t j = 0; j < n; ++j) {
    if (a.re.value()[static_cast<size_t>(off + j)] != b.re.value()[static_cast<size_t>(off + j)]) return false;
    if (a.im.value()[static_cast<size_t>(off + j)] != b.im.value()[static_cast<size_t>(off + j)]) return false;
  }
  return true;
}

ProbeReport causality_lru(int64_t length, int64_t trials, uint64_t seed, bool forward) {
  CausalitySetup s =
      causality_setup(length, seed, forward ? LruDirection::forward : LruDirection::backward);
  const int64_t k = length / 2;
  HiddenStates base = lru_apply(nullptr, s.params, s.input);
  Rng rng = make_rng(seed ^ 0xabcdULL);
  int64_t unchanged = 0;
  for (int64_t t = 0; t < trials; ++t) {
    // Forward hidden state at k must ignore j > k; backward must ignore j < k.
    const int64_t j = forward ? rng.integer(k + 1, length - 1) : rng.integer(0, k - 1);
    Tensor perturbed = Tensor::from(s.input.shape(), s.input.value());
    const int64_t f = rng.integer(0, s.m - 1);
    perturbed.value()[static_cast<size_t>(j * s.m + f)] += rng.normal(0.0, 1.0) + 2.0;
    HiddenStates h = lru_apply(nullptr, s.params, perturbed);
    if (hidden_equal_at(base, h, k, s.n)) ++unchanged;
  }
  ProbeReport r;
  r.name = forward ? "causality_forward" : "causality_backward";
  r.measured = static_cast<double>(unchanged);
  r.tolerance = static_cast<double>(trials);
  r.pass = unchanged == trials;
  r.context = "bitwise-invariant " + std::to_string(unchanged) + "/" + std::to_string(trials) +
              " at k=" + std::to_string(k);
  return r;
}

}  // namespace

ProbeReport probe_causality_forward(int64_t length, int64_t trials, uint64_t seed) {
  return causality_lru(length, trials, seed, true);
}

ProbeReport probe_causality_backward(int64_t length, int64_t trials, uint64_t seed) {
  return causality_lru(length, trials, seed, false);
}

ProbeReport probe_causality_block(int64_t length, int64_t trials, uint64_t seed) {
  ModelConfig cfg;
  cfg.input_dim = 4;
  cfg.embed_dim = 8;
  cfg.latent_dim = 16;
  cfg.num_blocks = 1;
  cfg.output_dim = 4;
  cfg.e_min = 0.9;  // all |λ| >= 0.5 so perturbations stay visible across the window
  cfg.e_max = 0.99;
  cfg.dropout = 0.0;
  cfg.seed = seed;
  BlurModel model = init_model(cfg);

  Rng rng = make_rng(seed ^ 0x77ULL);
  Tensor input = Tensor::zeros({1, length, cfg.input_dim});
  for (auto& v : input.value()) v = rng.normal(0.0, 1.0);
  Tensor enc = encode(nullptr, model, input);
  Tensor base = block_forward(nullptr, cfg, model.blocks[0], enc, false, nullptr, 0);

  const int64_t k = length / 2;
  const int64_t n = cfg.latent_dim;
  int64_t changed_past = 0, changed_future = 0;
  for (int64_t t = 0; t < trials; ++t) {
    for (bool future : {false, true}) {
      const int64_t j = future ? rng.integer(k + 1, length - 1) : rng.integer(0, k - 1);
      Tensor perturbed = Tensor::from(input.shape(), input.value());
      const int64_t f = rng.integer(0, cfg.input_dim - 1);
      perturbed.value()[static_cast<size_t>(j * cfg.input_dim + f)] += rng.normal(0.0, 1.0) + 2.0;
      Tensor enc2 = encode(nullptr, model, perturbed);
      Tensor out = block_forward(nullptr, cfg, model.blocks[0], enc2, false, nullptr, 0);
      bool diff = false;
      for (int64_t c = 0; c < n; ++c)
        if (out.value()[static_cast<size_t>(k * n + c)] != base.value()[static_cast<size_t>(k * n + c)]) {
          diff = true;
          break;
        }
      if (diff) ++(future ? changed_future : changed_past);
    }
  }
  ProbeReport r;
  r.name = "causality_block_bidirectional";
  const int64_t min_changed = std::min(changed_past, changed_future);
  r.measured = static_cast<double>(min_changed);
  r.tolerance = std::ceil(0.99 * static_cast<double>(trials));
  r.pass = static_cast<double>(min_changed) >= r.tolerance;
  r.context = "past " + std::to_string(changed_past) + "/" + std::to_string(trials) + ", future " +
              std::to_string(changed_future) + "/" + std::to_string(trials);
  return r;
}

ProbeReport probe_scan_equivalence(const std::vector<int64_t>& widths,
                                   const std::vector<int64_t>& lengths, int64_t seeds,
                                   double tolerance) {
  double worst = 0.0;
  std::string worst_case;
  for (int64_t n : widths) {
    for (int64_t N : lengths) {
      for (int64_t s = 0; s < seeds; ++s) {
        Rng rng = make_rng(static_cast<uint64_t>(n * 1315423911 + N * 2654435761 + s));
        std::vector<std::complex<double>> lambda(static_cast<size_t>(n));
        for (int64_t j = 0; j < n; ++j) {
          // Include exact |λ| = 1 boundary values in every third case.
          const double mag = (j % 3 == 2) ? 1.0 : rng.uniform(0.0, 1.0);
          const double th = rng.uniform(0.0, 6.283185307179586);
          lambda[static_cast<size_t>(j)] = std::polar(mag, th);
        }
        std::vector<std::vector<std::complex<double>>> b(
            static_cast<size_t>(N), std::vector<std::complex<double>>(static_cast<size_t>(n)));
        for (auto& row : b)
          for (auto& v : row) v = {rng.normal(0.0, 1.0), rng.normal(0.0, 1.0)};
        const auto ref = scan::seq_scan(lambda, b);
        const auto par = scan::par_scan(lambda, b);
        // Per-lane magnitude floor keeps the elementwise ratio meaningful
        // when a value sits many orders below the lane's scale.
        for (int64_t j = 0; j < n; ++j) {
          double lane_max = 0.0;
          for (int64_t k = 0; k < N; ++k) lane_max = std::max(lane_max, std::abs(ref.at(0, k, j)));
          const double floor = std::max(lane_max * 1e-9, 1e-300);
          for (int64_t k = 0; k < N; ++k) {
            const double err = std::abs(par.at(0, k, j) - ref.at(0, k, j)) /
                               std::max(std::abs(ref.at(0, k, j)), floor);
            if (err > worst) {
              worst = err;
              worst_case = "n=" + std::to_string(n) + " N=" + std::to_string(N) +
                           " seed=" + std::to_string(s);
            }
          }
        }
      }
    }
  }
  ProbeReport r;
  r.name = "scan_oracle_equivalence";
  r.measured = worst;
  r.tolerance = tolerance;
  r.pass = worst <= tolerance;
  r.context = worst_case.empty() ? "exact" : ("worst at " + worst_case);
  return r;
}

ProbeReport probe_memorization(scan::Direction direction, int64_t max_k, uint64_t seed) {
  Rng rng = make_rng(seed);
  double worst = 0.0;
  for (int64_t k = 1; k <= max_k; ++k) {
    const int64_t n = k;
    std::vector<std::complex<double>> lambda(static_cast<size_t>(n));
    for (int64_t j = 0; j < n; ++j)
      lambda[static_cast<size_t>(j)] =
          std::polar(0.999, 2.0 * 3.14159265358979323846 * static_cast<double>(j) / static_cast<double>(n));

    std::vector<double> window(static_cast<size_t>(k));
    for (auto& v : window) v = rng.normal(0.0, 1.0);
    double wmax = 0.0;
    for (double v : window) wmax = std::max(wmax, std::abs(v));
    if (wmax == 0.0) wmax = 1.0;

    // Conventions: d = m = 1, identity encoder, B = all-ones.
    std::vector<std::vector<std::complex<double>>> b(
        static_cast<size_t>(k), std::vector<std::complex<double>>(static_cast<size_t>(n)));
    for (int64_t t = 0; t < k; ++t)
      for (int64_t j = 0; j < n; ++j) b[static_cast<size_t>(t)][static_cast<size_t>(j)] = {window[static_cast<size_t>(t)], 0.0};

    std::vector<std::complex<double>> h(static_cast<size_t>(n));
    if (direction == scan::Direction::forward) {
      const auto hs = scan::par_scan(lambda, b);
      for (int64_t j = 0; j < n; ++j) h[static_cast<size_t>(j)] = hs.at(0, k - 1, j);
    } else {
      const auto hs = scan::reverse_scan(lambda, b);
      for (int64_t j = 0; j < n; ++j) h[static_cast<size_t>(j)] = hs.at(0, 0, j);
    }

    const auto sys = build_vandermonde(lambda, k, direction);
    const auto rec = reconstruct(sys, h);
    for (int64_t i = 0; i < k; ++i) {
      // Backward reconstruction yields the reversed window u_(k:1).
      const double truth = direction == scan::Direction::forward
                               ? window[static_cast<size_t>(i)]
                               : window[static_cast<size_t>(k - 1 - i)];
      worst = std::max(worst, std::abs(rec.window[static_cast<size_t>(i)] - truth) / wmax);
    }
  }
  ProbeReport r;
  r.name = direction == scan::Direction::forward ? "memorization_forward" : "memorization_backward";
  r.measured = worst;
  r.tolerance = 1e-8;
  r.pass = worst <= r.tolerance;
  r.context = "roots-of-unity scaled 0.999, k <= " + std::to_string(max_k);
  return r;
}

ProbeReport probe_conditioning_monotonicity(uint64_t seed) {
  Rng rng = make_rng(seed);
  const int64_t k = 8;
  std::vector<double> conds, errs;
  // At k = 8 the sweep spans five decades of conditioning while staying
  // below ~1e12, where the truncated least squares would saturate at O(1)
  // error and stop ordering by condition number.
  for (double width : {1.2, 0.9, 0.6, 0.45, 0.3, 0.2}) {
    // Real eigenvalues clustered around 0.9 with shrinking spread; the
    // error per width is a median over windows to damp draw noise.
    std::vector<std::complex<double>> lambda(static_cast<size_t>(k));
    for (int64_t j = 0; j < k; ++j)
      lambda[static_cast<size_t>(j)] = {0.9 + width * (static_cast<double>(j) / static_cast<double>(k - 1) - 0.5), 0.0};
    const auto sys = build_vandermonde(lambda, k, scan::Direction::forward);
    std::vector<double> trial_errs;
    for (int trial = 0; trial < 15; ++trial) {
      std::vector<double> window(static_cast<size_t>(k));
      for (auto& v : window) v = rng.normal(0.0, 1.0);
      std::vector<std::complex<double>> h(static_cast<size_t>(k), {0.0, 0.0});
      for (int64_t j = 0; j < k; ++j)
        for (int64_t i = 0; i < k; ++i) h[static_cast<size_t>(j)] += sys.at(j, i) * window[static_cast<size_t>(i)];
      const auto rec = reconstruct(sys, h);
      double err = 0.0;
      for (int64_t i = 0; i < k; ++i)
        err = std::max(err, std::abs(rec.window[static_cast<size_t>(i)] - window[static_cast<size_t>(i)]));
      trial_errs.push_back(err);
    }
    std::sort(trial_errs.begin(), trial_errs.end());
    conds.push_back(sys.condition_number);
    errs.push_back(std::max(trial_errs[trial_errs.size() / 2], 1e-300));
  }
  // Spearman rank correlation between condition number and error.
  auto ranks = [](const std::vector<double>& v) {
    std::vector<int64_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](int64_t a, int64_t b) { return v[static_cast<size_t>(a)] < v[static_cast<size_t>(b)]; });
    std::vector<double> r(v.size());
    for (size_t i = 0; i < idx.size(); ++i) r[static_cast<size_t>(idx[i])] = static_cast<double>(i);
    return r;
  };
  const auto rc = ranks(conds);
  const auto re = ranks(errs);
  const double n = static_cast<double>(rc.size());
  double d2 = 0.0;
  for (size_t i = 0; i < rc.size(); ++i) d2 += (rc[i] - re[i]) * (rc[i] - re[i]);
  const double rho = 1.0 - 6.0 * d2 / (n * (n * n - 1.0));

  ProbeReport r;
  r.name = "conditioning_monotonicity";
  r.measured = rho;
  r.tolerance = 0.9;
  r.pass = rho >= r.tolerance;
  std::ostringstream ctx;
  ctx << "cond range [" << fmt(conds.back()) << ", " << fmt(conds.front()) << "]";
  r.context = ctx.str();
  return r;
}

std::vector<ProbeReport> run_probe_suite(uint64_t seed) {
  std::vector<ProbeReport> reports;

  RingInit mid{0.5, 0.5, 6.283185307179586, seed + 1};
  reports.push_back(probe_stability(init_lru(32, 4, mid, LruDirection::forward), 10000, 1.0));
  RingInit near_one{0.9999, 0.9999, 6.283185307179586, seed + 2};
  reports.push_back(probe_stability(init_lru(32, 4, near_one, LruDirection::forward), 100000, 1.0));
  reports.push_back(probe_divergence_witness(2000));

  reports.push_back(probe_causality_forward(64, 100, seed + 3));
  reports.push_back(probe_causality_backward(64, 100, seed + 4));
  reports.push_back(probe_causality_block(32, 100, seed + 5));

  reports.push_back(probe_scan_equivalence({1, 8, 64, 128}, {1, 2, 1023, 4096}, 3));

  reports.push_back(probe_memorization(scan::Direction::forward, 32, seed + 6));
  reports.push_back(probe_memorization(scan::Direction::backward, 32, seed + 7));
  reports.push_back(probe_conditioning_monotonicity(seed + 8));
  return reports;
}

void write_probe_csv(const std::vector<ProbeReport>& reports, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write probe CSV: " + path);
  out << "probe,pass,measured,tolerance,context\n";
  out.precision(17);
  for (const auto& r : reports)
    out << r.name << "," << (r.pass ? 1 : 0) << "," << r.measured << "," << r.tolerance << ",\""
        << r.context << "\"\n";
}

}  // namespace blur
