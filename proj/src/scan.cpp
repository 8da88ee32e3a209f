#include "blur/scan.hpp"

#include <cmath>
#include <string>

#include "blur/parallel.hpp"

namespace blur::scan {

namespace {

// Channels are processed in fixed-width chunks so the work decomposition
// (and therefore every floating-point order) depends only on shapes.
constexpr int64_t kChannelChunk = 64;

int64_t ceil_div(int64_t a, int64_t b) { return (a + b - 1) / b; }

int64_t next_pow2(int64_t v) {
  int64_t p = 1;
  while (p < v) p <<= 1;
  return p;
}

inline void cmul(double ar, double ai, double br, double bi, double* or_, double* oi) {
  *or_ = ar * br - ai * bi;
  *oi = ar * bi + ai * br;
}

void check_finite(const double* p, int64_t count, const char* what) {
  for (int64_t i = 0; i < count; ++i)
    if (!std::isfinite(p[i])) throw NumericError(std::string(what) + ": non-finite input at index " +
                                                 std::to_string(i));
}

}  // namespace

ScanElement identity_element(int64_t n) {
  ScanElement e;
  e.a_re.assign(static_cast<size_t>(n), 1.0);
  e.a_im.assign(static_cast<size_t>(n), 0.0);
  e.b_re.assign(static_cast<size_t>(n), 0.0);
  e.b_im.assign(static_cast<size_t>(n), 0.0);
  return e;
}

ScanElement make_element(const std::vector<std::complex<double>>& a,
                         const std::vector<std::complex<double>>& b) {
  if (a.size() != b.size()) throw DimensionError("ScanElement: a and b widths differ");
  ScanElement e;
  const size_t n = a.size();
  e.a_re.resize(n);
  e.a_im.resize(n);
  e.b_re.resize(n);
  e.b_im.resize(n);
  for (size_t j = 0; j < n; ++j) {
    e.a_re[j] = a[j].real();
    e.a_im[j] = a[j].imag();
    e.b_re[j] = b[j].real();
    e.b_im[j] = b[j].imag();
  }
  return e;
}

ScanElement combine(const ScanElement& e1, const ScanElement& e2) {
  const int64_t n = e1.width();
  if (n != e2.width())
    throw DimensionError("combine: width mismatch " + std::to_string(n) + " vs " +
                         std::to_string(e2.width()));
  ScanElement out;
  out.a_re.resize(static_cast<size_t>(n));
  out.a_im.resize(static_cast<size_t>(n));
  out.b_re.resize(static_cast<size_t>(n));
  out.b_im.resize(static_cast<size_t>(n));
  for (int64_t j = 0; j < n; ++j) {
    // a = e2.a ⊙ e1.a
    cmul(e2.a_re[j], e2.a_im[j], e1.a_re[j], e1.a_im[j], &out.a_re[j], &out.a_im[j]);
    // b = e2.a ⊙ e1.b + e2.b
    double tr, ti;
    cmul(e2.a_re[j], e2.a_im[j], e1.b_re[j], e1.b_im[j], &tr, &ti);
    out.b_re[j] = tr + e2.b_re[j];
    out.b_im[j] = ti + e2.b_im[j];
  }
  return out;
}

void seq_scan_kernel(const double* lam_re, const double* lam_im, const double* b_re,
                     const double* b_im, const double* h0_re, const double* h0_im, double* h_re,
                     double* h_im, int64_t B, int64_t N, int64_t n, bool reversed) {
  std::vector<double> sr(static_cast<size_t>(n)), si(static_cast<size_t>(n));
  for (int64_t b = 0; b < B; ++b) {
    for (int64_t j = 0; j < n; ++j) {
      sr[j] = h0_re ? h0_re[j] : 0.0;
      si[j] = h0_im ? h0_im[j] : 0.0;
    }
    for (int64_t k = 0; k < N; ++k) {
      const int64_t t = reversed ? N - 1 - k : k;
      const int64_t off = (b * N + t) * n;
      for (int64_t j = 0; j < n; ++j) {
        const double hr = lam_re[j] * sr[j] - lam_im[j] * si[j] + b_re[off + j];
        const double hi = lam_re[j] * si[j] + lam_im[j] * sr[j] + b_im[off + j];
        sr[j] = hr;
        si[j] = hi;
        h_re[off + j] = hr;
        h_im[off + j] = hi;
      }
    }
  }
}

namespace {

// Runs the recurrence over scan positions [k0, k1) of batch b for channels
// [c0, c1), starting from the given per-channel state, writing every step.
void run_block(const double* lam_re, const double* lam_im, const double* b_re, const double* b_im,
               double* h_re, double* h_im, int64_t b, int64_t N, int64_t n, bool reversed,
               int64_t k0, int64_t k1, int64_t c0, int64_t c1, double* state_re,
               double* state_im) {
  for (int64_t k = k0; k < k1; ++k) {
    const int64_t t = reversed ? N - 1 - k : k;
    const int64_t off = (b * N + t) * n;
    for (int64_t j = c0; j < c1; ++j) {
      const double hr =
          lam_re[j] * state_re[j - c0] - lam_im[j] * state_im[j - c0] + b_re[off + j];
      const double hi =
          lam_re[j] * state_im[j - c0] + lam_im[j] * state_re[j - c0] + b_im[off + j];
      state_re[j - c0] = hr;
      state_im[j - c0] = hi;
      h_re[off + j] = hr;
      h_im[off + j] = hi;
    }
  }
}

}  // namespace

void par_scan_kernel(const double* lam_re, const double* lam_im, const double* b_re,
                     const double* b_im, const double* h0_re, const double* h0_im, double* h_re,
                     double* h_im, int64_t B, int64_t N, int64_t n, bool reversed,
                     const ScanOptions& opt) {
  const int64_t S = opt.block_size > 0 ? opt.block_size : 256;
  const int64_t M = ceil_div(N, S);
  const int64_t cchunks = ceil_div(n, kChannelChunk);

  if (M <= 1) {
    // Single block: lane parallelism only; identical arithmetic to seq_scan.
    parallel_for(B * cchunks, [&](int64_t task) {
      const int64_t b = task / cchunks;
      const int64_t c0 = (task % cchunks) * kChannelChunk;
      const int64_t c1 = std::min<int64_t>(c0 + kChannelChunk, n);
      double sr[kChannelChunk], si[kChannelChunk];
      for (int64_t j = c0; j < c1; ++j) {
        sr[j - c0] = h0_re ? h0_re[j] : 0.0;
        si[j - c0] = h0_im ? h0_im[j] : 0.0;
      }
      run_block(lam_re, lam_im, b_re, b_im, h_re, h_im, b, N, n, reversed, 0, N, c0, c1, sr, si);
    });
    return;
  }

  // Block aggregates: A_m = λ^len(m), B_m = local run from zero state.
  const int64_t last_len = N - (M - 1) * S;
  std::vector<double> powS_re(static_cast<size_t>(n)), powS_im(static_cast<size_t>(n));
  std::vector<double> powL_re(static_cast<size_t>(n)), powL_im(static_cast<size_t>(n));
  parallel_for(n, [&](int64_t j) {
    double ar = 1.0, ai = 0.0;
    for (int64_t i = 0; i < S; ++i) {
      double nr, ni;
      cmul(ar, ai, lam_re[j], lam_im[j], &nr, &ni);
      ar = nr;
      ai = ni;
      if (i + 1 == last_len) {
        powL_re[j] = ar;
        powL_im[j] = ai;
      }
    }
    powS_re[j] = ar;
    powS_im[j] = ai;
    if (last_len == S) {
      powL_re[j] = ar;
      powL_im[j] = ai;
    }
  });

  // Phase 1: per-block local runs from zero, recording final states.
  std::vector<double> agg_re(static_cast<size_t>(B * M * n)), agg_im(static_cast<size_t>(B * M * n));
  parallel_for(B * M * cchunks, [&](int64_t task) {
    const int64_t b = task / (M * cchunks);
    const int64_t rem = task % (M * cchunks);
    const int64_t m = rem / cchunks;
    const int64_t c0 = (rem % cchunks) * kChannelChunk;
    const int64_t c1 = std::min<int64_t>(c0 + kChannelChunk, n);
    const int64_t k0 = m * S;
    const int64_t k1 = std::min<int64_t>(k0 + S, N);
    double sr[kChannelChunk] = {0}, si[kChannelChunk] = {0};
    for (int64_t k = k0; k < k1; ++k) {
      const int64_t t = reversed ? N - 1 - k : k;
      const int64_t off = (b * N + t) * n;
      for (int64_t j = c0; j < c1; ++j) {
        const double hr = lam_re[j] * sr[j - c0] - lam_im[j] * si[j - c0] + b_re[off + j];
        const double hi = lam_re[j] * si[j - c0] + lam_im[j] * sr[j - c0] + b_im[off + j];
        sr[j - c0] = hr;
        si[j - c0] = hi;
      }
    }
    for (int64_t j = c0; j < c1; ++j) {
      agg_re[static_cast<size_t>((b * M + m) * n + j)] = sr[j - c0];
      agg_im[static_cast<size_t>((b * M + m) * n + j)] = si[j - c0];
    }
  });

  // Phase 2: exclusive Blelloch scan over the M aggregates per lane. The
  // tree shape depends only on (N, block_size). Carry-in state for block m
  // is C_m applied to h0.
  const int64_t P = next_pow2(M);
  std::vector<double> carry_re(static_cast<size_t>(B * M * n)),
      carry_im(static_cast<size_t>(B * M * n));
  parallel_for(B * n, [&](int64_t lane) {
    const int64_t b = lane / n;
    const int64_t j = lane % n;
    // (a, b) pairs for the tree, padded with the identity (1, 0).
    std::vector<double> ta_re(static_cast<size_t>(P), 1.0), ta_im(static_cast<size_t>(P), 0.0);
    std::vector<double> tb_re(static_cast<size_t>(P), 0.0), tb_im(static_cast<size_t>(P), 0.0);
    for (int64_t m = 0; m < M; ++m) {
      const bool last = m == M - 1;
      ta_re[m] = last ? powL_re[j] : powS_re[j];
      ta_im[m] = last ? powL_im[j] : powS_im[j];
      tb_re[m] = agg_re[static_cast<size_t>((b * M + m) * n + j)];
      tb_im[m] = agg_im[static_cast<size_t>((b * M + m) * n + j)];
    }
    auto combine_into = [&](int64_t src, int64_t dst) {
      // dst <- src-then-dst composition: (dst.a·src.a, dst.a·src.b + dst.b)
      double ar, ai, br, bi;
      cmul(ta_re[dst], ta_im[dst], ta_re[src], ta_im[src], &ar, &ai);
      cmul(ta_re[dst], ta_im[dst], tb_re[src], tb_im[src], &br, &bi);
      br += tb_re[dst];
      bi += tb_im[dst];
      ta_re[dst] = ar;
      ta_im[dst] = ai;
      tb_re[dst] = br;
      tb_im[dst] = bi;
    };
    for (int64_t d = 1; d < P; d <<= 1)
      for (int64_t i = 0; i + 2 * d <= P; i += 2 * d) combine_into(i + d - 1, i + 2 * d - 1);
    ta_re[P - 1] = 1.0;
    ta_im[P - 1] = 0.0;
    tb_re[P - 1] = 0.0;
    tb_im[P - 1] = 0.0;
    for (int64_t d = P >> 1; d >= 1; d >>= 1) {
      for (int64_t i = 0; i + 2 * d <= P; i += 2 * d) {
        const int64_t l = i + d - 1, r = i + 2 * d - 1;
        // left subtree sum moves right, parent prefix moves left; the right
        // child's prefix is (parent prefix)-then-(left sum).
        const double la_r = ta_re[l], la_i = ta_im[l], lb_r = tb_re[l], lb_i = tb_im[l];
        ta_re[l] = ta_re[r];
        ta_im[l] = ta_im[r];
        tb_re[l] = tb_re[r];
        tb_im[l] = tb_im[r];
        double ar, ai, br, bi;
        cmul(la_r, la_i, ta_re[l], ta_im[l], &ar, &ai);  // a = left.a ⊙ prefix.a
        cmul(la_r, la_i, tb_re[l], tb_im[l], &br, &bi);  // b = left.a ⊙ prefix.b + left.b
        ta_re[r] = ar;
        ta_im[r] = ai;
        tb_re[r] = br + lb_r;
        tb_im[r] = bi + lb_i;
      }
    }
    const double h0r = h0_re ? h0_re[j] : 0.0;
    const double h0i = h0_im ? h0_im[j] : 0.0;
    for (int64_t m = 0; m < M; ++m) {
      double cr, ci;
      cmul(ta_re[m], ta_im[m], h0r, h0i, &cr, &ci);
      carry_re[static_cast<size_t>((b * M + m) * n + j)] = cr + tb_re[m];
      carry_im[static_cast<size_t>((b * M + m) * n + j)] = ci + tb_im[m];
    }
  });

  // Phase 3: re-run each block from its carry, writing outputs.
  parallel_for(B * M * cchunks, [&](int64_t task) {
    const int64_t b = task / (M * cchunks);
    const int64_t rem = task % (M * cchunks);
    const int64_t m = rem / cchunks;
    const int64_t c0 = (rem % cchunks) * kChannelChunk;
    const int64_t c1 = std::min<int64_t>(c0 + kChannelChunk, n);
    const int64_t k0 = m * S;
    const int64_t k1 = std::min<int64_t>(k0 + S, N);
    double sr[kChannelChunk], si[kChannelChunk];
    for (int64_t j = c0; j < c1; ++j) {
      sr[j - c0] = carry_re[static_cast<size_t>((b * M + m) * n + j)];
      si[j - c0] = carry_im[static_cast<size_t>((b * M + m) * n + j)];
    }
    run_block(lam_re, lam_im, b_re, b_im, h_re, h_im, b, N, n, reversed, k0, k1, c0, c1, sr, si);
  });
}

namespace {

struct Planar {
  std::vector<double> lam_re, lam_im, b_re, b_im, h0_re, h0_im;
  int64_t N = 0, n = 0;
  bool has_h0 = false;
};

Planar to_planes(const std::vector<std::complex<double>>& lambda,
                 const std::vector<std::vector<std::complex<double>>>& b,
                 const std::vector<std::complex<double>>& h0, const char* op) {
  Planar p;
  p.n = static_cast<int64_t>(lambda.size());
  p.N = static_cast<int64_t>(b.size());
  if (p.n < 1) throw DimensionError(std::string(op) + ": width must be >= 1");
  if (p.N < 1) throw DimensionError(std::string(op) + ": sequence length must be >= 1");
  p.lam_re.resize(static_cast<size_t>(p.n));
  p.lam_im.resize(static_cast<size_t>(p.n));
  for (int64_t j = 0; j < p.n; ++j) {
    p.lam_re[j] = lambda[static_cast<size_t>(j)].real();
    p.lam_im[j] = lambda[static_cast<size_t>(j)].imag();
  }
  p.b_re.resize(static_cast<size_t>(p.N * p.n));
  p.b_im.resize(static_cast<size_t>(p.N * p.n));
  for (int64_t k = 0; k < p.N; ++k) {
    const auto& row = b[static_cast<size_t>(k)];
    if (static_cast<int64_t>(row.size()) != p.n)
      throw DimensionError(std::string(op) + ": b[" + std::to_string(k) + "] width " +
                           std::to_string(row.size()) + " != " + std::to_string(p.n));
    for (int64_t j = 0; j < p.n; ++j) {
      p.b_re[static_cast<size_t>(k * p.n + j)] = row[static_cast<size_t>(j)].real();
      p.b_im[static_cast<size_t>(k * p.n + j)] = row[static_cast<size_t>(j)].imag();
    }
  }
  if (!h0.empty()) {
    if (static_cast<int64_t>(h0.size()) != p.n)
      throw DimensionError(std::string(op) + ": h0 width mismatch");
    p.has_h0 = true;
    p.h0_re.resize(static_cast<size_t>(p.n));
    p.h0_im.resize(static_cast<size_t>(p.n));
    for (int64_t j = 0; j < p.n; ++j) {
      p.h0_re[j] = h0[static_cast<size_t>(j)].real();
      p.h0_im[j] = h0[static_cast<size_t>(j)].imag();
    }
  }
  check_finite(p.lam_re.data(), p.n, op);
  check_finite(p.lam_im.data(), p.n, op);
  check_finite(p.b_re.data(), p.N * p.n, op);
  check_finite(p.b_im.data(), p.N * p.n, op);
  return p;
}

HiddenSequence run(const Planar& p, bool parallel, bool reversed, const ScanOptions& opt,
                   Direction dir) {
  HiddenSequence h;
  h.batch = 1;
  h.length = p.N;
  h.width = p.n;
  h.direction = dir;
  h.re.assign(static_cast<size_t>(p.N * p.n), 0.0);
  h.im.assign(static_cast<size_t>(p.N * p.n), 0.0);
  const double* h0r = p.has_h0 ? p.h0_re.data() : nullptr;
  const double* h0i = p.has_h0 ? p.h0_im.data() : nullptr;
  if (parallel)
    par_scan_kernel(p.lam_re.data(), p.lam_im.data(), p.b_re.data(), p.b_im.data(), h0r, h0i,
                    h.re.data(), h.im.data(), 1, p.N, p.n, reversed, opt);
  else
    seq_scan_kernel(p.lam_re.data(), p.lam_im.data(), p.b_re.data(), p.b_im.data(), h0r, h0i,
                    h.re.data(), h.im.data(), 1, p.N, p.n, reversed);
  return h;
}

}  // namespace

HiddenSequence seq_scan(const std::vector<std::complex<double>>& lambda,
                        const std::vector<std::vector<std::complex<double>>>& b,
                        const std::vector<std::complex<double>>& h0) {
  return run(to_planes(lambda, b, h0, "seq_scan"), false, false, {}, Direction::forward);
}

HiddenSequence par_scan(const std::vector<std::complex<double>>& lambda,
                        const std::vector<std::vector<std::complex<double>>>& b,
                        const std::vector<std::complex<double>>& h0, const ScanOptions& opt) {
  return run(to_planes(lambda, b, h0, "par_scan"), true, false, opt, Direction::forward);
}

HiddenSequence reverse_scan(const std::vector<std::complex<double>>& lambda,
                            const std::vector<std::vector<std::complex<double>>>& b,
                            const std::vector<std::complex<double>>& h_end,
                            const ScanOptions& opt) {
  return run(to_planes(lambda, b, h_end, "reverse_scan"), true, true, opt, Direction::backward);
}

}  // namespace blur::scan
