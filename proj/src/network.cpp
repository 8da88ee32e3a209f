#include "blur/network.hpp"

#include <cmath>

#include "blur/parallel.hpp"

namespace blur {

namespace {

Tensor init_matrix(Rng& rng, int64_t rows, int64_t cols, double sd) {
  Tensor t = Tensor::zeros({rows, cols});
  for (auto& v : t.value()) v = rng.normal(0.0, sd);
  return t;
}

Tensor identity_padded(int64_t rows, int64_t cols) {
  Tensor t = Tensor::zeros({rows, cols});
  for (int64_t i = 0; i < std::min(rows, cols); ++i)
    t.value()[static_cast<size_t>(i * cols + i)] = 1.0;
  return t;
}

BlurBlockParams init_block(const ModelConfig& cfg, int64_t in_dim, Rng rng) {
  const int64_t n = cfg.latent_dim;
  BlurBlockParams b;
  b.in_dim = in_dim;
  b.dropout_rate = cfg.dropout;
  b.bidirectional = cfg.bidirectional;

  RingInit ring{cfg.e_min, cfg.e_max, cfg.phase_max, 0};
  ring.seed = rng.fork(1).engine()();
  b.fwd = init_lru(n, in_dim, ring, LruDirection::forward);
  b.fwd.gamma_learnable = cfg.gamma_learnable;
  ring.seed = rng.fork(2).engine()();
  b.bwd = init_lru(n, in_dim, ring, LruDirection::backward);
  b.bwd.gamma_learnable = cfg.gamma_learnable;

  Rng mrng = rng.fork(3);
  const double merge_sd = std::sqrt(1.0 / (2.0 * static_cast<double>(n)));
  b.merge_f_re = init_matrix(mrng, n, n, merge_sd);
  b.merge_f_im = init_matrix(mrng, n, n, merge_sd);
  b.merge_b_re = init_matrix(mrng, n, n, merge_sd);
  b.merge_b_im = init_matrix(mrng, n, n, merge_sd);
  b.merge_bias_re = Tensor::zeros({n});
  b.merge_bias_im = Tensor::zeros({n});

  Rng grng = rng.fork(4);
  if (cfg.nonlinearity == Nonlinearity::glu) {
    const double sd = std::sqrt(1.0 / static_cast<double>(n));
    b.g1_w = init_matrix(grng, n, n, sd);
    b.g1_b = Tensor::zeros({n});
    b.g2_w = init_matrix(grng, n, n, sd);
    b.g2_b = Tensor::zeros({n});
  } else {
    const int64_t D = cfg.mlp_width();
    b.g1_w = init_matrix(grng, D, n, std::sqrt(1.0 / static_cast<double>(n)));
    b.g1_b = Tensor::zeros({D});
    b.g2_w = init_matrix(grng, n, D, std::sqrt(1.0 / static_cast<double>(D)));
    b.g2_b = Tensor::zeros({n});
  }

  b.skip_c = identity_padded(n, in_dim);
  b.norm_gamma = Tensor::full({n}, 1.0);
  b.norm_beta = Tensor::zeros({n});
  b.run_mean.assign(static_cast<size_t>(n), 0.0);
  b.run_var.assign(static_cast<size_t>(n), 1.0);
  return b;
}

}  // namespace

BlurModel init_model(const ModelConfig& cfg) {
  if (cfg.num_blocks < 1) throw ConfigError("init_model: need at least one block");
  if (cfg.input_dim < 1 || cfg.embed_dim < 1 || cfg.latent_dim < 1 || cfg.output_dim < 1)
    throw ConfigError("init_model: dimensions must be >= 1");
  BlurModel m;
  m.config = cfg;
  Rng rng = make_rng(cfg.seed);

  Rng erng = rng.fork(100);
  m.enc_w = init_matrix(erng, cfg.embed_dim, cfg.input_dim,
                        std::sqrt(1.0 / static_cast<double>(cfg.input_dim)));
  m.enc_b = Tensor::zeros({cfg.embed_dim});

  for (int64_t i = 0; i < cfg.num_blocks; ++i) {
    const int64_t in_dim = i == 0 ? cfg.embed_dim : cfg.latent_dim;
    m.blocks.push_back(init_block(cfg, in_dim, rng.fork(200 + static_cast<uint64_t>(i))));
  }

  Rng hrng = rng.fork(300);
  m.head_w = init_matrix(hrng, cfg.output_dim, cfg.latent_dim,
                         std::sqrt(1.0 / static_cast<double>(cfg.latent_dim)));
  m.head_b = Tensor::zeros({cfg.output_dim});
  return m;
}

std::vector<NamedParam> parameters(BlurModel& model) {
  std::vector<NamedParam> out;
  auto push = [&](const std::string& name, Tensor t, bool decay, bool trainable) {
    out.push_back({name, t, decay, trainable});
  };
  push("enc.w", model.enc_w, true, true);
  push("enc.b", model.enc_b, true, true);
  for (size_t i = 0; i < model.blocks.size(); ++i) {
    auto& b = model.blocks[i];
    const std::string p = "block" + std::to_string(i) + ".";
    for (auto dir : {&b.fwd, &b.bwd}) {
      // In a unidirectional block the backward LRU and merge_b never enter
      // the forward pass; keep them out of the optimizer.
      const bool used = b.bidirectional || dir->direction == LruDirection::forward;
      const std::string dp = p + (dir->direction == LruDirection::forward ? "fwd." : "bwd.");
      push(dp + "nu_log", dir->nu_log, false, used);
      push(dp + "theta", dir->theta, false, used);
      push(dp + "gamma", dir->gamma, false, used && dir->gamma_learnable);
      push(dp + "b_re", dir->b_re, true, used);
      push(dp + "b_im", dir->b_im, true, used);
    }
    push(p + "merge_f_re", b.merge_f_re, true, true);
    push(p + "merge_f_im", b.merge_f_im, true, true);
    push(p + "merge_b_re", b.merge_b_re, true, b.bidirectional);
    push(p + "merge_b_im", b.merge_b_im, true, b.bidirectional);
    push(p + "merge_bias_re", b.merge_bias_re, true, true);
    push(p + "merge_bias_im", b.merge_bias_im, true, true);
    push(p + "g1_w", b.g1_w, true, true);
    push(p + "g1_b", b.g1_b, true, true);
    push(p + "g2_w", b.g2_w, true, true);
    push(p + "g2_b", b.g2_b, true, true);
    push(p + "skip_c", b.skip_c, true, true);
    push(p + "norm_gamma", b.norm_gamma, false, true);
    push(p + "norm_beta", b.norm_beta, false, true);
  }
  push("head.w", model.head_w, true, true);
  push("head.b", model.head_b, true, true);
  return out;
}

Tensor encode(Tape* tape, const BlurModel& model, Tensor v) {
  if (v.rank() != 3 || v.dim(2) != model.config.input_dim)
    throw DimensionError("encode: expected (B,N," + std::to_string(model.config.input_dim) +
                         "), got " + shape_str(v.shape()));
  return ops::add_rowvec(tape, ops::linear(tape, v, model.enc_w), model.enc_b);
}

HiddenStates merge(Tape* tape, const BlurBlockParams& block, const HiddenStates& hf,
                   const HiddenStates& hb) {
  if (hf.direction != scan::Direction::forward || hb.direction != scan::Direction::backward)
    throw ContractError("merge: expects a forward and a backward hidden sequence");
  if (!hf.re.same_shape(hb.re))
    throw DimensionError("merge: hidden shapes differ: " + shape_str(hf.re.shape()) + " vs " +
                         shape_str(hb.re.shape()));
  // (Wf->h)_re = Wf_re·h_re - Wf_im·h_im, and the same for the backward leg.
  Tensor re = ops::sub(tape, ops::linear(tape, hf.re, block.merge_f_re),
                       ops::linear(tape, hf.im, block.merge_f_im));
  re = ops::add(tape, re,
                ops::sub(tape, ops::linear(tape, hb.re, block.merge_b_re),
                         ops::linear(tape, hb.im, block.merge_b_im)));
  re = ops::add_rowvec(tape, re, block.merge_bias_re);
  Tensor im = ops::add(tape, ops::linear(tape, hf.re, block.merge_f_im),
                       ops::linear(tape, hf.im, block.merge_f_re));
  im = ops::add(tape, im,
                ops::add(tape, ops::linear(tape, hb.re, block.merge_b_im),
                         ops::linear(tape, hb.im, block.merge_b_re)));
  im = ops::add_rowvec(tape, im, block.merge_bias_im);
  return {re, im, scan::Direction::merged};
}

namespace {

Tensor nonlinearity(Tape* tape, const ModelConfig& cfg, BlurBlockParams& block, Tensor x,
                    bool train, Rng* rng) {
  if (cfg.nonlinearity == Nonlinearity::glu) {
    Tensor value = ops::add_rowvec(tape, ops::linear(tape, x, block.g1_w), block.g1_b);
    Tensor gate = ops::sigmoid(tape, ops::add_rowvec(tape, ops::linear(tape, x, block.g2_w), block.g2_b));
    Tensor z = ops::mul(tape, value, gate);
    if (train && block.dropout_rate > 0.0 && rng) z = ops::dropout(tape, z, block.dropout_rate, *rng);
    return z;
  }
  Tensor h = ops::sigmoid(tape, ops::add_rowvec(tape, ops::linear(tape, x, block.g1_w), block.g1_b));
  if (train && block.dropout_rate > 0.0 && rng) h = ops::dropout(tape, h, block.dropout_rate, *rng);
  return ops::add_rowvec(tape, ops::linear(tape, h, block.g2_w), block.g2_b);
}

void check_block_finite(const Tensor& t, int64_t block_index) {
  const auto& v = t.value();
  for (size_t i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i])) {
      const int64_t n = t.dim(t.rank() - 1);
      const int64_t N = t.dim(1);
      const int64_t k = (static_cast<int64_t>(i) / n) % N;
      throw NumericError("block " + std::to_string(block_index) +
                         ": non-finite value at time step " + std::to_string(k));
    }
  }
}

}  // namespace

Tensor block_forward(Tape* tape, const ModelConfig& cfg, BlurBlockParams& block, Tensor u,
                     bool train, Rng* dropout_rng, int64_t block_index) {
  HiddenStates hf = lru_apply(tape, block.fwd, u);
  Tensor x;
  if (cfg.bidirectional) {
    HiddenStates hb = lru_apply(tape, block.bwd, u);
    HiddenStates merged = merge(tape, block, hf, hb);
    x = merged.re;  // imaginary part is discarded here, exactly once
  } else {
    x = ops::sub(tape, ops::linear(tape, hf.re, block.merge_f_re),
                 ops::linear(tape, hf.im, block.merge_f_im));
    x = ops::add_rowvec(tape, x, block.merge_bias_re);
  }
  Tensor z = nonlinearity(tape, cfg, block, x, train, dropout_rng);
  Tensor y = ops::add(tape, z, ops::linear(tape, u, block.skip_c));
  Tensor out = cfg.norm == NormKind::batch
                   ? batch_norm(tape, y, block.norm_gamma, block.norm_beta, block.run_mean,
                                block.run_var, train)
                   : layer_norm(tape, y, block.norm_gamma, block.norm_beta);
  check_block_finite(out, block_index);
  return out;
}

Tensor model_forward(Tape* tape, BlurModel& model, Tensor v, bool train, Rng* dropout_rng) {
  Tensor x = encode(tape, model, v);
  for (size_t i = 0; i < model.blocks.size(); ++i)
    x = block_forward(tape, model.config, model.blocks[i], x, train, dropout_rng,
                      static_cast<int64_t>(i));
  if (model.config.task == TaskKind::classification) x = ops::mean_over_time(tape, x);
  return ops::add_rowvec(tape, ops::linear(tape, x, model.head_w), model.head_b);
}

Tensor batch_norm(Tape* tape, Tensor x, Tensor gamma, Tensor beta, std::vector<double>& run_mean,
                  std::vector<double>& run_var, bool train, double momentum, double eps) {
  if (x.rank() < 2) throw DimensionError("batch_norm: expected rank >= 2");
  const int64_t F = x.dim(x.rank() - 1);
  const int64_t R = x.numel() / F;
  if (gamma.dim(0) != F || beta.dim(0) != F ||
      static_cast<int64_t>(run_mean.size()) != F || static_cast<int64_t>(run_var.size()) != F)
    throw DimensionError("batch_norm: feature dim mismatch");

  Tensor out = Tensor::zeros(x.shape());
  const double* px = x.data();
  const double* pg = gamma.data();
  const double* pb = beta.data();
  double* po = out.data();

  if (!train) {
    std::vector<double> inv_sd(static_cast<size_t>(F));
    for (int64_t f = 0; f < F; ++f) inv_sd[static_cast<size_t>(f)] = 1.0 / std::sqrt(run_var[static_cast<size_t>(f)] + eps);
    parallel_chunks(R, [&](int64_t s, int64_t e) {
      for (int64_t r = s; r < e; ++r)
        for (int64_t f = 0; f < F; ++f)
          po[r * F + f] =
              (px[r * F + f] - run_mean[static_cast<size_t>(f)]) * inv_sd[static_cast<size_t>(f)] * pg[f] + pb[f];
    });
    if (tape) {
      auto inv = std::make_shared<std::vector<double>>(inv_sd);
      auto rm = std::make_shared<std::vector<double>>(run_mean);
      tape->record(
          [x, gamma, beta, out, inv, rm, R, F]() mutable {
            const double* g = out.grad().data();
            const double* px2 = x.data();
            const double* pg2 = gamma.data();
            double* dx = x.grad().data();
            double* dg = gamma.grad().data();
            double* db = beta.grad().data();
            parallel_chunks(R, [&](int64_t s, int64_t e) {
              for (int64_t r = s; r < e; ++r)
                for (int64_t f = 0; f < F; ++f)
                  dx[r * F + f] += g[r * F + f] * pg2[f] * (*inv)[static_cast<size_t>(f)];
            });
            parallel_for(F, [&](int64_t f) {
              double ag = 0, ab = 0;
              for (int64_t r = 0; r < R; ++r) {
                const double xhat =
                    (px2[r * F + f] - (*rm)[static_cast<size_t>(f)]) * (*inv)[static_cast<size_t>(f)];
                ag += g[r * F + f] * xhat;
                ab += g[r * F + f];
              }
              dg[f] += ag;
              db[f] += ab;
            });
          },
          out);
    }
    return out;
  }

  // Train mode: batch statistics over all leading dims, per feature.
  auto mean = std::make_shared<std::vector<double>>(static_cast<size_t>(F), 0.0);
  auto inv_sd = std::make_shared<std::vector<double>>(static_cast<size_t>(F), 0.0);
  auto xhat = std::make_shared<std::vector<double>>(static_cast<size_t>(R * F), 0.0);
  parallel_for(F, [&](int64_t f) {
    double m = 0;
    for (int64_t r = 0; r < R; ++r) m += px[r * F + f];
    m /= static_cast<double>(R);
    double var = 0;
    for (int64_t r = 0; r < R; ++r) {
      const double d = px[r * F + f] - m;
      var += d * d;
    }
    var /= static_cast<double>(R);
    (*mean)[static_cast<size_t>(f)] = m;
    (*inv_sd)[static_cast<size_t>(f)] = 1.0 / std::sqrt(var + eps);
    run_mean[static_cast<size_t>(f)] = (1.0 - momentum) * run_mean[static_cast<size_t>(f)] + momentum * m;
    // Unbiased estimate feeds the running variance used at eval time.
    const double unbiased = R > 1 ? var * static_cast<double>(R) / static_cast<double>(R - 1) : var;
    run_var[static_cast<size_t>(f)] = (1.0 - momentum) * run_var[static_cast<size_t>(f)] + momentum * unbiased;
  });
  parallel_chunks(R, [&](int64_t s, int64_t e) {
    for (int64_t r = s; r < e; ++r)
      for (int64_t f = 0; f < F; ++f) {
        const double xh = (px[r * F + f] - (*mean)[static_cast<size_t>(f)]) * (*inv_sd)[static_cast<size_t>(f)];
        (*xhat)[static_cast<size_t>(r * F + f)] = xh;
        po[r * F + f] = xh * pg[f] + pb[f];
      }
  });
  if (tape) {
    tape->record(
        [x, gamma, beta, out, xhat, inv_sd, R, F]() mutable {
          const double* g = out.grad().data();
          const double* pg2 = gamma.data();
          double* dx = x.grad().data();
          double* dg = gamma.grad().data();
          double* db = beta.grad().data();
          // dL/dx = (γ/σ) (dy - mean(dy) - x̂ mean(dy·x̂)) per feature.
          std::vector<double> mean_dy(static_cast<size_t>(F)), mean_dyx(static_cast<size_t>(F));
          parallel_for(F, [&](int64_t f) {
            double sdy = 0, sdyx = 0, ag = 0;
            for (int64_t r = 0; r < R; ++r) {
              const double dy = g[r * F + f];
              sdy += dy;
              sdyx += dy * (*xhat)[static_cast<size_t>(r * F + f)];
            }
            for (int64_t r = 0; r < R; ++r) ag += g[r * F + f] * (*xhat)[static_cast<size_t>(r * F + f)];
            mean_dy[static_cast<size_t>(f)] = sdy / static_cast<double>(R);
            mean_dyx[static_cast<size_t>(f)] = sdyx / static_cast<double>(R);
            dg[f] += ag;
            db[f] += sdy;
          });
          parallel_chunks(R, [&](int64_t s, int64_t e) {
            for (int64_t r = s; r < e; ++r)
              for (int64_t f = 0; f < F; ++f)
                dx[r * F + f] += pg2[f] * (*inv_sd)[static_cast<size_t>(f)] *
                                 (g[r * F + f] - mean_dy[static_cast<size_t>(f)] -
                                  (*xhat)[static_cast<size_t>(r * F + f)] * mean_dyx[static_cast<size_t>(f)]);
          });
        },
        out);
  }
  return out;
}

Tensor layer_norm(Tape* tape, Tensor x, Tensor gamma, Tensor beta, double eps) {
  if (x.rank() < 2) throw DimensionError("layer_norm: expected rank >= 2");
  const int64_t F = x.dim(x.rank() - 1);
  const int64_t R = x.numel() / F;
  if (gamma.dim(0) != F || beta.dim(0) != F) throw DimensionError("layer_norm: feature dim mismatch");

  Tensor out = Tensor::zeros(x.shape());
  auto xhat = std::make_shared<std::vector<double>>(static_cast<size_t>(R * F));
  auto inv_sd = std::make_shared<std::vector<double>>(static_cast<size_t>(R));
  const double* px = x.data();
  const double* pg = gamma.data();
  const double* pb = beta.data();
  double* po = out.data();
  parallel_chunks(R, [&](int64_t s, int64_t e) {
    for (int64_t r = s; r < e; ++r) {
      double m = 0;
      for (int64_t f = 0; f < F; ++f) m += px[r * F + f];
      m /= static_cast<double>(F);
      double var = 0;
      for (int64_t f = 0; f < F; ++f) {
        const double d = px[r * F + f] - m;
        var += d * d;
      }
      var /= static_cast<double>(F);
      const double inv = 1.0 / std::sqrt(var + eps);
      (*inv_sd)[static_cast<size_t>(r)] = inv;
      for (int64_t f = 0; f < F; ++f) {
        const double xh = (px[r * F + f] - m) * inv;
        (*xhat)[static_cast<size_t>(r * F + f)] = xh;
        po[r * F + f] = xh * pg[f] + pb[f];
      }
    }
  });
  if (tape) {
    tape->record(
        [x, gamma, beta, out, xhat, inv_sd, R, F]() mutable {
          const double* g = out.grad().data();
          const double* pg2 = gamma.data();
          double* dx = x.grad().data();
          double* dg = gamma.grad().data();
          double* db = beta.grad().data();
          parallel_chunks(R, [&](int64_t s, int64_t e) {
            for (int64_t r = s; r < e; ++r) {
              double mean_dy = 0, mean_dyx = 0;
              for (int64_t f = 0; f < F; ++f) {
                const double dyh = g[r * F + f] * pg2[f];
                mean_dy += dyh;
                mean_dyx += dyh * (*xhat)[static_cast<size_t>(r * F + f)];
              }
              mean_dy /= static_cast<double>(F);
              mean_dyx /= static_cast<double>(F);
              for (int64_t f = 0; f < F; ++f) {
                const double dyh = g[r * F + f] * pg2[f];
                dx[r * F + f] += (*inv_sd)[static_cast<size_t>(r)] *
                                 (dyh - mean_dy - (*xhat)[static_cast<size_t>(r * F + f)] * mean_dyx);
              }
            }
          });
          parallel_for(F, [&](int64_t f) {
            double ag = 0, ab = 0;
            for (int64_t r = 0; r < R; ++r) {
              ag += g[r * F + f] * (*xhat)[static_cast<size_t>(r * F + f)];
              ab += g[r * F + f];
            }
            dg[f] += ag;
            db[f] += ab;
          });
        },
        out);
  }
  return out;
}

}  // namespace blur
