#include "blur/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>

#include "blur/checkpoint.hpp"
#include "blur/parallel.hpp"

namespace blur {

void TrainConfig::validate() const {
  if (!(min_lr > 0.0 && min_lr <= base_lr)) throw ConfigError("require 0 < min_lr <= base_lr");
  if (!(lr_decay > 0.0 && lr_decay <= 1.0)) throw ConfigError("lr_decay must be in (0,1]");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
}

double step_lr(int64_t epoch, const TrainConfig& cfg) {
  if (epoch < 0) throw ConfigError("step_lr: epoch must be >= 0");
  return std::max(cfg.min_lr, cfg.base_lr * std::pow(cfg.lr_decay, static_cast<double>(epoch)));
}

namespace {

struct Batch {
  Tensor inputs;            // (B, N, feat)
  Tensor targets;           // regression
  std::vector<int> labels;  // classification / labeling
};

Batch gather_batch(const Dataset& d, const std::vector<int64_t>& order, int64_t begin,
                   int64_t end) {
  const int64_t B = end - begin;
  Batch batch;
  batch.inputs = Tensor::zeros({B, d.length, d.feat});
  double* pi = batch.inputs.data();
  const int64_t in_stride = d.length * d.feat;
  for (int64_t b = 0; b < B; ++b) {
    const int64_t src = order[static_cast<size_t>(begin + b)];
    std::copy_n(d.inputs.data() + src * in_stride, in_stride, pi + b * in_stride);
  }
  if (d.task == TaskKind::regression) {
    batch.targets = Tensor::zeros({B, d.length, d.out_dim});
    double* pt = batch.targets.data();
    const int64_t t_stride = d.length * d.out_dim;
    for (int64_t b = 0; b < B; ++b) {
      const int64_t src = order[static_cast<size_t>(begin + b)];
      std::copy_n(d.targets.data() + src * t_stride, t_stride, pt + b * t_stride);
    }
  } else if (d.per_step_labels) {
    batch.labels.resize(static_cast<size_t>(B * d.length));
    for (int64_t b = 0; b < B; ++b) {
      const int64_t src = order[static_cast<size_t>(begin + b)];
      std::copy_n(d.labels.data() + src * d.length, d.length,
                  batch.labels.data() + b * d.length);
    }
  } else {
    batch.labels.resize(static_cast<size_t>(B));
    for (int64_t b = 0; b < B; ++b)
      batch.labels[static_cast<size_t>(b)] = d.labels[static_cast<size_t>(order[static_cast<size_t>(begin + b)])];
  }
  return batch;
}

Tensor batch_loss(Tape* tape, BlurModel& model, const Batch& batch, const Dataset& d, bool train,
                  Rng* rng) {
  Tensor pred = model_forward(tape, model, batch.inputs, train, rng);
  if (d.task == TaskKind::regression) return ops::mse_loss(tape, pred, batch.targets);
  return ops::softmax_ce_loss(tape, pred, batch.labels);
}

void check_dataset(const Dataset& d, const BlurModel& model, const char* split) {
  if (d.empty()) throw ConfigError(std::string("empty ") + split + " split");
  if (d.feat != model.config.input_dim)
    throw DimensionError(std::string(split) + " split feature dim " + std::to_string(d.feat) +
                         " != model input dim " + std::to_string(model.config.input_dim));
}

}  // namespace

Metrics evaluate(BlurModel& model, const Dataset& data, int64_t batch_size) {
  Metrics metrics;
  if (data.empty()) throw ConfigError("evaluate: empty dataset");
  std::vector<int64_t> order(static_cast<size_t>(data.count));
  std::iota(order.begin(), order.end(), 0);
  double se = 0, ae = 0, ce = 0;
  int64_t n_elems = 0, n_rows = 0, n_wrong = 0;
  for (int64_t begin = 0; begin < data.count; begin += batch_size) {
    const int64_t end = std::min(begin + batch_size, data.count);
    Batch batch = gather_batch(data, order, begin, end);
    Tensor pred = model_forward(nullptr, model, batch.inputs, false, nullptr);
    if (data.task == TaskKind::regression) {
      const auto& pv = pred.value();
      const auto& tv = batch.targets.value();
      for (size_t i = 0; i < pv.size(); ++i) {
        const double diff = pv[i] - tv[i];
        se += diff * diff;
        ae += std::abs(diff);
      }
      n_elems += static_cast<int64_t>(pv.size());
    } else {
      const int64_t s = pred.dim(pred.rank() - 1);
      const int64_t rows = pred.numel() / s;
      const double* pl = pred.data();
      for (int64_t r = 0; r < rows; ++r) {
        const double* row = pl + r * s;
        double mx = row[0];
        int64_t arg = 0;
        for (int64_t c = 1; c < s; ++c)
          if (row[c] > mx) {
            mx = row[c];
            arg = c;
          }
        double sum = 0;
        for (int64_t c = 0; c < s; ++c) sum += std::exp(row[c] - mx);
        const int label = batch.labels[static_cast<size_t>(r)];
        ce += std::log(sum) + mx - row[label];
        if (arg != label) ++n_wrong;
      }
      n_rows += rows;
    }
  }
  if (data.task == TaskKind::regression) {
    metrics.mse = se / static_cast<double>(n_elems);
    metrics.mae = ae / static_cast<double>(n_elems);
  } else {
    metrics.mse = ce / static_cast<double>(n_rows);
    metrics.mae = static_cast<double>(n_wrong) / static_cast<double>(n_rows);
  }
  return metrics;
}

double accuracy(BlurModel& model, const Dataset& data, int64_t batch_size) {
  if (data.task == TaskKind::regression) throw ContractError("accuracy: regression dataset");
  return 1.0 - evaluate(model, data, batch_size).mae;
}

void AdamW::step(std::vector<NamedParam>& params, double lr, double weight_decay) {
  if (m_.empty()) {
    m_.resize(params.size());
    v_.resize(params.size());
    for (size_t i = 0; i < params.size(); ++i) {
      m_[i].assign(params[i].tensor.value().size(), 0.0);
      v_[i].assign(params[i].tensor.value().size(), 0.0);
    }
  }
  if (m_.size() != params.size()) throw ContractError("AdamW: parameter set changed between steps");
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    if (!p.trainable) continue;
    auto& value = p.tensor.value();
    auto& grad = p.tensor.grad();
    auto& m = m_[i];
    auto& v = v_[i];
    const double wd = p.weight_decay ? weight_decay : 0.0;
    const int64_t n = static_cast<int64_t>(value.size());
    bool bad = false;
    parallel_chunks(n, [&](int64_t s, int64_t e) {
      for (int64_t j = s; j < e; ++j) {
        const double g = grad[static_cast<size_t>(j)];
        m[static_cast<size_t>(j)] = beta1_ * m[static_cast<size_t>(j)] + (1.0 - beta1_) * g;
        v[static_cast<size_t>(j)] = beta2_ * v[static_cast<size_t>(j)] + (1.0 - beta2_) * g * g;
        const double mhat = m[static_cast<size_t>(j)] / bc1;
        const double vhat = v[static_cast<size_t>(j)] / bc2;
        double next = value[static_cast<size_t>(j)];
        next -= lr * wd * next;  // decoupled decay
        next -= lr * mhat / (std::sqrt(vhat) + eps_);
        if (!std::isfinite(next)) bad = true;
        value[static_cast<size_t>(j)] = next;
      }
    });
    if (bad) throw NumericError("optimizer_step: non-finite update for parameter " + p.name);
  }
}

TrainReport train(BlurModel& model, const SplitDataset& splits, const TrainConfig& cfg,
                  const std::string& checkpoint_path, const std::string& metrics_csv) {
  cfg.validate();
  check_dataset(splits.train, model, "train");
  check_dataset(splits.val, model, "val");
  check_dataset(splits.test, model, "test");

  Rng master = make_rng(cfg.seed);
  Rng shuffle_rng = master.fork(11);
  Rng dropout_rng = master.fork(12);

  auto params = parameters(model);
  AdamW opt;
  TrainReport report;

  std::vector<int64_t> order(static_cast<size_t>(splits.train.count));
  std::iota(order.begin(), order.end(), 0);

  double clip_sq = cfg.clip_norm > 0 ? cfg.clip_norm * cfg.clip_norm : 0;

  for (int64_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const double lr = step_lr(epoch, cfg);
    std::shuffle(order.begin(), order.end(), shuffle_rng.engine());

    double loss_sum = 0;
    int64_t batches = 0;
    for (int64_t begin = 0; begin < splits.train.count; begin += cfg.batch_size) {
      const int64_t end = std::min(begin + cfg.batch_size, splits.train.count);
      Batch batch = gather_batch(splits.train, order, begin, end);
      Tape tape;
      Tensor loss = batch_loss(&tape, model, batch, splits.train, true, &dropout_rng);
      for (auto& p : params) p.tensor.zero_grad();
      tape.backward(loss);
      if (clip_sq > 0) {
        double total = 0;
        for (auto& p : params)
          if (p.trainable)
            for (double g : p.tensor.grad()) total += g * g;
        if (total > clip_sq) {
          const double scale = cfg.clip_norm / std::sqrt(total);
          for (auto& p : params)
            if (p.trainable)
              for (double& g : p.tensor.grad()) g *= scale;
        }
      }
      opt.step(params, lr, cfg.weight_decay);
      loss_sum += loss.item();
      ++batches;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = lr;
    rec.train_loss = loss_sum / static_cast<double>(batches);
    Metrics val = evaluate(model, splits.val, cfg.batch_size);
    Metrics test = evaluate(model, splits.test, cfg.batch_size);
    rec.val_mse = val.mse;
    rec.val_mae = val.mae;
    rec.test_mse = test.mse;
    rec.test_mae = test.mae;
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    report.epochs.push_back(rec);

    if (val.mse < report.best_val_mse) {
      report.best_val_mse = val.mse;
      report.best_epoch = epoch;
      if (!checkpoint_path.empty()) save_checkpoint(model, checkpoint_path);
    }
  }

  // Final test metrics come from the best-validation checkpoint via the
  // same evaluation path the eval command uses.
  if (!checkpoint_path.empty() && report.best_epoch >= 0)
    load_checkpoint_into(model, checkpoint_path);
  Metrics final_test = evaluate(model, splits.test, cfg.batch_size);
  report.final_test_mse = final_test.mse;
  report.final_test_mae = final_test.mae;

  if (!metrics_csv.empty()) write_metrics_csv(metrics_csv, report);
  return report;
}

void write_metrics_csv(const std::string& path, const TrainReport& report) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write metrics CSV: " + path);
  out << "epoch,split,mse,mae,lr,seconds\n";
  out.precision(17);
  for (const auto& r : report.epochs) {
    out << r.epoch << ",train," << r.train_loss << ",nan," << r.lr << "," << r.seconds << "\n";
    out << r.epoch << ",val," << r.val_mse << "," << r.val_mae << "," << r.lr << "," << r.seconds
        << "\n";
    out << r.epoch << ",test," << r.test_mse << "," << r.test_mae << "," << r.lr << ","
        << r.seconds << "\n";
  }
}

}  // namespace blur
