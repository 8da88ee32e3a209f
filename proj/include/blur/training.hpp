#pragma once

#include <limits>
#include <string>
#include <vector>

#include "blur/network.hpp"

namespace blur {

// Defaults follow the hyperparameter table: batch 64, base lr 1e-3 decayed
// by 0.7 per epoch down to 1e-7, dropout 0.1, weight decay 0.05.
struct TrainConfig {
  int64_t batch_size = 64;
  int64_t epochs = 8;
  double base_lr = 0.001;
  double min_lr = 1e-7;
  double lr_decay = 0.7;
  double weight_decay = 0.05;
  double clip_norm = 0.0;  // optional max-norm clip, 0 disables
  uint64_t seed = 0;

  void validate() const;
};

double step_lr(int64_t epoch, const TrainConfig& cfg);

// Windowed, fully materialized dataset. Regression: targets (count, N, s).
// Labeling: per-step integer labels (count, N); pooled: one label per
// sequence.
struct Dataset {
  TaskKind task = TaskKind::regression;
  bool per_step_labels = false;
  int64_t count = 0, length = 0, feat = 0, out_dim = 0;
  std::vector<double> inputs;
  std::vector<double> targets;
  std::vector<int> labels;

  bool empty() const { return count == 0; }
};

struct SplitDataset {
  Dataset train, val, test;
};

struct EpochRecord {
  int64_t epoch = 0;
  double train_loss = 0, val_mse = 0, val_mae = 0, test_mse = 0, test_mae = 0;
  double lr = 0, seconds = 0;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  int64_t best_epoch = -1;
  double best_val_mse = std::numeric_limits<double>::infinity();
  double final_test_mse = 0, final_test_mae = 0;
};

// For classification datasets, mse holds mean cross-entropy and mae holds
// the error rate; the CSV column order stays fixed either way.
struct Metrics {
  double mse = 0, mae = 0;
};

Metrics evaluate(BlurModel& model, const Dataset& data, int64_t batch_size);

// Mean per-step argmax accuracy; labeling/classification datasets only.
double accuracy(BlurModel& model, const Dataset& data, int64_t batch_size);

// Decoupled-weight-decay adaptive-moment optimizer, β = (0.9, 0.999),
// ε = 1e-8. Decay skips parameters flagged weight_decay = false.
class AdamW {
 public:
  AdamW(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : beta1_(beta1), beta2_(beta2), eps_(eps) {}
  void step(std::vector<NamedParam>& params, double lr, double weight_decay);

 private:
  double beta1_, beta2_, eps_;
  int64_t t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

TrainReport train(BlurModel& model, const SplitDataset& splits, const TrainConfig& cfg,
                  const std::string& checkpoint_path = "", const std::string& metrics_csv = "");

void write_metrics_csv(const std::string& path, const TrainReport& report);

}  // namespace blur
