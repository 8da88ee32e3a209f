#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>

#include "blur/checkpoint.hpp"
#include "blur/parallel.hpp"
#include "blur/data.hpp"
#include "blur/training.hpp"

using namespace blur;

namespace {

ModelConfig small_model_config(uint64_t seed) {
  ModelConfig cfg;
  cfg.input_dim = 1;
  cfg.embed_dim = 8;
  cfg.latent_dim = 6;
  cfg.num_blocks = 2;
  cfg.output_dim = 1;
  cfg.dropout = 0.1;
  cfg.seed = seed;
  return cfg;
}

SplitDataset sine_splits(int64_t horizon) {
  MultivariateSeries series = synth_sine(1200, 0.05, 77);
  SplitSeries s = split_ratio(series, 12, 4, 4);
  Standardizer std_;
  std_.fit(s.train);
  SplitDataset out;
  out.train = make_forecast_dataset(std_.transform(s.train), horizon, 1);
  out.val = make_forecast_dataset(std_.transform(s.val), horizon, horizon);
  out.test = make_forecast_dataset(std_.transform(s.test), horizon, horizon);
  return out;
}

std::string tmp_path(const char* name) { return std::string("/tmp/blur_test_") + name; }

}  // namespace

TEST_CASE("learning-rate schedule follows the decayed-with-floor rule") {
  TrainConfig cfg;
  CHECK(step_lr(0, cfg) == doctest::Approx(0.001));
  CHECK(step_lr(1, cfg) == doctest::Approx(0.0007));
  CHECK(step_lr(2, cfg) == doctest::Approx(0.00049));
  CHECK(step_lr(1000, cfg) == doctest::Approx(1e-7));
  CHECK_THROWS_AS(step_lr(-1, cfg), ConfigError);
}

TEST_CASE("train config invariants") {
  TrainConfig cfg;
  cfg.min_lr = 0.01;
  cfg.base_lr = 0.001;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = TrainConfig{};
  cfg.lr_decay = 1.5;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("optimizer leaves parameters alone under zero gradients and no decay") {
  Tensor p = Tensor::from({3}, {1.0, -2.0, 0.5});
  std::vector<NamedParam> params{{"p", p, true, true}};
  p.grad();  // allocate zeros
  AdamW opt;
  opt.step(params, 0.01, 0.0);
  CHECK(p.value()[0] == 1.0);
  CHECK(p.value()[1] == -2.0);
  CHECK(p.value()[2] == 0.5);
}

TEST_CASE("decoupled weight decay scales parameters by (1 - lr*wd)") {
  Tensor p = Tensor::from({2}, {1.0, -2.0});
  std::vector<NamedParam> params{{"p", p, true, true}};
  p.grad();
  AdamW opt;
  opt.step(params, 0.1, 0.05);
  CHECK(p.value()[0] == doctest::Approx(1.0 * (1.0 - 0.1 * 0.05)).epsilon(1e-12));
  CHECK(p.value()[1] == doctest::Approx(-2.0 * (1.0 - 0.1 * 0.05)).epsilon(1e-12));
}

TEST_CASE("optimizer drives a quadratic bowl to the origin") {
  Tensor x = Tensor::from({1}, {1.0});
  std::vector<NamedParam> params{{"x", x, false, true}};
  AdamW opt;
  for (int step = 0; step < 200; ++step) {
    x.zero_grad();
    Tape tape;
    Tensor loss = ops::mse_loss(&tape, x, Tensor::zeros({1}));
    tape.backward(loss);
    opt.step(params, 0.1, 0.0);
  }
  CHECK(std::abs(x.value()[0]) < 1e-3);
}

TEST_CASE("optimizer aborts on non-finite updates, naming the parameter") {
  Tensor p = Tensor::from({1}, {1.0});
  std::vector<NamedParam> params{{"block0.fwd.b_re", p, true, true}};
  p.grad()[0] = std::numeric_limits<double>::infinity();
  AdamW opt;
  try {
    opt.step(params, 0.1, 0.0);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("block0.fwd.b_re") != std::string::npos);
  }
}

TEST_CASE("checkpoint round trip is bitwise and byte identical") {
  ModelConfig cfg = small_model_config(42);
  BlurModel model = init_model(cfg);
  const std::string path1 = tmp_path("ckpt1.blur");
  const std::string path2 = tmp_path("ckpt2.blur");
  save_checkpoint(model, path1);
  BlurModel loaded = load_checkpoint(path1);
  auto a = parameters(model);
  auto b = parameters(loaded);
  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i) {
    REQUIRE(a[i].tensor.numel() == b[i].tensor.numel());
    for (int64_t j = 0; j < a[i].tensor.numel(); ++j)
      CHECK(a[i].tensor.value()[static_cast<size_t>(j)] == b[i].tensor.value()[static_cast<size_t>(j)]);
  }
  save_checkpoint(loaded, path2);
  std::ifstream f1(path1, std::ios::binary), f2(path2, std::ios::binary);
  std::string c1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
  std::string c2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
  CHECK(c1 == c2);
  std::remove(path1.c_str());
  std::remove(path2.c_str());
}

TEST_CASE("checkpoint rejects corrupted magic bytes") {
  ModelConfig cfg = small_model_config(43);
  BlurModel model = init_model(cfg);
  const std::string path = tmp_path("ckpt_bad.blur");
  save_checkpoint(model, path);
  {
    std::fstream f(path, std::ios::binary | std::ios::in | std::ios::out);
    f.seekp(0);
    f.write("NOTBLUR!", 8);
  }
  CHECK_THROWS_AS(load_checkpoint(path), IoError);
  std::remove(path.c_str());
}

TEST_CASE("checkpoint rejects truncated files") {
  ModelConfig cfg = small_model_config(44);
  BlurModel model = init_model(cfg);
  const std::string path = tmp_path("ckpt_trunc.blur");
  save_checkpoint(model, path);
  std::ifstream in(path, std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  in.close();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
  out.close();
  CHECK_THROWS_AS(load_checkpoint(path), IoError);
  std::remove(path.c_str());
}

TEST_CASE("loading a 2-block checkpoint into a 4-block config names the offending entry") {
  ModelConfig cfg2 = small_model_config(45);
  BlurModel small = init_model(cfg2);
  const std::string path = tmp_path("ckpt_mismatch.blur");
  save_checkpoint(small, path);

  ModelConfig cfg4 = cfg2;
  cfg4.num_blocks = 4;
  BlurModel big = init_model(cfg4);
  try {
    load_checkpoint_into(big, path);
    FAIL("expected IoError");
  } catch (const IoError& e) {
    CHECK(std::string(e.what()).find("block2") != std::string::npos);
  }
  std::remove(path.c_str());
}

TEST_CASE("shape mismatch on an entry is reported by name") {
  ModelConfig cfg = small_model_config(46);
  BlurModel model = init_model(cfg);
  const std::string path = tmp_path("ckpt_shape.blur");
  save_checkpoint(model, path);
  ModelConfig wider = cfg;
  wider.latent_dim = cfg.latent_dim + 2;
  BlurModel other = init_model(wider);
  try {
    load_checkpoint_into(other, path);
    FAIL("expected IoError");
  } catch (const IoError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("shape mismatch") != std::string::npos);
  }
  std::remove(path.c_str());
}

TEST_CASE("training runs are bit-identically reproducible under a fixed seed") {
  SplitDataset splits = sine_splits(12);
  TrainConfig tcfg;
  tcfg.epochs = 2;
  tcfg.batch_size = 32;
  tcfg.seed = 9;

  ModelConfig mcfg = small_model_config(9);
  BlurModel m1 = init_model(mcfg);
  BlurModel m2 = init_model(mcfg);
  TrainReport r1 = train(m1, splits, tcfg);
  TrainReport r2 = train(m2, splits, tcfg);
  REQUIRE(r1.epochs.size() == r2.epochs.size());
  for (size_t e = 0; e < r1.epochs.size(); ++e) {
    CHECK(r1.epochs[e].train_loss == r2.epochs[e].train_loss);
    CHECK(r1.epochs[e].val_mse == r2.epochs[e].val_mse);
    CHECK(r1.epochs[e].test_mse == r2.epochs[e].test_mse);
  }
}

TEST_CASE("training keeps every eigenvalue inside the unit circle") {
  SplitDataset splits = sine_splits(12);
  TrainConfig tcfg;
  tcfg.epochs = 3;
  tcfg.batch_size = 32;
  tcfg.base_lr = 0.01;  // aggressive on purpose
  tcfg.seed = 10;
  ModelConfig mcfg = small_model_config(10);
  BlurModel model = init_model(mcfg);
  train(model, splits, tcfg);
  for (const auto& blk : model.blocks) {
    CHECK(spectral_radius(blk.fwd) < 1.0);
    CHECK(spectral_radius(blk.bwd) < 1.0);
  }
}

TEST_CASE("train records epochs, picks the best checkpoint, writes metrics CSV") {
  SplitDataset splits = sine_splits(12);
  TrainConfig tcfg;
  tcfg.epochs = 3;
  tcfg.batch_size = 32;
  tcfg.seed = 11;
  ModelConfig mcfg = small_model_config(11);
  BlurModel model = init_model(mcfg);
  const std::string ckpt = tmp_path("best.blur");
  const std::string csv = tmp_path("metrics.csv");
  TrainReport report = train(model, splits, tcfg, ckpt, csv);

  CHECK(report.epochs.size() == 3);
  CHECK(report.best_epoch >= 0);
  double best = std::numeric_limits<double>::infinity();
  for (const auto& e : report.epochs) best = std::min(best, e.val_mse);
  CHECK(report.best_val_mse == best);

  // Final test metrics come from re-evaluating the best checkpoint.
  BlurModel reloaded = load_checkpoint(ckpt);
  Metrics test = evaluate(reloaded, splits.test, tcfg.batch_size);
  CHECK(test.mse == report.final_test_mse);

  std::ifstream in(csv);
  std::string header;
  std::getline(in, header);
  CHECK(header == "epoch,split,mse,mae,lr,seconds");
  int rows = 0;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 9);  // 3 epochs x 3 splits
  std::remove(ckpt.c_str());
  std::remove(csv.c_str());
}

TEST_CASE("train rejects empty splits") {
  SplitDataset splits = sine_splits(12);
  splits.val = Dataset{};
  TrainConfig tcfg;
  tcfg.epochs = 1;
  ModelConfig mcfg = small_model_config(12);
  BlurModel model = init_model(mcfg);
  CHECK_THROWS_AS(train(model, splits, tcfg), ConfigError);
}

TEST_CASE("per-step labeling datasets train with cross-entropy") {
  BidirTask task = synth_bidir(16, 96, 5, 3);
  Dataset data = bidir_to_dataset(task);
  SplitDataset splits;
  splits.train = data;
  splits.val = data;
  splits.test = data;
  ModelConfig mcfg;
  mcfg.input_dim = 3;
  mcfg.embed_dim = 8;
  mcfg.latent_dim = 8;
  mcfg.num_blocks = 1;
  mcfg.output_dim = 3;
  mcfg.dropout = 0.0;
  mcfg.seed = 6;
  BlurModel model = init_model(mcfg);
  TrainConfig tcfg;
  tcfg.epochs = 2;
  tcfg.batch_size = 32;
  tcfg.seed = 6;
  TrainReport report = train(model, splits, tcfg);
  CHECK(report.epochs.size() == 2);
  // Cross-entropy should drop from the first epoch to the second.
  CHECK(report.epochs[1].train_loss < report.epochs[0].train_loss);
  const double acc = accuracy(model, data, 32);
  CHECK(acc >= 0.0);
  CHECK(acc <= 1.0);
}

TEST_CASE("loss traces are invariant to the thread count") {
  SplitDataset splits = sine_splits(12);
  TrainConfig tcfg;
  tcfg.epochs = 2;
  tcfg.batch_size = 32;
  tcfg.seed = 13;
  ModelConfig mcfg = small_model_config(13);

  set_threads(1);
  BlurModel m1 = init_model(mcfg);
  TrainReport r1 = train(m1, splits, tcfg);
  set_threads(2);
  BlurModel m2 = init_model(mcfg);
  TrainReport r2 = train(m2, splits, tcfg);
  set_threads(hardware_threads());

  REQUIRE(r1.epochs.size() == r2.epochs.size());
  for (size_t e = 0; e < r1.epochs.size(); ++e) {
    CHECK(r1.epochs[e].train_loss == r2.epochs[e].train_loss);
    CHECK(r1.epochs[e].val_mse == r2.epochs[e].val_mse);
    CHECK(r1.epochs[e].test_mse == r2.epochs[e].test_mse);
  }
}

TEST_CASE("a 4-block checkpoint does not load into a 2-block model") {
  ModelConfig cfg4 = small_model_config(47);
  cfg4.num_blocks = 4;
  BlurModel big = init_model(cfg4);
  const std::string path = tmp_path("ckpt_4to2.blur");
  save_checkpoint(big, path);
  ModelConfig cfg2 = cfg4;
  cfg2.num_blocks = 2;
  BlurModel small = init_model(cfg2);
  try {
    load_checkpoint_into(small, path);
    FAIL("expected IoError");
  } catch (const IoError& e) {
    CHECK(std::string(e.what()).find("block2") != std::string::npos);
  }
  std::remove(path.c_str());
}
