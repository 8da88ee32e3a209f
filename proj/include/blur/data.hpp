#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "blur/training.hpp"

namespace blur {

// Calendar instant, civil time (no timezone).
struct CivilTime {
  int year = 1970, month = 1, day = 1, hour = 0, minute = 0, second = 0;
};

int64_t civil_to_epoch(const CivilTime& t);
CivilTime epoch_to_civil(int64_t seconds);
CivilTime parse_timestamp(const std::string& text);  // "YYYY-MM-DD HH:MM:SS"
std::string format_timestamp(int64_t epoch_seconds);
int64_t add_months(int64_t epoch_seconds, int months);

struct MultivariateSeries {
  std::vector<int64_t> timestamps;  // strictly increasing, uniform interval
  std::vector<double> values;       // (rows, cols) row-major
  int64_t rows = 0, cols = 0;
  int64_t target_index = 0;
  std::vector<std::string> columns;

  double at(int64_t r, int64_t c) const { return values[static_cast<size_t>(r * cols + c)]; }
  int64_t span_months() const;
};

// First column is the timestamp; remaining columns are numeric features.
// Rows with unparsable values are rejected with their line number.
MultivariateSeries load_csv(const std::string& path);

// Numeric write-back with canonical shortest round-trip rendering.
void write_csv(const MultivariateSeries& series, const std::string& path);

struct SplitSeries {
  MultivariateSeries train, val, test;
};

// Contiguous chronological split by civil calendar months from the first
// timestamp. Requires span >= train+val+test months.
SplitSeries split_months(const MultivariateSeries& series, int train_months = 12,
                         int val_months = 4, int test_months = 4);

// Proportional split for short series (ratios normalized internally).
SplitSeries split_ratio(const MultivariateSeries& series, double train = 12, double val = 4,
                        double test = 4);

// Window origins for (input N, target N) pairs: sample count is
// floor((T - 2N)/stride) + 1.
std::vector<int64_t> windowize(int64_t series_len, int64_t horizon, int64_t stride);

// Per-feature z-score with statistics from the train split only.
class Standardizer {
 public:
  void fit(const MultivariateSeries& train);
  MultivariateSeries transform(const MultivariateSeries& s) const;
  MultivariateSeries inverse(const MultivariateSeries& s) const;
  const std::vector<double>& means() const { return mean_; }
  const std::vector<double>& sds() const { return sd_; }
  const std::vector<int>& constant_features() const { return constant_; }

 private:
  std::vector<double> mean_, sd_;
  std::vector<int> constant_;  // indices passed through unscaled
};

// Materializes windows into a training dataset (all features in, all
// features predicted).
Dataset make_forecast_dataset(const MultivariateSeries& series, int64_t horizon, int64_t stride);

// Forecast that repeats the last observed value across the horizon.
Metrics persistence_baseline(const Dataset& data);

// Two incommensurate sinusoids plus optional Gaussian noise, univariate,
// hourly timestamps.
MultivariateSeries synth_sine(int64_t length, double noise_sd, uint64_t seed);

// Sequence labeling where the label at k mixes the tokens at k-2 and k+2
// (zero token outside the sequence), so future context is required.
struct BidirTask {
  int64_t length = 0, count = 0, alphabet = 0;
  std::vector<int> tokens;  // (count, N)
  std::vector<int> labels;  // (count, N)
};

BidirTask synth_bidir(int64_t length, int64_t count, uint64_t seed, int64_t alphabet = 4);
Dataset bidir_to_dataset(const BidirTask& task);

// Best per-step accuracy achievable from past context only (labels depend
// on an unseen future token at interior positions).
double bidir_forward_only_ceiling(int64_t length, int64_t alphabet);

// Simple binary container: i64 count, N, F then row-major float64 samples.
void write_windows_bin(const Dataset& data, const std::string& path);
Dataset read_windows_bin(const std::string& path);

}  // namespace blur
