#include "blur/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace blur {

namespace {

// Days since 1970-01-01 for a civil date (Gregorian, proleptic).
int64_t days_from_civil(int y, int m, int d) {
  y -= m <= 2;
  const int64_t era = (y >= 0 ? y : y - 399) / 400;
  const int64_t yoe = y - era * 400;
  const int64_t doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const int64_t doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + doe - 719468;
}

void civil_from_days(int64_t z, int* y, int* m, int* d) {
  z += 719468;
  const int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const int64_t doe = z - era * 146097;
  const int64_t yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const int64_t yr = yoe + era * 400;
  const int64_t doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const int64_t mp = (5 * doy + 2) / 153;
  *d = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
  *m = static_cast<int>(mp + (mp < 10 ? 3 : -9));
  *y = static_cast<int>(yr + (*m <= 2));
}

int days_in_month(int y, int m) {
  static const int lens[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  if (m != 2) return lens[m - 1];
  const bool leap = (y % 4 == 0 && y % 100 != 0) || y % 400 == 0;
  return leap ? 29 : 28;
}

}  // namespace

int64_t civil_to_epoch(const CivilTime& t) {
  return days_from_civil(t.year, t.month, t.day) * 86400 + t.hour * 3600 + t.minute * 60 +
         t.second;
}

CivilTime epoch_to_civil(int64_t seconds) {
  int64_t days = seconds / 86400;
  int64_t rem = seconds % 86400;
  if (rem < 0) {
    rem += 86400;
    days -= 1;
  }
  CivilTime t;
  civil_from_days(days, &t.year, &t.month, &t.day);
  t.hour = static_cast<int>(rem / 3600);
  t.minute = static_cast<int>((rem % 3600) / 60);
  t.second = static_cast<int>(rem % 60);
  return t;
}

CivilTime parse_timestamp(const std::string& text) {
  CivilTime t;
  if (std::sscanf(text.c_str(), "%d-%d-%d %d:%d:%d", &t.year, &t.month, &t.day, &t.hour,
                  &t.minute, &t.second) != 6)
    throw IoError("cannot parse timestamp '" + text + "' (expected YYYY-MM-DD HH:MM:SS)");
  if (t.month < 1 || t.month > 12 || t.day < 1 || t.day > days_in_month(t.year, t.month) ||
      t.hour < 0 || t.hour > 23 || t.minute < 0 || t.minute > 59 || t.second < 0 || t.second > 59)
    throw IoError("timestamp out of range: '" + text + "'");
  return t;
}

std::string format_timestamp(int64_t epoch_seconds) {
  const CivilTime t = epoch_to_civil(epoch_seconds);
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d %02d:%02d:%02d", t.year, t.month, t.day, t.hour,
                t.minute, t.second);
  return buf;
}

int64_t add_months(int64_t epoch_seconds, int months) {
  CivilTime t = epoch_to_civil(epoch_seconds);
  int total = (t.year * 12 + (t.month - 1)) + months;
  t.year = total / 12;
  t.month = total % 12 + 1;
  t.day = std::min(t.day, days_in_month(t.year, t.month));
  return civil_to_epoch(t);
}

int64_t MultivariateSeries::span_months() const {
  if (timestamps.empty()) return 0;
  int months = 0;
  while (add_months(timestamps.front(), months + 1) <= timestamps.back() + 1) ++months;
  return months;
}

MultivariateSeries load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open CSV file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw IoError("empty CSV file: " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();

  MultivariateSeries s;
  {
    std::stringstream header(line);
    std::string cell;
    bool first = true;
    while (std::getline(header, cell, ',')) {
      if (first) {
        first = false;
        continue;  // timestamp column
      }
      s.columns.push_back(cell);
    }
  }
  s.cols = static_cast<int64_t>(s.columns.size());
  if (s.cols < 1) throw IoError("CSV has no feature columns: " + path);
  // ETT convention: the target (OT) is the last column.
  s.target_index = s.cols - 1;

  int64_t line_no = 1;
  int64_t interval = -1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::stringstream row(line);
    std::string cell;
    if (!std::getline(row, cell, ','))
      throw IoError("line " + std::to_string(line_no) + ": missing timestamp");
    const int64_t ts = civil_to_epoch(parse_timestamp(cell));
    if (!s.timestamps.empty()) {
      if (ts <= s.timestamps.back())
        throw IoError("line " + std::to_string(line_no) + ": non-monotone timestamp");
      const int64_t gap = ts - s.timestamps.back();
      if (interval < 0)
        interval = gap;
      else if (gap != interval)
        throw IoError("line " + std::to_string(line_no) + ": non-uniform sampling interval (" +
                      std::to_string(gap) + "s vs " + std::to_string(interval) + "s)");
    }
    int64_t col = 0;
    while (std::getline(row, cell, ',')) {
      if (col >= s.cols)
        throw IoError("line " + std::to_string(line_no) + ": ragged row (too many fields)");
      double v = 0;
      const char* b = cell.data();
      const char* e = b + cell.size();
      auto res = std::from_chars(b, e, v);
      if (res.ec != std::errc() || res.ptr != e)
        throw IoError("line " + std::to_string(line_no) + ": cannot parse numeric value '" +
                      cell + "' in column " + s.columns[static_cast<size_t>(col)]);
      if (!std::isfinite(v))
        throw IoError("line " + std::to_string(line_no) + ": non-finite value");
      s.values.push_back(v);
      ++col;
    }
    if (col != s.cols)
      throw IoError("line " + std::to_string(line_no) + ": ragged row (expected " +
                    std::to_string(s.cols) + " values, got " + std::to_string(col) + ")");
    s.timestamps.push_back(ts);
  }
  s.rows = static_cast<int64_t>(s.timestamps.size());
  if (s.rows == 0) throw IoError("CSV has a header but no data rows: " + path);
  return s;
}

void write_csv(const MultivariateSeries& series, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write CSV: " + path);
  out << "date";
  for (const auto& c : series.columns) out << "," << c;
  out << "\n";
  char num[64];
  for (int64_t r = 0; r < series.rows; ++r) {
    out << format_timestamp(series.timestamps[static_cast<size_t>(r)]);
    for (int64_t c = 0; c < series.cols; ++c) {
      // Shortest representation that round-trips the double exactly.
      auto res = std::to_chars(num, num + sizeof(num), series.at(r, c));
      out << ',';
      out.write(num, res.ptr - num);
    }
    out << "\n";
  }
}

namespace {

MultivariateSeries slice(const MultivariateSeries& s, int64_t begin, int64_t end) {
  MultivariateSeries out;
  out.cols = s.cols;
  out.target_index = s.target_index;
  out.columns = s.columns;
  out.rows = end - begin;
  out.timestamps.assign(s.timestamps.begin() + begin, s.timestamps.begin() + end);
  out.values.assign(s.values.begin() + begin * s.cols, s.values.begin() + end * s.cols);
  return out;
}

}  // namespace

SplitSeries split_months(const MultivariateSeries& series, int train_months, int val_months,
                         int test_months) {
  const int needed = train_months + val_months + test_months;
  if (series.rows == 0) throw ConfigError("split_months: empty series");
  if (series.span_months() < needed)
    throw ConfigError("split_months: series spans " + std::to_string(series.span_months()) +
                      " months, need >= " + std::to_string(needed));
  const int64_t start = series.timestamps.front();
  const int64_t t_end = add_months(start, train_months);
  const int64_t v_end = add_months(start, train_months + val_months);
  const int64_t s_end = add_months(start, needed);
  auto lower = [&](int64_t ts) {
    return std::lower_bound(series.timestamps.begin(), series.timestamps.end(), ts) -
           series.timestamps.begin();
  };
  SplitSeries out;
  out.train = slice(series, 0, lower(t_end));
  out.val = slice(series, lower(t_end), lower(v_end));
  out.test = slice(series, lower(v_end), lower(s_end));
  if (out.train.rows == 0 || out.val.rows == 0 || out.test.rows == 0)
    throw ConfigError("split_months produced an empty split");
  return out;
}

SplitSeries split_ratio(const MultivariateSeries& series, double train, double val, double test) {
  if (train <= 0 || val <= 0 || test <= 0) throw ConfigError("split_ratio: ratios must be > 0");
  const double total = train + val + test;
  const int64_t t_end = static_cast<int64_t>(series.rows * (train / total));
  const int64_t v_end = static_cast<int64_t>(series.rows * ((train + val) / total));
  SplitSeries out;
  out.train = slice(series, 0, t_end);
  out.val = slice(series, t_end, v_end);
  out.test = slice(series, v_end, series.rows);
  if (out.train.rows == 0 || out.val.rows == 0 || out.test.rows == 0)
    throw ConfigError("split_ratio produced an empty split (series too short)");
  return out;
}

std::vector<int64_t> windowize(int64_t series_len, int64_t horizon, int64_t stride) {
  if (horizon < 1) throw ConfigError("windowize: horizon must be >= 1");
  if (stride < 1) throw ConfigError("windowize: stride must be >= 1");
  if (series_len < 2 * horizon)
    throw ConfigError("windowize: series length " + std::to_string(series_len) +
                      " < 2*horizon = " + std::to_string(2 * horizon));
  std::vector<int64_t> origins;
  for (int64_t o = 0; o + 2 * horizon <= series_len; o += stride) origins.push_back(o);
  return origins;
}

void Standardizer::fit(const MultivariateSeries& train) {
  if (train.rows == 0) throw ConfigError("Standardizer: empty train split");
  const int64_t F = train.cols;
  mean_.assign(static_cast<size_t>(F), 0.0);
  sd_.assign(static_cast<size_t>(F), 1.0);
  constant_.clear();
  for (int64_t f = 0; f < F; ++f) {
    double m = 0;
    for (int64_t r = 0; r < train.rows; ++r) m += train.at(r, f);
    m /= static_cast<double>(train.rows);
    double var = 0;
    for (int64_t r = 0; r < train.rows; ++r) {
      const double d = train.at(r, f) - m;
      var += d * d;
    }
    var /= static_cast<double>(train.rows);
    if (var <= 0.0) {
      constant_.push_back(static_cast<int>(f));  // passes through unscaled
      mean_[static_cast<size_t>(f)] = 0.0;
      sd_[static_cast<size_t>(f)] = 1.0;
    } else {
      mean_[static_cast<size_t>(f)] = m;
      sd_[static_cast<size_t>(f)] = std::sqrt(var);
    }
  }
}

MultivariateSeries Standardizer::transform(const MultivariateSeries& s) const {
  if (static_cast<int64_t>(mean_.size()) != s.cols)
    throw DimensionError("Standardizer: fitted on different feature count");
  MultivariateSeries out = s;
  for (int64_t r = 0; r < s.rows; ++r)
    for (int64_t f = 0; f < s.cols; ++f)
      out.values[static_cast<size_t>(r * s.cols + f)] =
          (s.at(r, f) - mean_[static_cast<size_t>(f)]) / sd_[static_cast<size_t>(f)];
  return out;
}

MultivariateSeries Standardizer::inverse(const MultivariateSeries& s) const {
  if (static_cast<int64_t>(mean_.size()) != s.cols)
    throw DimensionError("Standardizer: fitted on different feature count");
  MultivariateSeries out = s;
  for (int64_t r = 0; r < s.rows; ++r)
    for (int64_t f = 0; f < s.cols; ++f)
      out.values[static_cast<size_t>(r * s.cols + f)] =
          s.at(r, f) * sd_[static_cast<size_t>(f)] + mean_[static_cast<size_t>(f)];
  return out;
}

Dataset make_forecast_dataset(const MultivariateSeries& series, int64_t horizon, int64_t stride) {
  const auto origins = windowize(series.rows, horizon, stride);
  Dataset d;
  d.task = TaskKind::regression;
  d.count = static_cast<int64_t>(origins.size());
  d.length = horizon;
  d.feat = series.cols;
  d.out_dim = series.cols;
  d.inputs.resize(static_cast<size_t>(d.count * horizon * series.cols));
  d.targets.resize(static_cast<size_t>(d.count * horizon * series.cols));
  for (int64_t i = 0; i < d.count; ++i) {
    const int64_t o = origins[static_cast<size_t>(i)];
    std::copy_n(series.values.data() + o * series.cols, horizon * series.cols,
                d.inputs.data() + i * horizon * series.cols);
    std::copy_n(series.values.data() + (o + horizon) * series.cols, horizon * series.cols,
                d.targets.data() + i * horizon * series.cols);
  }
  return d;
}

Metrics persistence_baseline(const Dataset& data) {
  if (data.task != TaskKind::regression) throw ContractError("persistence_baseline: regression only");
  double se = 0, ae = 0;
  const int64_t N = data.length, F = data.feat;
  for (int64_t i = 0; i < data.count; ++i) {
    const double* last = data.inputs.data() + (i * N + (N - 1)) * F;
    const double* tgt = data.targets.data() + i * N * F;
    for (int64_t k = 0; k < N; ++k)
      for (int64_t f = 0; f < F; ++f) {
        const double diff = tgt[k * F + f] - last[f];
        se += diff * diff;
        ae += std::abs(diff);
      }
  }
  const double denom = static_cast<double>(data.count * N * F);
  return {se / denom, ae / denom};
}

MultivariateSeries synth_sine(int64_t length, double noise_sd, uint64_t seed) {
  if (length < 4) throw ConfigError("synth_sine: length too short");
  Rng rng = make_rng(seed);
  MultivariateSeries s;
  s.cols = 1;
  s.target_index = 0;
  s.columns = {"OT"};
  s.rows = length;
  s.values.resize(static_cast<size_t>(length));
  s.timestamps.resize(static_cast<size_t>(length));
  const int64_t start = civil_to_epoch({2016, 7, 1, 0, 0, 0});
  // Periods 24 and 24*sqrt(2) hours: incommensurate, so the pair never
  // repeats exactly.
  const double w1 = 2.0 * 3.14159265358979323846 / 24.0;
  const double w2 = 2.0 * 3.14159265358979323846 / (24.0 * 1.4142135623730951);
  for (int64_t t = 0; t < length; ++t) {
    s.timestamps[static_cast<size_t>(t)] = start + t * 3600;
    double v = std::sin(w1 * static_cast<double>(t)) + 0.5 * std::sin(w2 * static_cast<double>(t));
    if (noise_sd > 0) v += rng.normal(0.0, noise_sd);
    s.values[static_cast<size_t>(t)] = v;
  }
  return s;
}

BidirTask synth_bidir(int64_t length, int64_t count, uint64_t seed, int64_t alphabet) {
  if (length < 8) throw ConfigError("synth_bidir: length must be >= 8");
  if (alphabet < 2) throw ConfigError("synth_bidir: alphabet must be >= 2");
  Rng rng = make_rng(seed);
  BidirTask task;
  task.length = length;
  task.count = count;
  task.alphabet = alphabet;
  task.tokens.resize(static_cast<size_t>(count * length));
  task.labels.resize(static_cast<size_t>(count * length));
  for (int64_t i = 0; i < count; ++i) {
    int* tok = task.tokens.data() + i * length;
    int* lab = task.labels.data() + i * length;
    for (int64_t k = 0; k < length; ++k)
      tok[k] = static_cast<int>(rng.integer(0, alphabet - 1));
    for (int64_t k = 0; k < length; ++k) {
      const int past = k - 2 >= 0 ? tok[k - 2] : 0;
      const int future = k + 2 < length ? tok[k + 2] : 0;
      lab[k] = static_cast<int>((past + future) % alphabet);
    }
  }
  return task;
}

Dataset bidir_to_dataset(const BidirTask& task) {
  Dataset d;
  d.task = TaskKind::classification;
  d.per_step_labels = true;
  d.count = task.count;
  d.length = task.length;
  d.feat = task.alphabet;  // one-hot tokens
  d.out_dim = task.alphabet;
  d.inputs.assign(static_cast<size_t>(task.count * task.length * task.alphabet), 0.0);
  d.labels = task.labels;
  for (int64_t i = 0; i < task.count * task.length; ++i)
    d.inputs[static_cast<size_t>(i * task.alphabet + task.tokens[static_cast<size_t>(i)])] = 1.0;
  return d;
}

double bidir_forward_only_ceiling(int64_t length, int64_t alphabet) {
  // Positions k [0-based] with k+2 < N depend on an unseen uniform future
  // token, so the best causal guess hits with probability 1/alphabet; the
  // final two positions are fully determined by past context.
  const double interior = static_cast<double>(length - 2) / static_cast<double>(alphabet);
  return (interior + 2.0) / static_cast<double>(length);
}

void write_windows_bin(const Dataset& data, const std::string& path) {
  if (data.task != TaskKind::regression) throw ContractError("write_windows_bin: regression only");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write: " + path);
  const int64_t header[3] = {data.count, data.length, data.feat};
  out.write(reinterpret_cast<const char*>(header), sizeof(header));
  out.write(reinterpret_cast<const char*>(data.inputs.data()),
            static_cast<std::streamsize>(data.inputs.size() * sizeof(double)));
  out.write(reinterpret_cast<const char*>(data.targets.data()),
            static_cast<std::streamsize>(data.targets.size() * sizeof(double)));
  if (!out) throw IoError("failed writing: " + path);
}

Dataset read_windows_bin(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path);
  int64_t header[3];
  in.read(reinterpret_cast<char*>(header), sizeof(header));
  if (!in) throw IoError("truncated windows file: " + path);
  Dataset d;
  d.task = TaskKind::regression;
  d.count = header[0];
  d.length = header[1];
  d.feat = header[2];
  d.out_dim = d.feat;
  d.inputs.resize(static_cast<size_t>(d.count * d.length * d.feat));
  d.targets.resize(d.inputs.size());
  in.read(reinterpret_cast<char*>(d.inputs.data()),
          static_cast<std::streamsize>(d.inputs.size() * sizeof(double)));
  in.read(reinterpret_cast<char*>(d.targets.data()),
          static_cast<std::streamsize>(d.targets.size() * sizeof(double)));
  if (!in) throw IoError("truncated windows file: " + path);
  return d;
}

}  // namespace blur
