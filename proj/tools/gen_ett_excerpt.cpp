// Generates the bundled ETT-style excerpt: four months of hourly data with
// six load channels and an oil-temperature target that lags the loads.
// Deterministic for a fixed seed; regenerate with
//   gen_ett_excerpt --out data/etth1_excerpt.csv

#include <CLI11.hpp>
#include <cmath>
#include <iostream>

#include "blur/data.hpp"

using namespace blur;

int main(int argc, char** argv) {
  CLI::App app{"generate the bundled ETT-style excerpt"};
  std::string out = "data/etth1_excerpt.csv";
  int64_t rows = 2952;  // 123 days, hourly
  uint64_t seed = 20160701;
  app.add_option("--out", out, "output CSV path");
  app.add_option("--rows", rows, "number of hourly rows");
  app.add_option("--seed", seed, "generator seed");
  CLI11_PARSE(app, argc, argv);

  Rng rng = make_rng(seed);
  MultivariateSeries s;
  s.columns = {"HUFL", "HULL", "MUFL", "MULL", "LUFL", "LULL", "OT"};
  s.cols = 7;
  s.target_index = 6;
  s.rows = rows;
  s.timestamps.resize(static_cast<size_t>(rows));
  s.values.assign(static_cast<size_t>(rows * 7), 0.0);

  const int64_t start = civil_to_epoch({2016, 7, 1, 0, 0, 0});
  const double two_pi = 6.283185307179586;

  // Per-channel cycle parameters.
  double base[6], day_amp[6], week_amp[6], phase[6], drift_amp[6];
  for (int f = 0; f < 6; ++f) {
    base[f] = rng.uniform(8.0, 30.0);
    day_amp[f] = rng.uniform(2.0, 7.0);
    week_amp[f] = rng.uniform(1.0, 3.0);
    phase[f] = rng.uniform(0.0, two_pi);
    drift_amp[f] = rng.uniform(1.0, 4.0);
  }
  double ar[7] = {0, 0, 0, 0, 0, 0, 0};

  for (int64_t t = 0; t < rows; ++t) {
    s.timestamps[static_cast<size_t>(t)] = start + t * 3600;
    const double td = static_cast<double>(t);
    double load_mean = 0.0;
    for (int f = 0; f < 6; ++f) {
      ar[f] = 0.9 * ar[f] + rng.normal(0.0, 0.6);
      const double v = base[f] + day_amp[f] * std::sin(two_pi * td / 24.0 + phase[f]) +
                       week_amp[f] * std::sin(two_pi * td / 168.0 + 0.5 * phase[f]) +
                       drift_amp[f] * std::sin(two_pi * td / 2200.0 + phase[f]) + ar[f];
      s.values[static_cast<size_t>(t * 7 + f)] = v;
      load_mean += v / 6.0;
    }
    // Oil temperature follows the mean load from a day earlier plus its own
    // daily cycle.
    const double lagged = t >= 24 ? s.values[static_cast<size_t>((t - 24) * 7)] : load_mean;
    ar[6] = 0.95 * ar[6] + rng.normal(0.0, 0.25);
    s.values[static_cast<size_t>(t * 7 + 6)] =
        18.0 + 0.25 * load_mean + 0.15 * lagged + 2.5 * std::sin(two_pi * (td - 3.0) / 24.0) +
        1.2 * std::sin(two_pi * td / 2200.0) + ar[6];
  }

  write_csv(s, out);
  std::cout << "wrote " << out << " (" << rows << " rows, 7 features)\n";
  return 0;
}
