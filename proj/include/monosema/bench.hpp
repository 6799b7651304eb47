#pragma once

#include <map>
#include <string>
#include <vector>

#include "monosema/monoscore.hpp"

namespace monosema {

struct BenchConfig {
  std::vector<std::size_t> sizes;  // strictly increasing
  std::size_t dim = 64;
  std::size_t n_latents = 256;
  std::size_t reps = 3;  // timed repetitions per point, median reported
  std::size_t pairwise_cutoff = 1 << 14;  // pairwise is skipped above this N
  int threads = 1;  // > 1 adds sharded-linear rows, reported separately
  std::uint64_t seed = 42;
  MonoScoreConfig score_cfg;
};

struct BenchRow {
  std::string algorithm;  // "pairwise", "linear", "linear_mt"
  std::size_t n = 0;
  std::size_t reps = 0;
  double median_seconds = 0.0;        // NaN when skipped
  double speedup_vs_pairwise = 0.0;   // NaN when pairwise did not run at this N
  bool skipped = false;
};

struct BenchResult {
  std::vector<BenchRow> rows;
  std::map<std::string, double> slopes;  // fitted log-log slope per algorithm
  BenchConfig config;
};

/// Least-squares slope of log2(seconds) against log2(N).
double fit_loglog_slope(const std::vector<std::size_t>& sizes,
                        const std::vector<double>& seconds);

/// Times both algorithms on identical synthetic inputs per size, one warm-up
/// run discarded, median over `reps` repetitions. Both algorithms run
/// single-threaded for the headline rows; threads > 1 adds a separate
/// sharded-linear series.
BenchResult run_bench(const BenchConfig& cfg);

/// CSV with fixed header
/// "algorithm,n,reps,median_seconds,speedup_vs_pairwise,status".
void write_bench_csv(const std::string& path, const BenchResult& result);
void write_bench_json(const std::string& path, const BenchResult& result);

/// Log-log wall-clock plot of the measured series, slope annotations in the
/// legend. A convenience view over the CSV.
void write_bench_svg(const std::string& path, const BenchResult& result);

}  // namespace monosema
