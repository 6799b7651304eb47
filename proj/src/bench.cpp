#include "monosema/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>

#include <json.hpp>

#include "monosema/errors.hpp"
#include "monosema/rng.hpp"

namespace monosema {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct BenchInputs {
  FeatureMatrix features;
  ActivationMatrix activations;
};

// Random unit embeddings plus half-sparse activations in [0, 1].
BenchInputs make_inputs(std::size_t n, std::size_t dim, std::size_t n_latents,
                        std::uint64_t seed) {
  Rng rng(seed);
  Matrix h(n, dim);
  for (double& x : h.storage()) x = rng.normal();
  Matrix a(n_latents, n);
  for (double& x : a.storage()) {
    x = rng.uniform01() < 0.5 ? 0.0 : rng.uniform01();
  }
  return BenchInputs{FeatureMatrix(std::move(h)),
                     ActivationMatrix(std::move(a), false)};
}

double time_median(const std::function<void()>& fn, std::size_t reps) {
  fn();  // warm-up, discarded
  std::vector<double> times(reps);
  for (auto& t : times) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    t = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
  std::sort(times.begin(), times.end());
  const std::size_t mid = reps / 2;
  return reps % 2 == 1 ? times[mid] : 0.5 * (times[mid - 1] + times[mid]);
}

}  // namespace

double fit_loglog_slope(const std::vector<std::size_t>& sizes,
                        const std::vector<double>& seconds) {
  if (sizes.size() != seconds.size() || sizes.size() < 2) {
    throw ConfigError("slope fit needs at least two measured points");
  }
  const double n = static_cast<double>(sizes.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    const double x = std::log2(static_cast<double>(sizes[i]));
    const double y = std::log2(seconds[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

BenchResult run_bench(const BenchConfig& cfg) {
  if (cfg.sizes.empty()) throw ConfigError("bench needs at least one size");
  for (std::size_t i = 1; i < cfg.sizes.size(); ++i) {
    if (cfg.sizes[i] <= cfg.sizes[i - 1]) {
      throw ConfigError("bench sizes must be strictly increasing");
    }
  }
  if (cfg.sizes.front() < 2) throw ConfigError("bench sizes must be >= 2");
  if (cfg.reps < 3) throw ConfigError("bench needs at least 3 repetitions");

  BenchResult result;
  result.config = cfg;
  std::map<std::string, std::pair<std::vector<std::size_t>, std::vector<double>>> series;

  for (std::size_t i = 0; i < cfg.sizes.size(); ++i) {
    const std::size_t n = cfg.sizes[i];
    const BenchInputs in = make_inputs(n, cfg.dim, cfg.n_latents, cfg.seed + i);

    BenchRow pair_row{"pairwise", n, cfg.reps, kNaN, kNaN, false};
    if (n <= cfg.pairwise_cutoff) {
      pair_row.median_seconds = time_median(
          [&] { monoscore_pairwise(in.features, in.activations, cfg.score_cfg, 1); },
          cfg.reps);
      pair_row.speedup_vs_pairwise = 1.0;
      series["pairwise"].first.push_back(n);
      series["pairwise"].second.push_back(pair_row.median_seconds);
    } else {
      pair_row.skipped = true;
      pair_row.reps = 0;
    }
    result.rows.push_back(pair_row);

    BenchRow lin_row{"linear", n, cfg.reps, kNaN, kNaN, false};
    lin_row.median_seconds = time_median(
        [&] { monoscore_linear(in.features, in.activations, cfg.score_cfg, 1); },
        cfg.reps);
    if (!pair_row.skipped) {
      lin_row.speedup_vs_pairwise = pair_row.median_seconds / lin_row.median_seconds;
    }
    series["linear"].first.push_back(n);
    series["linear"].second.push_back(lin_row.median_seconds);
    result.rows.push_back(lin_row);

    if (cfg.threads > 1) {
      // Sharded accumulation with a private MonoStats per worker, merged in
      // shard order.
      BenchRow mt_row{"linear_mt", n, cfg.reps, kNaN, kNaN, false};
      mt_row.median_seconds = time_median(
          [&] {
            const ActivationMatrix norm = minmax_normalize(in.activations);
            MonoStats stats = build_stats_sharded(
                in.features, norm, static_cast<std::size_t>(cfg.threads), cfg.threads);
            finalize_scores(stats, cfg.score_cfg);
          },
          cfg.reps);
      if (!pair_row.skipped) {
        mt_row.speedup_vs_pairwise = pair_row.median_seconds / mt_row.median_seconds;
      }
      series["linear_mt"].first.push_back(n);
      series["linear_mt"].second.push_back(mt_row.median_seconds);
      result.rows.push_back(mt_row);
    }
  }

  for (const auto& [name, data] : series) {
    if (data.first.size() >= 2) {
      result.slopes[name] = fit_loglog_slope(data.first, data.second);
    }
  }
  return result;
}

void write_bench_csv(const std::string& path, const BenchResult& result) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << "algorithm,n,reps,median_seconds,speedup_vs_pairwise,status\n";
  char buf[64];
  for (const auto& row : result.rows) {
    out << row.algorithm << ',' << row.n << ',' << row.reps << ',';
    if (!row.skipped) {
      std::snprintf(buf, sizeof(buf), "%.9g", row.median_seconds);
      out << buf;
    }
    out << ',';
    if (!row.skipped && std::isfinite(row.speedup_vs_pairwise)) {
      std::snprintf(buf, sizeof(buf), "%.9g", row.speedup_vs_pairwise);
      out << buf;
    }
    out << ',' << (row.skipped ? "skipped" : "ok") << '\n';
  }
  if (!out) throw IoError("failed writing " + path);
}

void write_bench_json(const std::string& path, const BenchResult& result) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : result.rows) {
    nlohmann::json r{{"algorithm", row.algorithm},
                     {"n", row.n},
                     {"reps", row.reps},
                     {"status", row.skipped ? "skipped" : "ok"}};
    if (!row.skipped) {
      r["median_seconds"] = row.median_seconds;
      if (std::isfinite(row.speedup_vs_pairwise)) {
        r["speedup_vs_pairwise"] = row.speedup_vs_pairwise;
      }
    }
    rows.push_back(r);
  }
  const auto& cfg = result.config;
  nlohmann::json j{
      {"rows", rows},
      {"slopes", result.slopes},
      {"config",
       {{"sizes", cfg.sizes},
        {"dim", cfg.dim},
        {"n_latents", cfg.n_latents},
        {"reps", cfg.reps},
        {"pairwise_cutoff", cfg.pairwise_cutoff},
        {"threads", cfg.threads},
        {"seed", cfg.seed},
        {"epsilon_den", cfg.score_cfg.epsilon_den},
        {"pair_block", cfg.score_cfg.pair_block}}},
  };
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << j.dump(2) << '\n';
  if (!out) throw IoError("failed writing " + path);
}

void write_bench_svg(const std::string& path, const BenchResult& result) {
  // Gather per-series measured points.
  std::map<std::string, std::vector<std::pair<double, double>>> series;
  double min_x = 1e300, max_x = -1e300, min_y = 1e300, max_y = -1e300;
  for (const auto& row : result.rows) {
    if (row.skipped || !(row.median_seconds > 0.0)) continue;
    const double x = std::log2(static_cast<double>(row.n));
    const double y = std::log2(row.median_seconds);
    series[row.algorithm].emplace_back(x, y);
    min_x = std::min(min_x, x);
    max_x = std::max(max_x, x);
    min_y = std::min(min_y, y);
    max_y = std::max(max_y, y);
  }
  if (series.empty()) throw ConfigError("no measured points to plot");
  if (max_x - min_x < 1e-9) max_x = min_x + 1;
  if (max_y - min_y < 1e-9) max_y = min_y + 1;

  constexpr double W = 720, H = 480, L = 70, R = 20, T = 30, B = 50;
  auto px = [&](double x) { return L + (x - min_x) / (max_x - min_x) * (W - L - R); };
  auto py = [&](double y) { return H - B - (y - min_y) / (max_y - min_y) * (H - T - B); };
  const char* colors[] = {"#d62728", "#1f77b4", "#2ca02c", "#9467bd"};

  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << W << "' height='" << H
      << "' viewBox='0 0 " << W << ' ' << H << "'>\n"
      << "<rect width='100%' height='100%' fill='white'/>\n"
      << "<text x='" << W / 2
      << "' y='18' text-anchor='middle' font-size='14' font-family='sans-serif'>"
         "MonoScore wall-clock scaling (log-log)</text>\n";
  // axes
  out << "<line x1='" << L << "' y1='" << H - B << "' x2='" << W - R << "' y2='" << H - B
      << "' stroke='black'/>\n"
      << "<line x1='" << L << "' y1='" << T << "' x2='" << L << "' y2='" << H - B
      << "' stroke='black'/>\n";
  for (int e = static_cast<int>(std::ceil(min_x)); e <= static_cast<int>(max_x); ++e) {
    out << "<text x='" << px(e) << "' y='" << H - B + 18
        << "' text-anchor='middle' font-size='11' font-family='sans-serif'>2^" << e
        << "</text>\n";
  }
  for (int e = static_cast<int>(std::ceil(min_y)); e <= static_cast<int>(max_y); ++e) {
    out << "<text x='" << L - 8 << "' y='" << py(e) + 4
        << "' text-anchor='end' font-size='11' font-family='sans-serif'>2^" << e
        << "s</text>\n";
  }
  out << "<text x='" << (L + W - R) / 2 << "' y='" << H - 12
      << "' text-anchor='middle' font-size='12' font-family='sans-serif'>dataset size N"
         "</text>\n";

  int color_idx = 0;
  double legend_y = T + 14;
  for (const auto& [name, pts] : series) {
    const char* color = colors[color_idx++ % 4];
    out << "<polyline fill='none' stroke='" << color << "' stroke-width='2' points='";
    for (const auto& [x, y] : pts) out << px(x) << ',' << py(y) << ' ';
    out << "'/>\n";
    for (const auto& [x, y] : pts) {
      out << "<circle cx='" << px(x) << "' cy='" << py(y) << "' r='3' fill='" << color
          << "'/>\n";
    }
    out << "<text x='" << W - R - 6 << "' y='" << legend_y
        << "' text-anchor='end' font-size='12' font-family='sans-serif' fill='" << color
        << "'>" << name;
    const auto slope = result.slopes.find(name);
    if (slope != result.slopes.end()) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), " (slope %.2f)", slope->second);
      out << buf;
    }
    out << "</text>\n";
    legend_y += 16;
  }
  out << "</svg>\n";
  if (!out) throw IoError("failed writing " + path);
}

}  // namespace monosema
