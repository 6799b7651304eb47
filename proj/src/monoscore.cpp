#include "monosema/monoscore.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "monosema/errors.hpp"

namespace monosema {

namespace {

constexpr std::size_t kSampleBlock = 512;

void check_paired(const FeatureMatrix& h, const ActivationMatrix& a) {
  if (h.n_samples() != a.n_samples()) {
    throw DimensionError("feature and activation sample counts differ");
  }
}

// Adds `a_norm` columns [n0, n1) into stats. Element order: every accumulator
// sees samples in ascending n, independent of how callers chunk the range, so
// chunked accumulation reproduces one-shot accumulation bit for bit. The
// latent loop parallelizes without changing that order.
void accumulate_range(MonoStats& stats, const Matrix& h, const Matrix& a_norm,
                      std::size_t n0, std::size_t n1, int threads) {
  const std::size_t n_latents = a_norm.rows();
  const std::size_t dim = h.cols();
  for (std::size_t b0 = n0; b0 < n1; b0 += kSampleBlock) {
    const std::size_t b1 = std::min(b0 + kSampleBlock, n1);
#pragma omp parallel for schedule(static) num_threads(threads) if (threads > 1)
    for (std::size_t k = 0; k < n_latents; ++k) {
      const double* ak = a_norm.data() + k * a_norm.cols();
      double* wk = stats.w.data() + k * dim;
      double uk = 0.0, vk = 0.0;
      for (std::size_t n = b0; n < b1; ++n) {
        const double t = ak[n];
        uk += t;
        vk += t * t;
        const double* hn = h.data() + n * dim;
        for (std::size_t j = 0; j < dim; ++j) wk[j] += t * hn[j];
      }
      stats.u[k] += uk;
      stats.v[k] += vk;
    }
  }
  stats.n_seen += n1 - n0;
}

struct PairAccum {
  std::vector<double> num;
  std::vector<double> den;
};

// One anchor row against samples [n+1, N), processed in blocks of cosine
// similarities as in the blocked reference formulation.
void pairwise_anchor(const Matrix& h, const Matrix& a_norm, std::size_t n,
                     std::size_t block, std::vector<double>& s, PairAccum& acc) {
  const std::size_t n_samples = h.rows();
  const std::size_t n_latents = a_norm.rows();
  const std::size_t dim = h.cols();
  const double* hn = h.data() + n * dim;
  for (std::size_t m0 = n + 1; m0 < n_samples; m0 += block) {
    const std::size_t count = std::min(block, n_samples - m0);
    for (std::size_t j = 0; j < count; ++j) {
      const double* hm = h.data() + (m0 + j) * dim;
      double c = 0.0;
      for (std::size_t t = 0; t < dim; ++t) c += hn[t] * hm[t];
      s[j] = c;
    }
    for (std::size_t k = 0; k < n_latents; ++k) {
      const double* ak = a_norm.data() + k * a_norm.cols();
      const double an = ak[n];
      double bn = 0.0, bd = 0.0;
      for (std::size_t j = 0; j < count; ++j) {
        const double p = ak[m0 + j];
        bn += p * s[j];
        bd += p;
      }
      acc.num[k] += an * bn;
      acc.den[k] += an * bd;
    }
  }
}

LatentScores scores_from_ratios(const std::vector<double>& num,
                                const std::vector<double>& den, double epsilon) {
  LatentScores out;
  out.scores.assign(num.size(), 0.0);
  out.active.assign(num.size(), 0);
  for (std::size_t k = 0; k < num.size(); ++k) {
    if (den[k] > epsilon) {
      out.scores[k] = num[k] / den[k];
      out.active[k] = 1;
    }
  }
  return out;
}

}  // namespace

ActivationExtrema activation_extrema(const ActivationMatrix& raw) {
  const std::size_t n_latents = raw.n_latents();
  ActivationExtrema ex;
  ex.min.resize(n_latents);
  ex.max.resize(n_latents);
  for (std::size_t k = 0; k < n_latents; ++k) {
    auto row = raw.latent_row(k);
    double lo = row[0], hi = row[0];
    for (double x : row) {
      lo = std::min(lo, x);
      hi = std::max(hi, x);
    }
    ex.min[k] = lo;
    ex.max[k] = hi;
  }
  return ex;
}

namespace {

Matrix scale_by_extrema(const ActivationMatrix& raw, const ActivationExtrema& ex,
                        bool clamp) {
  Matrix out(raw.n_latents(), raw.n_samples());
  for (std::size_t k = 0; k < raw.n_latents(); ++k) {
    auto src = raw.latent_row(k);
    auto dst = out.row(k);
    const double range = ex.max[k] - ex.min[k];
    if (!(range > 0.0)) {
      // Constant row: the latent cannot discriminate, map to all zeros.
      for (double& x : dst) x = 0.0;
      continue;
    }
    for (std::size_t n = 0; n < src.size(); ++n) {
      double t = (src[n] - ex.min[k]) / range;
      if (clamp) t = std::clamp(t, 0.0, 1.0);
      dst[n] = t;
    }
  }
  return out;
}

}  // namespace

ActivationMatrix minmax_normalize(const ActivationMatrix& raw) {
  const ActivationExtrema ex = activation_extrema(raw);
  return ActivationMatrix(scale_by_extrema(raw, ex, false), true);
}

ActivationMatrix minmax_normalize(const ActivationMatrix& raw,
                                  const ActivationExtrema& extrema, bool clamp) {
  if (extrema.min.size() != raw.n_latents() || extrema.max.size() != raw.n_latents()) {
    throw DimensionError("extrema length does not match latent count");
  }
  Matrix scaled = scale_by_extrema(raw, extrema, clamp);
  bool in_range = true;
  if (!clamp) {
    for (double x : scaled.storage()) {
      if (!(x >= 0.0 && x <= 1.0)) {
        in_range = false;
        break;
      }
    }
  }
  return ActivationMatrix(std::move(scaled), clamp || in_range);
}

void accumulate_stats(MonoStats& stats, const FeatureMatrix& h_batch,
                      const ActivationMatrix& a_batch) {
  check_paired(h_batch, a_batch);
  if (!a_batch.normalized()) {
    throw ConfigError("accumulate_stats requires normalized activations");
  }
  if (stats.n_latents() != a_batch.n_latents() || stats.dim() != h_batch.dim()) {
    throw DimensionError("stats shape does not match batch");
  }
  accumulate_range(stats, h_batch.data(), a_batch.data(), 0, h_batch.n_samples(), 1);
}

MonoStats build_stats_sharded(const FeatureMatrix& h, const ActivationMatrix& a_normalized,
                              std::size_t n_shards, int threads) {
  check_paired(h, a_normalized);
  if (!a_normalized.normalized()) {
    throw ConfigError("build_stats_sharded requires normalized activations");
  }
  const std::size_t n_samples = h.n_samples();
  n_shards = std::clamp<std::size_t>(n_shards, 1, n_samples);
  std::vector<MonoStats> parts(n_shards);
#pragma omp parallel for schedule(static) num_threads(threads) if (threads > 1)
  for (std::size_t s = 0; s < n_shards; ++s) {
    const std::size_t lo = s * n_samples / n_shards;
    const std::size_t hi = (s + 1) * n_samples / n_shards;
    parts[s] = MonoStats::zeros(a_normalized.n_latents(), h.dim());
    accumulate_range(parts[s], h.data(), a_normalized.data(), lo, hi, 1);
  }
  MonoStats total = std::move(parts[0]);
  for (std::size_t s = 1; s < n_shards; ++s) total = merge_stats(total, parts[s]);
  return total;
}

LatentScores finalize_scores(const MonoStats& stats, const MonoScoreConfig& cfg) {
  if (stats.n_seen < 1) {
    throw ConfigError("finalize_scores requires at least one accumulated sample");
  }
  const std::size_t n_latents = stats.n_latents();
  std::vector<double> num(n_latents), den(n_latents);
  for (std::size_t k = 0; k < n_latents; ++k) {
    const double q = squared_norm(stats.w.row(k));
    num[k] = 0.5 * (q - stats.v[k]);
    den[k] = 0.5 * (stats.u[k] * stats.u[k] - stats.v[k]);
  }
  return scores_from_ratios(num, den, cfg.epsilon_den);
}

LatentScores monoscore_pairwise(const FeatureMatrix& h, const ActivationMatrix& a,
                                const MonoScoreConfig& cfg, int threads) {
  check_paired(h, a);
  const ActivationMatrix normalized = a.normalized() ? a : minmax_normalize(a);
  const Matrix& an = normalized.data();
  const std::size_t n_samples = h.n_samples();
  const std::size_t n_latents = a.n_latents();
  const std::size_t block = std::max<std::size_t>(cfg.pair_block, 1);

  PairAccum total{std::vector<double>(n_latents, 0.0), std::vector<double>(n_latents, 0.0)};
  if (threads <= 1) {
    std::vector<double> s(block);
    for (std::size_t n = 0; n < n_samples; ++n) {
      pairwise_anchor(h.data(), an, n, block, s, total);
    }
  } else {
    std::vector<PairAccum> parts(threads);
#pragma omp parallel num_threads(threads)
    {
      const int tid = omp_get_thread_num();
      auto& acc = parts[tid];
      acc.num.assign(n_latents, 0.0);
      acc.den.assign(n_latents, 0.0);
      std::vector<double> s(block);
      // Round-robin anchors: balanced despite the shrinking inner range, and
      // a fixed assignment for a given thread count.
#pragma omp for schedule(static, 1)
      for (std::size_t n = 0; n < n_samples; ++n) {
        pairwise_anchor(h.data(), an, n, block, s, acc);
      }
    }
    for (const auto& acc : parts) {
      for (std::size_t k = 0; k < n_latents; ++k) {
        total.num[k] += acc.num[k];
        total.den[k] += acc.den[k];
      }
    }
  }
  return scores_from_ratios(total.num, total.den, cfg.epsilon_den);
}

LatentScores monoscore_linear(const FeatureMatrix& h, const ActivationMatrix& a,
                              const MonoScoreConfig& cfg, int threads) {
  check_paired(h, a);
  const ActivationMatrix normalized = a.normalized() ? a : minmax_normalize(a);
  MonoStats stats = MonoStats::zeros(a.n_latents(), h.dim());
  accumulate_range(stats, h.data(), normalized.data(), 0, h.n_samples(),
                   std::max(threads, 1));
  return finalize_scores(stats, cfg);
}

double mean_active_score(const LatentScores& scores) {
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t k = 0; k < scores.n_latents(); ++k) {
    if (scores.active[k]) {
      sum += scores.scores[k];
      ++count;
    }
  }
  return count > 0 ? sum / static_cast<double>(count) : 0.0;
}

void write_scores_csv(const std::string& path, const LatentScores& scores) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << "latent_index,monoscore,active\n";
  char buf[32];
  for (std::size_t k = 0; k < scores.n_latents(); ++k) {
    std::snprintf(buf, sizeof(buf), "%.17g", scores.scores[k]);
    out << k << ',' << buf << ',' << (scores.active[k] ? "true" : "false") << '\n';
  }
  if (!out) throw IoError("failed writing " + path);
}

void write_scores_json(const std::string& path, const LatentScores& scores,
                       const ScoreMeta& meta) {
  std::size_t active_count = 0;
  for (auto f : scores.active) active_count += f;
  nlohmann::json j{
      {"algorithm", meta.algorithm},
      {"n_samples", meta.n_samples},
      {"n_latents", meta.n_latents},
      {"dim", meta.dim},
      {"epsilon_den", meta.epsilon_den},
      {"threads", meta.threads},
      {"active_count", active_count},
      {"mean_monoscore_active", mean_active_score(scores)},
      {"scores", scores.scores},
      {"active", std::vector<bool>(scores.active.begin(), scores.active.end())},
  };
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << j.dump(2) << '\n';
  if (!out) throw IoError("failed writing " + path);
}

}  // namespace monosema
