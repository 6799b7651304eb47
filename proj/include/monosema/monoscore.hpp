#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "monosema/core.hpp"

namespace monosema {

struct MonoScoreConfig {
  /// Denominators at or below this threshold mark a latent inactive.
  double epsilon_den = 1e-12;
  /// Inner-loop block size for the pairwise path.
  std::size_t pair_block = 256;
  /// Streaming chunk size for the linear path.
  std::size_t batch_size = 1024;
};

/// Per-latent activation extrema from a reference dataset.
struct ActivationExtrema {
  std::vector<double> min;
  std::vector<double> max;
};

ActivationExtrema activation_extrema(const ActivationMatrix& raw);

/// Per-latent min-max rescaling into [0, 1]. A constant row (max == min) maps
/// to all zeros, which renders the latent inactive downstream.
ActivationMatrix minmax_normalize(const ActivationMatrix& raw);

/// Rescales against stored extrema instead of recomputing them. With `clamp`
/// the result is clipped into [0, 1]; without it, values outside the stored
/// range stay outside [0, 1] and the normalized flag is set only if the data
/// happens to fall inside.
ActivationMatrix minmax_normalize(const ActivationMatrix& raw,
                                  const ActivationExtrema& extrema, bool clamp);

/// Folds a batch into `stats`, sample by sample in ascending order, so that
/// chunked accumulation over consecutive batches is bit-identical to a single
/// accumulation over the concatenated data. `a_batch` must be normalized with
/// dataset-global extrema when the result is used for full-dataset scoring.
void accumulate_stats(MonoStats& stats, const FeatureMatrix& h_batch,
                      const ActivationMatrix& a_batch);

/// Splits samples into `n_shards` contiguous ranges, accumulates a private
/// MonoStats per shard (in parallel when threads > 1), and merges them in
/// shard order. Matches serial accumulation within 1e-10 relative.
MonoStats build_stats_sharded(const FeatureMatrix& h, const ActivationMatrix& a_normalized,
                              std::size_t n_shards, int threads);

/// Turns accumulated statistics into scores:
///   num_k = (|w_k|^2 - v_k) / 2,  den_k = (u_k^2 - v_k) / 2,
///   score_k = num_k / den_k when den_k > epsilon_den, else 0.
LatentScores finalize_scores(const MonoStats& stats, const MonoScoreConfig& cfg);

/// Reference pairwise score: for every latent, the co-activation-weighted
/// mean cosine similarity over all unordered sample pairs. O(N^2 (d + M)).
/// threads > 1 distributes anchor rows across OpenMP threads with private
/// accumulators merged in thread order.
LatentScores monoscore_pairwise(const FeatureMatrix& h, const ActivationMatrix& a,
                                const MonoScoreConfig& cfg, int threads = 1);

/// Single-pass score via MonoStats, O(N d M); exactly equivalent to the
/// pairwise path. Two passes over the data when normalization is needed (one
/// for extrema, one for statistics). threads > 1 parallelizes over latents
/// and is bit-identical to the serial kernel.
LatentScores monoscore_linear(const FeatureMatrix& h, const ActivationMatrix& a,
                              const MonoScoreConfig& cfg, int threads = 1);

struct ScoreMeta {
  std::string algorithm;
  std::size_t n_samples = 0;
  std::size_t n_latents = 0;
  std::size_t dim = 0;
  double epsilon_den = 0.0;
  int threads = 1;
};

double mean_active_score(const LatentScores& scores);

/// CSV with fixed header "latent_index,monoscore,active".
void write_scores_csv(const std::string& path, const LatentScores& scores);
void write_scores_json(const std::string& path, const LatentScores& scores,
                       const ScoreMeta& meta);

}  // namespace monosema
