#pragma once

#include "monosema/core.hpp"

namespace monosema {

struct MonoLossConfig {
  /// Regularization strength; 0 contributes exactly nothing to any gradient.
  double lambda = 0.0;
  /// Inactive-denominator threshold, shared with scoring.
  double epsilon_den = 1e-12;
};

struct MonoLossOutput {
  /// 1 - mean batch score over active latents; exactly 1 when none is active.
  double loss = 1.0;
  /// d(loss)/d(raw activation), M x B. Empty unless the backward pass ran.
  /// Rows of latents inactive in the batch are all zero.
  Matrix grad_activations;
  std::size_t active_count = 0;
  /// Per-latent batch scores (the same quantity monoscore_linear would
  /// produce on the batch alone).
  LatentScores batch_scores;
};

/// Batch MonoLoss on raw activations: batch-local min-max normalization, then
/// the single-pass statistics, then 1 minus the mean score over latents whose
/// denominator exceeds epsilon_den.
MonoLossOutput monoloss_forward(const FeatureMatrix& h_batch,
                                const ActivationMatrix& a_batch,
                                const MonoLossConfig& cfg);

/// Forward plus the analytic gradient with respect to the raw activations.
/// Embeddings are constants; no gradient flows into h. The min-max chain uses
/// first-occurrence argmin/argmax, under which an extremal entry's derivative
/// with respect to itself cancels to zero.
MonoLossOutput monoloss_backward(const FeatureMatrix& h_batch,
                                 const ActivationMatrix& a_batch,
                                 const MonoLossConfig& cfg);

/// L = base + lambda * mono.loss. With lambda == 0 returns base untouched.
double total_loss(double base, const MonoLossOutput& mono, const MonoLossConfig& cfg);

/// Trusted-layout entry point used by the trainer: h rows are unit-norm
/// embeddings (B x d), a is raw latent-major (M x B).
MonoLossOutput monoloss_eval(const Matrix& h, const Matrix& a,
                             const MonoLossConfig& cfg, bool want_grad);

}  // namespace monosema
