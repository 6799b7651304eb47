#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "monosema/core.hpp"
#include "monosema/matrix.hpp"
#include "monosema/rng.hpp"

namespace monosema {

enum class SaeArch : std::uint8_t { topk = 0, batchtopk = 1, relu = 2, jumprelu = 3 };

SaeArch parse_arch(const std::string& name);
const char* arch_name(SaeArch arch);

/// Linear encoder/decoder pair with per-architecture extras. The decoder is
/// stored atom-major: row k of `w_dec` is dictionary atom k (the transpose of
/// the conventional d x M view), so unit-norm constraints and projections act
/// on contiguous rows. Tied models keep w_dec elementwise equal to w_enc.
struct SaeModel {
  SaeArch arch = SaeArch::topk;
  bool tied = false;
  std::size_t n_latents = 0;
  std::size_t dim = 0;
  std::size_t k_active = 0;  // topk/batchtopk selection width
  Matrix w_enc;                             // M x d
  std::vector<double> b_enc;                // M
  Matrix w_dec;                             // M x d, one atom per row
  std::vector<double> b_dec;                // d
  std::vector<double> log_thresholds;       // M, jumprelu only
  std::vector<std::uint64_t> dead_steps;    // M, topk only, counted in examples
};

struct TrainConfig {
  SaeArch arch = SaeArch::topk;
  std::size_t n_latents = 8192;
  std::size_t k_active = 64;
  double l1_coeff = 1e-4;             // vanilla relu sparsity penalty
  double jump_sparsity_coeff = 1e-3;  // jumprelu L0-surrogate coefficient
  double bandwidth = 1e-3;            // jumprelu pseudo-derivative width
  double lambda_mono = 0.0;
  double epsilon_den = 1e-12;
  double lr = 1e-4;
  double adam_eps = 6.25e-10;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double clip_norm = 1.0;  // 0 disables clipping
  std::size_t batch_size = 2048;
  std::size_t epochs = 50;
  std::size_t dead_threshold_examples = 0;  // 0 resolves to 10 * batch_size
  std::uint64_t seed = 42;
  bool tied = false;

  void validate() const;
};

struct EpochStats {
  double recon = 0.0;
  double sparsity = 0.0;
  double mono = 0.0;  // lambda-scaled contribution, 0 when lambda == 0
  double wall_seconds = 0.0;
};

struct TrainReport {
  std::vector<EpochStats> epochs;
  double final_r2 = 0.0;
  double final_mean_monoscore = 0.0;  // over active latents
  std::size_t dead_latents = 0;       // latents never positive on the dataset
  bool aborted = false;
  std::string abort_reason;
};

SaeModel init_model(const TrainConfig& cfg, std::size_t dim, Rng& rng);

/// Pre-activations z = W_enc (x - b_dec) + b_enc followed by the
/// architecture nonlinearity. x is B x d with unit-norm rows; result M x B.
Matrix encode(const SaeModel& model, const Matrix& x);

/// x_hat = W_dec a + b_dec, B x d.
Matrix decode(const SaeModel& model, const Matrix& a);

/// Keeps the k largest ReLU values per column; ties prefer the lower latent
/// index. Entries that are not strictly positive never survive.
Matrix apply_topk(const Matrix& z, std::size_t k);

/// Keeps the k*B largest ReLU values across the whole batch matrix; ties
/// prefer the lower flattened (latent, sample) index.
Matrix apply_batchtopk(const Matrix& z, std::size_t k);

/// a = ReLU(z) gated by ReLU(z) > tau_k with tau_k = exp(log_thresholds[k]).
Matrix apply_jumprelu(const Matrix& z, const std::vector<double>& log_thresholds);

struct SaeLosses {
  double recon = 0.0;
  double sparsity = 0.0;
  double mono = 0.0;  // lambda * L_mono
  double total = 0.0;
};

SaeLosses sae_loss(const SaeModel& model, const Matrix& x, const TrainConfig& cfg);

struct SaeGradients {
  Matrix w_enc;
  std::vector<double> b_enc;
  Matrix w_dec;  // unused (empty) for tied models
  std::vector<double> b_dec;
  std::vector<double> log_thresholds;  // empty unless jumprelu
  SaeLosses losses;
  Matrix activations;  // M x B forward activations of the batch
};

/// Forward pass plus analytic gradients of the full objective
/// recon + sparsity + lambda * mono for every parameter group.
SaeGradients sae_backward(const SaeModel& model, const Matrix& x, const TrainConfig& cfg);

struct AdamState {
  Matrix m_w_enc, v_w_enc;
  std::vector<double> m_b_enc, v_b_enc;
  Matrix m_w_dec, v_w_dec;
  std::vector<double> m_b_dec, v_b_dec;
  std::vector<double> m_log_t, v_log_t;
  std::uint64_t step = 0;

  static AdamState zeros(const SaeModel& model);
};

/// Global-norm clip, decoder-column gradient projection (untied), Adam with
/// bias correction, then decoder renormalization to unit atoms (untied).
void optimizer_step(SaeModel& model, AdamState& adam, SaeGradients& grads,
                    const TrainConfig& cfg);

/// TopK dead-latent bookkeeping: counters grow by the batch size in examples,
/// reset on firing; a latent past the threshold is reinitialized from the
/// normalized residual of a high-error batch sample, with its optimizer
/// moments cleared. No-op for other architectures.
void handle_dead_latents(SaeModel& model, AdamState& adam, const TrainConfig& cfg,
                         const Matrix& x_batch, const Matrix& a_batch);

struct TrainResult {
  SaeModel model;
  TrainReport report;
};

/// Full training loop: seeded shuffle, batches, analytic backward, optimizer
/// step, dead-latent handling, then a final evaluation pass (R^2, mean
/// MonoScore, dead-latent count). Deterministic for a fixed seed.
TrainResult train(const FeatureMatrix& data, const TrainConfig& cfg);

/// Binary checkpoint: magic "SAEM", version byte, arch id, tied flag, dims,
/// an embedded JSON config blob, then parameter blobs as little-endian f64 in
/// declared order (w_enc, b_enc, w_dec atom-major, b_dec, log_thresholds for
/// jumprelu).
void save_checkpoint(const std::string& path, const SaeModel& model,
                     const std::string& config_json);

struct Checkpoint {
  SaeModel model;
  std::string config_json;
};

Checkpoint load_checkpoint(const std::string& path);

std::string train_config_json(const TrainConfig& cfg);

}  // namespace monosema
