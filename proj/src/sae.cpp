#include "monosema/sae.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "monosema/errors.hpp"
#include "monosema/metrics.hpp"
#include "monosema/monoloss.hpp"
#include "monosema/monoscore.hpp"

namespace monosema {

SaeArch parse_arch(const std::string& name) {
  if (name == "topk") return SaeArch::topk;
  if (name == "batchtopk") return SaeArch::batchtopk;
  if (name == "relu") return SaeArch::relu;
  if (name == "jumprelu") return SaeArch::jumprelu;
  throw ConfigError("unknown architecture '" + name +
                    "' (expected topk|batchtopk|relu|jumprelu)");
}

const char* arch_name(SaeArch arch) {
  switch (arch) {
    case SaeArch::topk: return "topk";
    case SaeArch::batchtopk: return "batchtopk";
    case SaeArch::relu: return "relu";
    case SaeArch::jumprelu: return "jumprelu";
  }
  return "?";
}

void TrainConfig::validate() const {
  if (n_latents < 1) throw ConfigError("n_latents must be >= 1");
  if (k_active < 1 || k_active > n_latents) {
    throw ConfigError("k_active must be in [1, n_latents]");
  }
  if (l1_coeff < 0 || jump_sparsity_coeff < 0 || lambda_mono < 0 || clip_norm < 0 ||
      lr < 0) {
    throw ConfigError("coefficients must be >= 0");
  }
  if (bandwidth <= 0) throw ConfigError("bandwidth must be > 0");
  if (adam_eps <= 0) throw ConfigError("adam_eps must be > 0");
  if (epsilon_den <= 0) throw ConfigError("epsilon_den must be > 0");
  if (batch_size < 2) throw ConfigError("batch_size must be >= 2");
}

SaeModel init_model(const TrainConfig& cfg, std::size_t dim, Rng& rng) {
  SaeModel m;
  m.arch = cfg.arch;
  m.tied = cfg.tied;
  m.n_latents = cfg.n_latents;
  m.dim = dim;
  m.k_active = cfg.k_active;
  m.w_enc = Matrix(cfg.n_latents, dim);
  const double scale = 1.0 / std::sqrt(static_cast<double>(dim));
  for (double& x : m.w_enc.storage()) x = rng.uniform(-scale, scale);
  m.b_enc.assign(cfg.n_latents, 0.0);
  m.w_dec = m.w_enc;
  if (!m.tied) {
    for (std::size_t k = 0; k < cfg.n_latents; ++k) {
      auto atom = m.w_dec.row(k);
      const double norm = std::sqrt(squared_norm(atom));
      if (norm < 1e-12) throw NumericalError("degenerate decoder atom at init");
      for (double& x : atom) x /= norm;
    }
  }
  m.b_dec.assign(dim, 0.0);
  if (cfg.arch == SaeArch::jumprelu) {
    m.log_thresholds.assign(cfg.n_latents, std::log(1e-3));
  }
  if (cfg.arch == SaeArch::topk) {
    m.dead_steps.assign(cfg.n_latents, 0);
  }
  return m;
}

namespace {

struct KeepEntry {
  double value;
  std::size_t index;  // flattened latent-major position
};

// Larger value first; equal values prefer the lower flattened index.
bool keep_order(const KeepEntry& a, const KeepEntry& b) {
  if (a.value != b.value) return a.value > b.value;
  return a.index < b.index;
}

}  // namespace

Matrix apply_topk(const Matrix& z, std::size_t k) {
  Matrix a(z.rows(), z.cols(), 0.0);
  std::vector<KeepEntry> pool;
  for (std::size_t n = 0; n < z.cols(); ++n) {
    pool.clear();
    for (std::size_t kk = 0; kk < z.rows(); ++kk) {
      const double v = z(kk, n);
      if (v > 0.0) pool.push_back({v, kk * z.cols() + n});
    }
    if (pool.size() > k) {
      std::nth_element(pool.begin(), pool.begin() + k, pool.end(), keep_order);
      pool.resize(k);
    }
    for (const auto& e : pool) a.storage()[e.index] = e.value;
  }
  return a;
}

Matrix apply_batchtopk(const Matrix& z, std::size_t k) {
  Matrix a(z.rows(), z.cols(), 0.0);
  std::vector<KeepEntry> pool;
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double v = z.storage()[i];
    if (v > 0.0) pool.push_back({v, i});
  }
  const std::size_t quota = k * z.cols();
  if (pool.size() > quota) {
    std::nth_element(pool.begin(), pool.begin() + quota, pool.end(), keep_order);
    pool.resize(quota);
  }
  for (const auto& e : pool) a.storage()[e.index] = e.value;
  return a;
}

Matrix apply_jumprelu(const Matrix& z, const std::vector<double>& log_thresholds) {
  if (log_thresholds.size() != z.rows()) {
    throw DimensionError("threshold count does not match latent count");
  }
  Matrix a(z.rows(), z.cols(), 0.0);
  for (std::size_t k = 0; k < z.rows(); ++k) {
    const double tau = std::exp(log_thresholds[k]);
    for (std::size_t n = 0; n < z.cols(); ++n) {
      const double r = std::max(z(k, n), 0.0);
      if (r > tau) a(k, n) = r;
    }
  }
  return a;
}

Matrix decode(const SaeModel& model, const Matrix& a) {
  if (a.rows() != model.n_latents) throw DimensionError("latent count mismatch in decode");
  const std::size_t batch = a.cols();
  Matrix xhat(batch, model.dim);
  for (std::size_t n = 0; n < batch; ++n) {
    auto row = xhat.row(n);
    for (std::size_t j = 0; j < model.dim; ++j) row[j] = model.b_dec[j];
    for (std::size_t k = 0; k < model.n_latents; ++k) {
      const double akn = a(k, n);
      if (akn != 0.0) axpy(akn, model.w_dec.row(k), row);
    }
  }
  return xhat;
}

namespace {

struct Forward {
  Matrix xc;    // B x d encoder input, x - b_dec
  Matrix z;     // M x B pre-activations
  Matrix a;     // M x B activations
  Matrix mask;  // M x B, 1 where gradients pass from a to z
  Matrix xhat;  // B x d
};

Forward run_forward(const SaeModel& model, const Matrix& x) {
  const std::size_t batch = x.rows();
  const std::size_t dim = x.cols();
  const std::size_t n_latents = model.n_latents;
  if (dim != model.dim) throw DimensionError("input dim does not match model");

  Forward f;
  f.xc = x;
  for (std::size_t n = 0; n < batch; ++n) {
    auto row = f.xc.row(n);
    for (std::size_t j = 0; j < dim; ++j) row[j] -= model.b_dec[j];
  }

  f.z = Matrix(n_latents, batch);
  for (std::size_t k = 0; k < n_latents; ++k) {
    auto wk = model.w_enc.row(k);
    for (std::size_t n = 0; n < batch; ++n) {
      f.z(k, n) = dot(wk, f.xc.row(n)) + model.b_enc[k];
    }
  }

  f.mask = Matrix(n_latents, batch, 0.0);
  switch (model.arch) {
    case SaeArch::relu: {
      f.a = Matrix(n_latents, batch, 0.0);
      for (std::size_t i = 0; i < f.z.size(); ++i) {
        if (f.z.storage()[i] > 0.0) {
          f.a.storage()[i] = f.z.storage()[i];
          f.mask.storage()[i] = 1.0;
        }
      }
      break;
    }
    case SaeArch::topk:
    case SaeArch::batchtopk: {
      if (model.k_active < 1 || model.k_active > n_latents) {
        throw ConfigError("model k_active out of range");
      }
      f.a = model.arch == SaeArch::topk ? apply_topk(f.z, model.k_active)
                                        : apply_batchtopk(f.z, model.k_active);
      for (std::size_t i = 0; i < f.a.size(); ++i) {
        if (f.a.storage()[i] > 0.0) f.mask.storage()[i] = 1.0;
      }
      break;
    }
    case SaeArch::jumprelu: {
      f.a = Matrix(n_latents, batch, 0.0);
      for (std::size_t k = 0; k < n_latents; ++k) {
        const double tau = std::exp(model.log_thresholds[k]);
        for (std::size_t n = 0; n < batch; ++n) {
          const double r = std::max(f.z(k, n), 0.0);
          if (r > tau) {
            f.a(k, n) = r;
            f.mask(k, n) = 1.0;
          }
        }
      }
      break;
    }
  }
  f.xhat = decode(model, f.a);
  return f;
}

double mean_squared_error(const Matrix& x, const Matrix& xhat) {
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double e = xhat.storage()[i] - x.storage()[i];
    acc += e * e;
  }
  return acc / static_cast<double>(x.size());
}

double sparsity_term(const SaeModel& model, const Forward& f, const TrainConfig& cfg) {
  const double batch = static_cast<double>(f.a.cols());
  switch (model.arch) {
    case SaeArch::relu: {
      double l1 = 0.0;
      for (double v : f.a.storage()) l1 += std::abs(v);
      return cfg.l1_coeff * l1 / batch;
    }
    case SaeArch::jumprelu: {
      // Expected-L0 surrogate: mean open-gate count per sample.
      double gates = 0.0;
      for (double g : f.mask.storage()) gates += g;
      return cfg.jump_sparsity_coeff * gates / batch;
    }
    default:
      return 0.0;
  }
}

}  // namespace

Matrix encode(const SaeModel& model, const Matrix& x) { return run_forward(model, x).a; }

SaeLosses sae_loss(const SaeModel& model, const Matrix& x, const TrainConfig& cfg) {
  const Forward f = run_forward(model, x);
  SaeLosses losses;
  losses.recon = mean_squared_error(x, f.xhat);
  losses.sparsity = sparsity_term(model, f, cfg);
  if (cfg.lambda_mono > 0.0) {
    MonoLossConfig mcfg{cfg.lambda_mono, cfg.epsilon_den};
    losses.mono = cfg.lambda_mono * monoloss_eval(x, f.a, mcfg, false).loss;
  }
  losses.total = losses.recon + losses.sparsity + losses.mono;
  return losses;
}

SaeGradients sae_backward(const SaeModel& model, const Matrix& x, const TrainConfig& cfg) {
  const std::size_t batch = x.rows();
  const std::size_t dim = x.cols();
  const std::size_t n_latents = model.n_latents;
  const Forward f = run_forward(model, x);

  SaeGradients g;
  g.w_enc = Matrix(n_latents, dim, 0.0);
  g.b_enc.assign(n_latents, 0.0);
  if (!model.tied) g.w_dec = Matrix(n_latents, dim, 0.0);
  g.b_dec.assign(dim, 0.0);
  if (model.arch == SaeArch::jumprelu) g.log_thresholds.assign(n_latents, 0.0);

  g.losses.recon = mean_squared_error(x, f.xhat);
  g.losses.sparsity = sparsity_term(model, f, cfg);

  // dL_recon/dxhat
  Matrix r(batch, dim);
  const double recon_scale = 2.0 / static_cast<double>(batch * dim);
  for (std::size_t i = 0; i < r.size(); ++i) {
    r.storage()[i] = recon_scale * (f.xhat.storage()[i] - x.storage()[i]);
  }

  // dL/da: reconstruction, vanilla L1 subgradient, and the mono term. The
  // mono gradient is taken with respect to the raw activations, which is
  // exactly what f.a holds.
  Matrix da(n_latents, batch, 0.0);
  for (std::size_t k = 0; k < n_latents; ++k) {
    auto atom = model.w_dec.row(k);
    for (std::size_t n = 0; n < batch; ++n) {
      da(k, n) = dot(r.row(n), atom);
    }
  }
  if (model.arch == SaeArch::relu && cfg.l1_coeff > 0.0) {
    const double per = cfg.l1_coeff / static_cast<double>(batch);
    for (std::size_t i = 0; i < da.size(); ++i) {
      if (f.a.storage()[i] > 0.0) da.storage()[i] += per;
    }
  }
  if (cfg.lambda_mono > 0.0) {
    MonoLossConfig mcfg{cfg.lambda_mono, cfg.epsilon_den};
    MonoLossOutput mono = monoloss_eval(x, f.a, mcfg, true);
    g.losses.mono = cfg.lambda_mono * mono.loss;
    for (std::size_t i = 0; i < da.size(); ++i) {
      da.storage()[i] += cfg.lambda_mono * mono.grad_activations.storage()[i];
    }
  }
  g.losses.total = g.losses.recon + g.losses.sparsity + g.losses.mono;

  // Decoder gradients from reconstruction: dW_dec[k] = sum_n a_kn r_n.
  // Tied models fold this into the encoder gradient (same layout).
  Matrix& dw_dec = model.tied ? g.w_enc : g.w_dec;
  for (std::size_t k = 0; k < n_latents; ++k) {
    auto out = dw_dec.row(k);
    for (std::size_t n = 0; n < batch; ++n) {
      const double akn = f.a(k, n);
      if (akn != 0.0) axpy(akn, r.row(n), out);
    }
  }

  // JumpReLU thresholds: rectangle pseudo-derivative of width `bandwidth`
  // centered at tau, applied to both the activation value (jump height tau)
  // and the L0 surrogate, chained through dtau/dlog_t = tau.
  if (model.arch == SaeArch::jumprelu) {
    const double half_band = 0.5 * cfg.bandwidth;
    const double l0_coef = cfg.jump_sparsity_coeff / static_cast<double>(batch);
    for (std::size_t k = 0; k < n_latents; ++k) {
      const double tau = std::exp(model.log_thresholds[k]);
      double dtau = 0.0;
      for (std::size_t n = 0; n < batch; ++n) {
        const double rr = std::max(f.z(k, n), 0.0);
        if (std::abs(rr - tau) < half_band) {
          dtau -= (da(k, n) * tau + l0_coef) / cfg.bandwidth;
        }
      }
      g.log_thresholds[k] = dtau * tau;
    }
  }

  // Through the activation gate into z, then the encoder parameters.
  Matrix dz(n_latents, batch);
  for (std::size_t i = 0; i < dz.size(); ++i) {
    dz.storage()[i] = da.storage()[i] * f.mask.storage()[i];
  }
  Matrix dxc(batch, dim, 0.0);
  for (std::size_t k = 0; k < n_latents; ++k) {
    auto wrow = g.w_enc.row(k);
    auto enc_row = model.w_enc.row(k);
    double db = 0.0;
    for (std::size_t n = 0; n < batch; ++n) {
      const double d = dz(k, n);
      if (d != 0.0) {
        axpy(d, f.xc.row(n), wrow);
        axpy(d, enc_row, dxc.row(n));
        db += d;
      }
    }
    g.b_enc[k] = db;
  }

  // b_dec feeds the decoder output (+r) and the encoder input (-dxc).
  for (std::size_t n = 0; n < batch; ++n) {
    for (std::size_t j = 0; j < dim; ++j) {
      g.b_dec[j] += r(n, j) - dxc(n, j);
    }
  }

  g.activations = f.a;
  return g;
}

AdamState AdamState::zeros(const SaeModel& model) {
  AdamState s;
  s.m_w_enc = Matrix(model.n_latents, model.dim, 0.0);
  s.v_w_enc = s.m_w_enc;
  s.m_b_enc.assign(model.n_latents, 0.0);
  s.v_b_enc.assign(model.n_latents, 0.0);
  if (!model.tied) {
    s.m_w_dec = Matrix(model.n_latents, model.dim, 0.0);
    s.v_w_dec = s.m_w_dec;
  }
  s.m_b_dec.assign(model.dim, 0.0);
  s.v_b_dec.assign(model.dim, 0.0);
  if (model.arch == SaeArch::jumprelu) {
    s.m_log_t.assign(model.n_latents, 0.0);
    s.v_log_t.assign(model.n_latents, 0.0);
  }
  return s;
}

namespace {

void check_finite(std::span<const double> g) {
  for (double x : g) {
    if (!std::isfinite(x)) throw NumericalError("non-finite gradient");
  }
}

void adam_update(std::span<double> p, std::span<const double> g, std::span<double> m,
                 std::span<double> v, const TrainConfig& cfg, double bc1, double bc2) {
  for (std::size_t i = 0; i < p.size(); ++i) {
    m[i] = cfg.adam_beta1 * m[i] + (1.0 - cfg.adam_beta1) * g[i];
    v[i] = cfg.adam_beta2 * v[i] + (1.0 - cfg.adam_beta2) * g[i] * g[i];
    const double mhat = m[i] / bc1;
    const double vhat = v[i] / bc2;
    p[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.adam_eps);
  }
}

void scale_all(std::span<double> g, double s) {
  for (double& x : g) x *= s;
}

}  // namespace

void optimizer_step(SaeModel& model, AdamState& adam, SaeGradients& grads,
                    const TrainConfig& cfg) {
  const bool has_dec = !model.tied;
  const bool has_log_t = model.arch == SaeArch::jumprelu;

  check_finite(grads.w_enc.storage());
  check_finite(grads.b_enc);
  if (has_dec) check_finite(grads.w_dec.storage());
  check_finite(grads.b_dec);
  if (has_log_t) check_finite(grads.log_thresholds);

  // 1. Global-norm clip across all parameter groups.
  if (cfg.clip_norm > 0.0) {
    double sq = squared_norm(grads.w_enc.storage());
    sq += squared_norm(grads.b_enc);
    if (has_dec) sq += squared_norm(grads.w_dec.storage());
    sq += squared_norm(grads.b_dec);
    if (has_log_t) sq += squared_norm(grads.log_thresholds);
    const double norm = std::sqrt(sq);
    if (norm > cfg.clip_norm) {
      const double s = cfg.clip_norm / norm;
      scale_all(grads.w_enc.storage(), s);
      scale_all(grads.b_enc, s);
      if (has_dec) scale_all(grads.w_dec.storage(), s);
      scale_all(grads.b_dec, s);
      if (has_log_t) scale_all(grads.log_thresholds, s);
    }
  }

  // 2. Project decoder gradients orthogonal to their atoms so the update
  // cannot change atom norms to first order.
  if (has_dec) {
    for (std::size_t k = 0; k < model.n_latents; ++k) {
      auto atom = model.w_dec.row(k);
      auto gk = grads.w_dec.row(k);
      const double denom = squared_norm(atom);
      if (denom > 0.0) {
        const double coef = dot(gk, atom) / denom;
        for (std::size_t j = 0; j < gk.size(); ++j) gk[j] -= coef * atom[j];
      }
    }
  }

  // 3. Adam with bias correction.
  adam.step += 1;
  const double bc1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(adam.step));
  const double bc2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(adam.step));
  adam_update(model.w_enc.storage(), grads.w_enc.storage(), adam.m_w_enc.storage(),
              adam.v_w_enc.storage(), cfg, bc1, bc2);
  adam_update(model.b_enc, grads.b_enc, adam.m_b_enc, adam.v_b_enc, cfg, bc1, bc2);
  if (has_dec) {
    adam_update(model.w_dec.storage(), grads.w_dec.storage(), adam.m_w_dec.storage(),
                adam.v_w_dec.storage(), cfg, bc1, bc2);
  }
  adam_update(model.b_dec, grads.b_dec, adam.m_b_dec, adam.v_b_dec, cfg, bc1, bc2);
  if (has_log_t) {
    adam_update(model.log_thresholds, grads.log_thresholds, adam.m_log_t, adam.v_log_t,
                cfg, bc1, bc2);
  }

  // 4. Restore unit decoder atoms; tied models mirror the encoder instead.
  if (has_dec) {
    for (std::size_t k = 0; k < model.n_latents; ++k) {
      auto atom = model.w_dec.row(k);
      const double norm = std::sqrt(squared_norm(atom));
      if (norm < 1e-12) throw NumericalError("decoder atom collapsed to zero");
      for (double& x : atom) x /= norm;
    }
  } else {
    model.w_dec = model.w_enc;
  }
}

void handle_dead_latents(SaeModel& model, AdamState& adam, const TrainConfig& cfg,
                         const Matrix& x_batch, const Matrix& a_batch) {
  if (model.arch != SaeArch::topk) return;
  const std::size_t batch = a_batch.cols();
  for (std::size_t k = 0; k < model.n_latents; ++k) {
    bool fired = false;
    for (std::size_t n = 0; n < batch && !fired; ++n) fired = a_batch(k, n) > 0.0;
    if (fired) {
      model.dead_steps[k] = 0;
    } else {
      model.dead_steps[k] += batch;
    }
  }
  const std::uint64_t threshold = cfg.dead_threshold_examples > 0
                                      ? cfg.dead_threshold_examples
                                      : 10 * cfg.batch_size;
  std::vector<std::size_t> dead;
  for (std::size_t k = 0; k < model.n_latents; ++k) {
    if (model.dead_steps[k] > threshold) dead.push_back(k);
  }
  if (dead.empty()) return;

  // Residuals under the current weights; the worst-reconstructed samples seed
  // the revived latents, ranked so multiple revivals get distinct directions.
  const Matrix a_cur = run_forward(model, x_batch).a;
  const Matrix xhat = decode(model, a_cur);
  Matrix resid(batch, model.dim);
  std::vector<std::pair<double, std::size_t>> errors(batch);
  for (std::size_t n = 0; n < batch; ++n) {
    auto rr = resid.row(n);
    for (std::size_t j = 0; j < model.dim; ++j) rr[j] = x_batch(n, j) - xhat(n, j);
    errors[n] = {squared_norm(rr), n};
  }
  std::stable_sort(errors.begin(), errors.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });

  for (std::size_t i = 0; i < dead.size(); ++i) {
    const std::size_t k = dead[i];
    const auto [err, n] = errors[i % batch];
    const double norm = std::sqrt(err);
    if (norm < 1e-12) {
      model.dead_steps[k] = 0;  // perfect reconstruction, nothing to seed from
      continue;
    }
    auto dir = resid.row(n);
    for (std::size_t j = 0; j < model.dim; ++j) {
      model.w_enc(k, j) = dir[j] / norm;
      model.w_dec(k, j) = dir[j] / norm;
      adam.m_w_enc(k, j) = 0.0;
      adam.v_w_enc(k, j) = 0.0;
      if (!model.tied) {
        adam.m_w_dec(k, j) = 0.0;
        adam.v_w_dec(k, j) = 0.0;
      }
    }
    model.b_enc[k] = 0.0;
    adam.m_b_enc[k] = 0.0;
    adam.v_b_enc[k] = 0.0;
    model.dead_steps[k] = 0;
  }
}

namespace {

Matrix gather_rows(const FeatureMatrix& data, const std::vector<std::size_t>& indices,
                   std::size_t start, std::size_t count) {
  Matrix out(count, data.dim());
  for (std::size_t i = 0; i < count; ++i) {
    auto src = data.row(indices[start + i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

}  // namespace

TrainResult train(const FeatureMatrix& data, const TrainConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  TrainResult result{init_model(cfg, data.dim(), rng), {}};
  SaeModel& model = result.model;
  TrainReport& report = result.report;
  AdamState adam = AdamState::zeros(model);

  const std::size_t n = data.n_samples();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    rng.shuffle(order);
    EpochStats stats;
    std::size_t n_batches = 0;
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t count = std::min(cfg.batch_size, n - start);
      if (count < 2) break;  // a single-sample tail cannot form a batch
      const Matrix x = gather_rows(data, order, start, count);
      SaeGradients grads = sae_backward(model, x, cfg);
      if (!std::isfinite(grads.losses.total)) {
        report.aborted = true;
        report.abort_reason = "non-finite loss at epoch " + std::to_string(epoch) +
                              " (recon=" + std::to_string(grads.losses.recon) +
                              ", sparsity=" + std::to_string(grads.losses.sparsity) +
                              ", mono=" + std::to_string(grads.losses.mono) + ")";
        return result;
      }
      try {
        optimizer_step(model, adam, grads, cfg);
      } catch (const NumericalError& e) {
        report.aborted = true;
        report.abort_reason = e.what();
        return result;
      }
      if (model.arch == SaeArch::topk) {
        handle_dead_latents(model, adam, cfg, x, grads.activations);
      }
      stats.recon += grads.losses.recon;
      stats.sparsity += grads.losses.sparsity;
      stats.mono += grads.losses.mono;
      ++n_batches;
    }
    if (n_batches > 0) {
      stats.recon /= static_cast<double>(n_batches);
      stats.sparsity /= static_cast<double>(n_batches);
      stats.mono /= static_cast<double>(n_batches);
    }
    stats.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    report.epochs.push_back(stats);
  }

  // Final evaluation pass: dataset R^2, mean MonoScore over active latents,
  // and latents that never fire.
  Matrix activations(model.n_latents, n, 0.0);
  R2Accumulator r2(data.dim());
  for (std::size_t start = 0; start < n; start += cfg.batch_size) {
    const std::size_t count = std::min(cfg.batch_size, n - start);
    Matrix x(count, data.dim());
    for (std::size_t i = 0; i < count; ++i) {
      auto src = data.row(start + i);
      std::copy(src.begin(), src.end(), x.row(i).begin());
    }
    const Matrix a = encode(model, x);
    r2.update(x, decode(model, a));
    for (std::size_t k = 0; k < model.n_latents; ++k) {
      for (std::size_t i = 0; i < count; ++i) activations(k, start + i) = a(k, i);
    }
  }
  if (n >= 2) report.final_r2 = r2.finalize().mean;
  MonoScoreConfig mcfg;
  mcfg.epsilon_den = cfg.epsilon_den;
  const LatentScores scores =
      monoscore_linear(data, ActivationMatrix(activations, false), mcfg);
  report.final_mean_monoscore = mean_active_score(scores);
  for (std::size_t k = 0; k < model.n_latents; ++k) {
    bool fired = false;
    for (std::size_t i = 0; i < n && !fired; ++i) fired = activations(k, i) > 0.0;
    if (!fired) ++report.dead_latents;
  }
  return result;
}

namespace {

void write_f64_blob(std::ofstream& out, std::span<const double> values) {
  out.write(reinterpret_cast<const char*>(values.data()),
            static_cast<std::streamsize>(values.size() * sizeof(double)));
}

void read_f64_blob(std::ifstream& in, std::span<double> values, const std::string& path) {
  in.read(reinterpret_cast<char*>(values.data()),
          static_cast<std::streamsize>(values.size() * sizeof(double)));
  if (!in) throw TruncatedPayload(path + ": checkpoint truncated");
}

constexpr char kCheckpointMagic[4] = {'S', 'A', 'E', 'M'};
constexpr std::uint8_t kCheckpointVersion = 1;

}  // namespace

void save_checkpoint(const std::string& path, const SaeModel& model,
                     const std::string& config_json) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out.write(kCheckpointMagic, 4);
  out.put(static_cast<char>(kCheckpointVersion));
  out.put(static_cast<char>(model.arch));
  out.put(model.tied ? 1 : 0);
  const std::uint64_t m = model.n_latents;
  const std::uint32_t d = static_cast<std::uint32_t>(model.dim);
  const std::uint32_t k = static_cast<std::uint32_t>(model.k_active);
  out.write(reinterpret_cast<const char*>(&m), sizeof(m));
  out.write(reinterpret_cast<const char*>(&d), sizeof(d));
  out.write(reinterpret_cast<const char*>(&k), sizeof(k));
  const auto json_len = static_cast<std::uint32_t>(config_json.size());
  out.write(reinterpret_cast<const char*>(&json_len), sizeof(json_len));
  out.write(config_json.data(), json_len);
  write_f64_blob(out, model.w_enc.storage());
  write_f64_blob(out, model.b_enc);
  write_f64_blob(out, model.w_dec.storage());
  write_f64_blob(out, model.b_dec);
  if (model.arch == SaeArch::jumprelu) write_f64_blob(out, model.log_thresholds);
  if (!out) throw IoError("failed writing " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  char magic[4] = {};
  in.read(magic, 4);
  if (in.gcount() != 4 || std::memcmp(magic, kCheckpointMagic, 4) != 0) {
    throw BadMagic(path + ": not a checkpoint file");
  }
  const int version = in.get();
  if (version != kCheckpointVersion) {
    throw IoError(path + ": unsupported checkpoint version");
  }
  const int arch_id = in.get();
  if (arch_id < 0 || arch_id > 3) throw IoError(path + ": bad architecture id");
  const int tied = in.get();
  std::uint64_t m = 0;
  std::uint32_t d = 0, k = 0;
  in.read(reinterpret_cast<char*>(&m), sizeof(m));
  in.read(reinterpret_cast<char*>(&d), sizeof(d));
  in.read(reinterpret_cast<char*>(&k), sizeof(k));
  std::uint32_t json_len = 0;
  in.read(reinterpret_cast<char*>(&json_len), sizeof(json_len));
  if (!in || m < 1 || d < 1) throw TruncatedPayload(path + ": checkpoint header truncated");
  Checkpoint cp;
  cp.config_json.resize(json_len);
  in.read(cp.config_json.data(), json_len);
  SaeModel& model = cp.model;
  model.arch = static_cast<SaeArch>(arch_id);
  model.tied = tied != 0;
  model.n_latents = m;
  model.dim = d;
  model.k_active = k;
  model.w_enc = Matrix(m, d);
  model.b_enc.assign(m, 0.0);
  model.w_dec = Matrix(m, d);
  model.b_dec.assign(d, 0.0);
  read_f64_blob(in, model.w_enc.storage(), path);
  read_f64_blob(in, model.b_enc, path);
  read_f64_blob(in, model.w_dec.storage(), path);
  read_f64_blob(in, model.b_dec, path);
  if (model.arch == SaeArch::jumprelu) {
    model.log_thresholds.assign(m, 0.0);
    read_f64_blob(in, model.log_thresholds, path);
  }
  if (model.arch == SaeArch::topk) model.dead_steps.assign(m, 0);
  return cp;
}

std::string train_config_json(const TrainConfig& cfg) {
  nlohmann::json j{
      {"arch", arch_name(cfg.arch)},
      {"n_latents", cfg.n_latents},
      {"k_active", cfg.k_active},
      {"l1_coeff", cfg.l1_coeff},
      {"jump_sparsity_coeff", cfg.jump_sparsity_coeff},
      {"bandwidth", cfg.bandwidth},
      {"lambda_mono", cfg.lambda_mono},
      {"epsilon_den", cfg.epsilon_den},
      {"lr", cfg.lr},
      {"adam_eps", cfg.adam_eps},
      {"adam_beta1", cfg.adam_beta1},
      {"adam_beta2", cfg.adam_beta2},
      {"clip_norm", cfg.clip_norm},
      {"batch_size", cfg.batch_size},
      {"epochs", cfg.epochs},
      {"dead_threshold_examples", cfg.dead_threshold_examples},
      {"seed", cfg.seed},
      {"tied", cfg.tied},
  };
  return j.dump();
}

}  // namespace monosema
