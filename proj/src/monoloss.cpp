#include "monosema/monoloss.hpp"

#include <cmath>
#include <vector>

#include "monosema/errors.hpp"

namespace monosema {

namespace {

struct LatentExtrema {
  double lo = 0.0, hi = 0.0;
  std::size_t arg_lo = 0, arg_hi = 0;
};

// First occurrence wins at ties, so gradients at tied extrema are reproducible.
LatentExtrema row_extrema(const double* row, std::size_t n) {
  LatentExtrema e{row[0], row[0], 0, 0};
  for (std::size_t i = 1; i < n; ++i) {
    if (row[i] < e.lo) {
      e.lo = row[i];
      e.arg_lo = i;
    }
    if (row[i] > e.hi) {
      e.hi = row[i];
      e.arg_hi = i;
    }
  }
  return e;
}

}  // namespace

MonoLossOutput monoloss_eval(const Matrix& h, const Matrix& a,
                             const MonoLossConfig& cfg, bool want_grad) {
  const std::size_t batch = h.rows();
  const std::size_t dim = h.cols();
  const std::size_t n_latents = a.rows();
  if (a.cols() != batch) {
    throw DimensionError("activation batch width does not match feature batch");
  }

  MonoLossOutput out;
  out.batch_scores.scores.assign(n_latents, 0.0);
  out.batch_scores.active.assign(n_latents, 0);
  if (want_grad) out.grad_activations = Matrix(n_latents, batch, 0.0);

  std::vector<LatentExtrema> extrema(n_latents);
  Matrix a_norm(n_latents, batch, 0.0);
  std::vector<double> u(n_latents, 0.0), v(n_latents, 0.0);
  std::vector<double> num(n_latents, 0.0), den(n_latents, 0.0);
  Matrix w(n_latents, dim, 0.0);

  for (std::size_t k = 0; k < n_latents; ++k) {
    const double* ak = a.data() + k * batch;
    extrema[k] = row_extrema(ak, batch);
    const double range = extrema[k].hi - extrema[k].lo;
    if (!(range > 0.0)) continue;  // constant row stays all-zero, inactive
    double* nk = a_norm.data() + k * batch;
    double* wk = w.data() + k * dim;
    for (std::size_t n = 0; n < batch; ++n) {
      const double t = (ak[n] - extrema[k].lo) / range;
      nk[n] = t;
      u[k] += t;
      v[k] += t * t;
      const double* hn = h.data() + n * dim;
      for (std::size_t j = 0; j < dim; ++j) wk[j] += t * hn[j];
    }
    num[k] = 0.5 * (squared_norm(w.row(k)) - v[k]);
    den[k] = 0.5 * (u[k] * u[k] - v[k]);
  }

  std::size_t active = 0;
  double score_sum = 0.0;
  for (std::size_t k = 0; k < n_latents; ++k) {
    if (den[k] > cfg.epsilon_den) {
      out.batch_scores.scores[k] = num[k] / den[k];
      out.batch_scores.active[k] = 1;
      score_sum += out.batch_scores.scores[k];
      ++active;
    }
  }
  out.active_count = active;
  out.loss = active == 0 ? 1.0 : 1.0 - score_sum / static_cast<double>(active);

  if (!want_grad || active == 0) return out;

  // d(loss)/d(score_k) = -1/|K_active| for active latents; inactive latents
  // are masked out before the quotient rule so their rows stay exactly zero.
  const double score_coef = -1.0 / static_cast<double>(active);
  std::vector<double> g_norm(batch);
  for (std::size_t k = 0; k < n_latents; ++k) {
    if (!out.batch_scores.active[k]) continue;
    const double* nk = a_norm.data() + k * batch;
    const double* wk = w.data() + k * dim;
    const double inv_den = 1.0 / den[k];
    const double range = extrema[k].hi - extrema[k].lo;
    // Quotient rule on score = num/den with
    //   d(num)/d(a~_kn) = h_n . w_k - a~_kn,  d(den)/d(a~_kn) = u_k - a~_kn.
    for (std::size_t n = 0; n < batch; ++n) {
      const double proj = dot(h.row(n), {wk, dim});
      const double dnum = proj - nk[n];
      const double dden = u[k] - nk[n];
      g_norm[n] = score_coef * (dnum - out.batch_scores.scores[k] * dden) * inv_den;
    }
    // Chain through min-max: every entry gets the direct 1/range term; the
    // argmin/argmax entries additionally collect the sums routed through the
    // batch extrema.
    double via_min = 0.0, via_max = 0.0;
    for (std::size_t n = 0; n < batch; ++n) {
      via_min += g_norm[n] * (nk[n] - 1.0) / range;
      via_max += g_norm[n] * (-nk[n]) / range;
    }
    double* gk = out.grad_activations.data() + k * batch;
    for (std::size_t n = 0; n < batch; ++n) gk[n] = g_norm[n] / range;
    gk[extrema[k].arg_lo] += via_min;
    gk[extrema[k].arg_hi] += via_max;
  }
  return out;
}

MonoLossOutput monoloss_forward(const FeatureMatrix& h_batch,
                                const ActivationMatrix& a_batch,
                                const MonoLossConfig& cfg) {
  return monoloss_eval(h_batch.data(), a_batch.data(), cfg, false);
}

MonoLossOutput monoloss_backward(const FeatureMatrix& h_batch,
                                 const ActivationMatrix& a_batch,
                                 const MonoLossConfig& cfg) {
  return monoloss_eval(h_batch.data(), a_batch.data(), cfg, true);
}

double total_loss(double base, const MonoLossOutput& mono, const MonoLossConfig& cfg) {
  if (cfg.lambda == 0.0) return base;
  return base + cfg.lambda * mono.loss;
}

}  // namespace monosema
