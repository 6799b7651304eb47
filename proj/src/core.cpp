#include "monosema/core.hpp"

#include <cmath>

#include "monosema/errors.hpp"

namespace monosema {

namespace {
constexpr double kZeroRowNorm = 1e-12;
}

FeatureMatrix::FeatureMatrix(Matrix raw) : data_(std::move(raw)) {
  if (data_.rows() < 1 || data_.cols() < 1) {
    throw DimensionError("feature matrix must have at least one row and one column");
  }
  for (std::size_t n = 0; n < data_.rows(); ++n) {
    auto r = data_.row(n);
    const double norm = std::sqrt(squared_norm(r));
    if (norm < kZeroRowNorm) throw ZeroRowError(n);
    for (double& x : r) x /= norm;
  }
}

FeatureMatrix normalize_rows(Matrix raw) { return FeatureMatrix(std::move(raw)); }

ActivationMatrix::ActivationMatrix(Matrix data, bool normalized)
    : data_(std::move(data)), normalized_(normalized) {
  if (data_.rows() < 1 || data_.cols() < 1) {
    throw DimensionError("activation matrix must have at least one latent and one sample");
  }
  if (normalized_) {
    for (double x : data_.storage()) {
      if (!(x >= 0.0 && x <= 1.0)) {
        throw NumericalError("normalized activation outside [0, 1]");
      }
    }
  }
}

MonoStats MonoStats::zeros(std::size_t n_latents, std::size_t dim) {
  MonoStats s;
  s.u.assign(n_latents, 0.0);
  s.v.assign(n_latents, 0.0);
  s.w = Matrix(n_latents, dim, 0.0);
  s.n_seen = 0;
  return s;
}

MonoStats merge_stats(const MonoStats& a, const MonoStats& b) {
  if (a.n_latents() != b.n_latents() || a.dim() != b.dim()) {
    throw DimensionError("merge_stats: operand shapes differ");
  }
  MonoStats out = a;
  for (std::size_t k = 0; k < out.u.size(); ++k) {
    out.u[k] += b.u[k];
    out.v[k] += b.v[k];
  }
  for (std::size_t i = 0; i < out.w.size(); ++i) {
    out.w.storage()[i] += b.w.storage()[i];
  }
  out.n_seen += b.n_seen;
  return out;
}

}  // namespace monosema
