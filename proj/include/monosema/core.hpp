#pragma once

#include <cstdint>
#include <vector>

#include "monosema/matrix.hpp"

namespace monosema {

/// N x d matrix of unit-norm embedding rows. The constructor normalizes every
/// row; a row with norm below 1e-12 is rejected with ZeroRowError. Immutable
/// after construction and safe to share across threads.
class FeatureMatrix {
 public:
  /// Takes a raw N x d matrix and normalizes each row to unit length.
  explicit FeatureMatrix(Matrix raw);

  std::size_t n_samples() const noexcept { return data_.rows(); }
  std::size_t dim() const noexcept { return data_.cols(); }
  const Matrix& data() const noexcept { return data_; }
  std::span<const double> row(std::size_t n) const noexcept { return data_.row(n); }

 private:
  Matrix data_;
};

/// M x N activation matrix, one row per latent (latent-major storage matches
/// the per-latent min/max scans and per-sample streaming pattern).
class ActivationMatrix {
 public:
  ActivationMatrix(Matrix data, bool normalized);

  std::size_t n_latents() const noexcept { return data_.rows(); }
  std::size_t n_samples() const noexcept { return data_.cols(); }
  bool normalized() const noexcept { return normalized_; }
  const Matrix& data() const noexcept { return data_; }
  std::span<const double> latent_row(std::size_t k) const noexcept { return data_.row(k); }

 private:
  Matrix data_;
  bool normalized_;
};

/// Streaming per-latent statistics: u_k = sum of normalized activations,
/// v_k = sum of their squares, and one embedding-weighted activation sum per
/// latent (row k of `w`, a d-vector; the transpose of the usual d x M layout).
/// A value object: parallel workers accumulate private copies and merge.
struct MonoStats {
  std::vector<double> u;
  std::vector<double> v;
  Matrix w;  // M x d, row k = weighted embedding sum for latent k
  std::uint64_t n_seen = 0;

  static MonoStats zeros(std::size_t n_latents, std::size_t dim);

  std::size_t n_latents() const noexcept { return u.size(); }
  std::size_t dim() const noexcept { return w.cols(); }
};

/// Componentwise sum of two statistics records. Exact: merged sums equal the
/// elementwise addition of the operands.
MonoStats merge_stats(const MonoStats& a, const MonoStats& b);

/// Per-latent scores in [-1, 1]; entries with an inactive denominator are 0
/// and flagged false in `active`.
struct LatentScores {
  std::vector<double> scores;
  std::vector<std::uint8_t> active;

  std::size_t n_latents() const noexcept { return scores.size(); }
};

/// Unit-normalizes each row of a raw feature matrix.
FeatureMatrix normalize_rows(Matrix raw);

}  // namespace monosema
