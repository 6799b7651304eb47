#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "monosema/core.hpp"

namespace monosema {

struct R2Result {
  std::vector<double> per_dim;        // 0 where excluded
  std::vector<std::uint8_t> valid;    // false for zero-variance target dims
  std::vector<std::size_t> excluded;  // indices of excluded dimensions
  double mean = 0.0;                  // over valid dimensions
};

/// Streaming per-dimension coefficient of determination. Target means and
/// variances via Welford; residual sums accumulate directly. Accumulators
/// merge, and a merge equals accumulating the concatenated stream within
/// 1e-10 relative.
class R2Accumulator {
 public:
  explicit R2Accumulator(std::size_t dim);

  /// x and xhat are B x d batches of targets and reconstructions.
  void update(const Matrix& x, const Matrix& xhat);
  void merge(const R2Accumulator& other);

  /// Requires at least two samples. Zero-variance dimensions are excluded
  /// from the mean and listed in `excluded`.
  R2Result finalize() const;

  std::uint64_t count() const noexcept { return count_; }
  std::size_t dim() const noexcept { return mean_.size(); }

 private:
  std::uint64_t count_ = 0;
  std::vector<double> mean_;    // running target mean per dimension
  std::vector<double> m2_;      // sum of squared deviations per dimension
  std::vector<double> ss_res_;  // sum of squared residuals per dimension
};

struct PurityRow {
  std::size_t latent = 0;
  std::int64_t dominant_class = -1;  // -1 when the latent never activates
  std::uint64_t n_active = 0;        // |N_k|, samples with a_kn > 0
  double binary = 0.0;
  double weighted = 0.0;
};

struct PurityReport {
  std::vector<PurityRow> rows;
  std::size_t active_latents = 0;
  double mean_binary = 0.0;    // over latents with n_active > 0
  double mean_weighted = 0.0;
};

/// Binary purity |N*_k|/|N_k| and weighted purity (activation mass of the
/// dominant class over total mass), on raw activation sign a_kn > 0.
/// Dominant-class ties break to the lowest class id.
PurityReport class_purity(const ActivationMatrix& a_raw,
                          const std::vector<std::int64_t>& labels);

struct CurvePoint {
  double normalized_index = 0.0;  // i/(M-1); a single latent maps to 0
  double score = 0.0;
};

/// Scores sorted descending (stable; ties keep original latent order) against
/// a normalized latent index in [0, 1].
std::vector<CurvePoint> monoscore_curve(const LatentScores& scores);

/// Two-column CSV "normalized_index,monoscore".
void write_curve_csv(const std::string& path, const std::vector<CurvePoint>& curve);

/// Per-latent CSV "latent_index,dominant_class,n_active,binary_purity,weighted_purity".
void write_purity_csv(const std::string& path, const PurityReport& report);

}  // namespace monosema
