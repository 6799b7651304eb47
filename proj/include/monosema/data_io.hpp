#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "monosema/core.hpp"

namespace monosema {

/// Storage width doubles as the dtype code in file headers.
enum class Dtype : std::uint8_t { f32 = 4, f64 = 8 };

/// Flat binary feature container:
///   magic "MFEA" | version u8 | n_samples u64 LE | dim u32 LE | dtype u8 |
///   row-major little-endian IEEE-754 payload.
/// Activation files use the same layout under magic "MACT" with rows
/// = latents and columns = samples.
void write_features(const std::string& path, const Matrix& raw, Dtype dtype = Dtype::f64);

/// Raw payload, widened to double, rows not normalized.
Matrix read_features_raw(const std::string& path);

/// Reads and unit-normalizes rows (the computation-side contract).
FeatureMatrix read_features(const std::string& path);

void write_activations(const std::string& path, const Matrix& latent_major,
                       Dtype dtype = Dtype::f64);
Matrix read_activations_raw(const std::string& path);

/// Streams feature rows in chunks; each chunk arrives raw, callers normalize
/// by constructing a FeatureMatrix. Chunked consumption is bit-identical to
/// whole-file reads.
class FeatureFileReader {
 public:
  explicit FeatureFileReader(const std::string& path);

  std::size_t n_samples() const noexcept { return n_samples_; }
  std::size_t dim() const noexcept { return dim_; }
  std::size_t remaining() const noexcept { return n_samples_ - cursor_; }

  /// Up to max_rows raw rows; fewer at the tail, zero-row matrix at EOF.
  Matrix read_rows(std::size_t max_rows);

 private:
  std::ifstream in_;
  std::string path_;
  std::size_t n_samples_ = 0;
  std::size_t dim_ = 0;
  Dtype dtype_ = Dtype::f64;
  std::size_t cursor_ = 0;
};

/// Newline-delimited class ids, or CSV lines "index,class_id" (optional
/// "index,class_id" header). Every sample index must appear exactly once.
std::vector<std::int64_t> read_labels(const std::string& path);
void write_labels(const std::string& path, const std::vector<std::int64_t>& labels);

struct SyntheticSpec {
  std::size_t n_clusters = 4;
  std::size_t samples_per_cluster = 64;
  std::size_t dim = 16;
  double within_cluster_noise = 0.05;  // per-coordinate Gaussian sigma
  std::uint64_t seed = 42;
};

struct SyntheticData {
  FeatureMatrix features;  // cluster-major sample order
  std::vector<std::int64_t> labels;
  Matrix centers;  // K x dim unit rows, the ground-truth concept directions
};

/// Unit-norm cluster centers with pairwise cosine below 0.5 (rejection
/// sampled, bounded retries), samples = normalize(center + noise).
SyntheticData generate_synthetic(const SyntheticSpec& spec);

/// Ground-truth indicator activations for generated data: latent k fires 1.0
/// exactly on cluster k's samples. Useful as a scoring fixture.
Matrix indicator_activations(const SyntheticSpec& spec,
                             const std::vector<std::int64_t>& labels);

}  // namespace monosema
