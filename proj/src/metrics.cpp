#include "monosema/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include "monosema/errors.hpp"

namespace monosema {

R2Accumulator::R2Accumulator(std::size_t dim)
    : mean_(dim, 0.0), m2_(dim, 0.0), ss_res_(dim, 0.0) {
  if (dim < 1) throw DimensionError("R2Accumulator needs at least one dimension");
}

void R2Accumulator::update(const Matrix& x, const Matrix& xhat) {
  if (!x.same_shape(xhat)) throw DimensionError("target and reconstruction shapes differ");
  if (x.cols() != dim()) throw DimensionError("batch dimension does not match accumulator");
  for (std::size_t n = 0; n < x.rows(); ++n) {
    ++count_;
    const double inv_n = 1.0 / static_cast<double>(count_);
    const double* xn = x.data() + n * x.cols();
    const double* rn = xhat.data() + n * x.cols();
    for (std::size_t j = 0; j < x.cols(); ++j) {
      const double delta = xn[j] - mean_[j];
      mean_[j] += delta * inv_n;
      m2_[j] += delta * (xn[j] - mean_[j]);
      const double res = xn[j] - rn[j];
      ss_res_[j] += res * res;
    }
  }
}

void R2Accumulator::merge(const R2Accumulator& other) {
  if (dim() != other.dim()) throw DimensionError("merging R2 accumulators of different width");
  if (other.count_ == 0) return;
  if (count_ == 0) {
    *this = other;
    return;
  }
  const double na = static_cast<double>(count_);
  const double nb = static_cast<double>(other.count_);
  const double nt = na + nb;
  for (std::size_t j = 0; j < dim(); ++j) {
    const double delta = other.mean_[j] - mean_[j];
    mean_[j] += delta * nb / nt;
    m2_[j] += other.m2_[j] + delta * delta * (na * nb / nt);
    ss_res_[j] += other.ss_res_[j];
  }
  count_ += other.count_;
}

R2Result R2Accumulator::finalize() const {
  if (count_ < 2) throw ConfigError("R2 needs at least two samples");
  R2Result r;
  r.per_dim.assign(dim(), 0.0);
  r.valid.assign(dim(), 0);
  double sum = 0.0;
  std::size_t n_valid = 0;
  for (std::size_t j = 0; j < dim(); ++j) {
    if (m2_[j] == 0.0) {
      r.excluded.push_back(j);
      continue;
    }
    r.per_dim[j] = 1.0 - ss_res_[j] / m2_[j];
    r.valid[j] = 1;
    sum += r.per_dim[j];
    ++n_valid;
  }
  r.mean = n_valid > 0 ? sum / static_cast<double>(n_valid) : 0.0;
  return r;
}

PurityReport class_purity(const ActivationMatrix& a_raw,
                          const std::vector<std::int64_t>& labels) {
  const std::size_t n_samples = a_raw.n_samples();
  if (labels.size() != n_samples) throw DimensionError("label count does not match samples");
  std::int64_t max_label = 0;
  for (std::int64_t c : labels) {
    if (c < 0) throw ConfigError("class ids must be non-negative");
    max_label = std::max(max_label, c);
  }
  const std::size_t n_classes = static_cast<std::size_t>(max_label) + 1;

  PurityReport report;
  report.rows.resize(a_raw.n_latents());
  std::vector<std::uint64_t> counts(n_classes);
  std::vector<double> mass(n_classes);
  double binary_sum = 0.0, weighted_sum = 0.0;
  for (std::size_t k = 0; k < a_raw.n_latents(); ++k) {
    std::fill(counts.begin(), counts.end(), 0);
    std::fill(mass.begin(), mass.end(), 0.0);
    auto row = a_raw.latent_row(k);
    std::uint64_t total_count = 0;
    double total_mass = 0.0;
    for (std::size_t n = 0; n < n_samples; ++n) {
      if (row[n] > 0.0) {
        const auto c = static_cast<std::size_t>(labels[n]);
        ++counts[c];
        mass[c] += row[n];
        ++total_count;
        total_mass += row[n];
      }
    }
    PurityRow& out = report.rows[k];
    out.latent = k;
    out.n_active = total_count;
    if (total_count == 0) continue;
    std::size_t best = 0;
    for (std::size_t c = 1; c < n_classes; ++c) {
      if (counts[c] > counts[best]) best = c;  // ties keep the lowest class id
    }
    out.dominant_class = static_cast<std::int64_t>(best);
    out.binary = static_cast<double>(counts[best]) / static_cast<double>(total_count);
    out.weighted = mass[best] / total_mass;
    binary_sum += out.binary;
    weighted_sum += out.weighted;
    ++report.active_latents;
  }
  if (report.active_latents > 0) {
    report.mean_binary = binary_sum / static_cast<double>(report.active_latents);
    report.mean_weighted = weighted_sum / static_cast<double>(report.active_latents);
  }
  return report;
}

std::vector<CurvePoint> monoscore_curve(const LatentScores& scores) {
  const std::size_t n = scores.n_latents();
  if (n < 1) throw DimensionError("monoscore_curve needs at least one latent");
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores.scores[a] > scores.scores[b];
  });
  std::vector<CurvePoint> curve(n);
  const double denom = n > 1 ? static_cast<double>(n - 1) : 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    curve[i].normalized_index = static_cast<double>(i) / denom;
    curve[i].score = scores.scores[order[i]];
  }
  return curve;
}

void write_curve_csv(const std::string& path, const std::vector<CurvePoint>& curve) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << "normalized_index,monoscore\n";
  char buf[64];
  for (const auto& p : curve) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g", p.normalized_index, p.score);
    out << buf << '\n';
  }
  if (!out) throw IoError("failed writing " + path);
}

void write_purity_csv(const std::string& path, const PurityReport& report) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << "latent_index,dominant_class,n_active,binary_purity,weighted_purity\n";
  char buf[64];
  for (const auto& r : report.rows) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g", r.binary, r.weighted);
    out << r.latent << ',' << r.dominant_class << ',' << r.n_active << ',' << buf << '\n';
  }
  if (!out) throw IoError("failed writing " + path);
}

}  // namespace monosema
