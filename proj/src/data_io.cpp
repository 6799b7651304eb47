#include "monosema/data_io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <filesystem>

#include "monosema/errors.hpp"
#include "monosema/rng.hpp"

static_assert(std::endian::native == std::endian::little,
              "file formats are little-endian; big-endian hosts are unsupported");

namespace monosema {

namespace {

constexpr char kFeatureMagic[4] = {'M', 'F', 'E', 'A'};
constexpr char kActivationMagic[4] = {'M', 'A', 'C', 'T'};
constexpr std::uint8_t kFormatVersion = 1;

struct Header {
  std::uint64_t rows = 0;
  std::uint32_t cols = 0;
  Dtype dtype = Dtype::f64;
};

void write_header(std::ofstream& out, const char magic[4], const Header& h) {
  out.write(magic, 4);
  out.put(static_cast<char>(kFormatVersion));
  out.write(reinterpret_cast<const char*>(&h.rows), sizeof(h.rows));
  out.write(reinterpret_cast<const char*>(&h.cols), sizeof(h.cols));
  out.put(static_cast<char>(h.dtype));
}

Header read_header(std::ifstream& in, const char magic[4], const std::string& path) {
  char got[4] = {};
  in.read(got, 4);
  if (in.gcount() != 4 || std::memcmp(got, magic, 4) != 0) {
    throw BadMagic(path + ": bad magic");
  }
  const int version = in.get();
  if (version != kFormatVersion) {
    throw IoError(path + ": unsupported format version " + std::to_string(version));
  }
  Header h;
  in.read(reinterpret_cast<char*>(&h.rows), sizeof(h.rows));
  in.read(reinterpret_cast<char*>(&h.cols), sizeof(h.cols));
  const int dtype = in.get();
  if (!in) throw TruncatedPayload(path + ": header truncated");
  if (dtype != static_cast<int>(Dtype::f32) && dtype != static_cast<int>(Dtype::f64)) {
    throw UnsupportedDtype(path + ": dtype code " + std::to_string(dtype));
  }
  h.dtype = static_cast<Dtype>(dtype);
  if (h.rows < 1 || h.cols < 1) {
    throw IoError(path + ": empty matrix (rows and cols must be >= 1)");
  }
  return h;
}

void check_payload_size(const Header& h, std::uintmax_t file_size, const std::string& path) {
  constexpr std::uintmax_t header_bytes = 4 + 1 + 8 + 4 + 1;
  const std::uintmax_t expected =
      header_bytes + h.rows * static_cast<std::uintmax_t>(h.cols) *
                         static_cast<std::uintmax_t>(h.dtype);
  if (file_size != expected) {
    throw TruncatedPayload(path + ": payload size " + std::to_string(file_size) +
                           " does not match header (expected " +
                           std::to_string(expected) + ")");
  }
}

void write_payload(std::ofstream& out, const Matrix& m, Dtype dtype) {
  if (dtype == Dtype::f64) {
    out.write(reinterpret_cast<const char*>(m.data()),
              static_cast<std::streamsize>(m.size() * sizeof(double)));
  } else {
    std::vector<float> narrow(m.size());
    for (std::size_t i = 0; i < m.size(); ++i) {
      narrow[i] = static_cast<float>(m.storage()[i]);
    }
    out.write(reinterpret_cast<const char*>(narrow.data()),
              static_cast<std::streamsize>(narrow.size() * sizeof(float)));
  }
}

void read_rows_into(std::ifstream& in, Dtype dtype, double* dst, std::size_t count,
                    const std::string& path) {
  if (dtype == Dtype::f64) {
    in.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(count * sizeof(double)));
  } else {
    std::vector<float> narrow(count);
    in.read(reinterpret_cast<char*>(narrow.data()),
            static_cast<std::streamsize>(count * sizeof(float)));
    for (std::size_t i = 0; i < count; ++i) dst[i] = static_cast<double>(narrow[i]);
  }
  if (!in) throw TruncatedPayload(path + ": payload truncated");
}

void write_matrix_file(const std::string& path, const char magic[4], const Matrix& m,
                       Dtype dtype) {
  if (m.rows() < 1 || m.cols() < 1) {
    throw ConfigError("refusing to write an empty matrix to " + path);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  Header h{m.rows(), static_cast<std::uint32_t>(m.cols()), dtype};
  write_header(out, magic, h);
  write_payload(out, m, dtype);
  if (!out) throw IoError("failed writing " + path);
}

Matrix read_matrix_file(const std::string& path, const char magic[4]) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  const Header h = read_header(in, magic, path);
  check_payload_size(h, std::filesystem::file_size(path), path);
  Matrix m(h.rows, h.cols);
  read_rows_into(in, h.dtype, m.data(), m.size(), path);
  return m;
}

}  // namespace

void write_features(const std::string& path, const Matrix& raw, Dtype dtype) {
  write_matrix_file(path, kFeatureMagic, raw, dtype);
}

Matrix read_features_raw(const std::string& path) {
  return read_matrix_file(path, kFeatureMagic);
}

FeatureMatrix read_features(const std::string& path) {
  return FeatureMatrix(read_features_raw(path));
}

void write_activations(const std::string& path, const Matrix& latent_major, Dtype dtype) {
  write_matrix_file(path, kActivationMagic, latent_major, dtype);
}

Matrix read_activations_raw(const std::string& path) {
  return read_matrix_file(path, kActivationMagic);
}

FeatureFileReader::FeatureFileReader(const std::string& path)
    : in_(path, std::ios::binary), path_(path) {
  if (!in_) throw IoError("cannot open " + path);
  const Header h = read_header(in_, kFeatureMagic, path);
  check_payload_size(h, std::filesystem::file_size(path), path);
  n_samples_ = h.rows;
  dim_ = h.cols;
  dtype_ = h.dtype;
}

Matrix FeatureFileReader::read_rows(std::size_t max_rows) {
  const std::size_t take = std::min(max_rows, remaining());
  Matrix chunk(take, dim_);
  if (take > 0) {
    read_rows_into(in_, dtype_, chunk.data(), take * dim_, path_);
    cursor_ += take;
  }
  return chunk;
}

std::vector<std::int64_t> read_labels(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::vector<std::int64_t> plain;
  std::vector<std::pair<std::int64_t, std::int64_t>> indexed;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line_no == 1 && line.find("class_id") != std::string::npos) continue;  // header
    const auto comma = line.find(',');
    try {
      if (comma == std::string::npos) {
        plain.push_back(std::stoll(line));
      } else {
        indexed.emplace_back(std::stoll(line.substr(0, comma)),
                             std::stoll(line.substr(comma + 1)));
      }
    } catch (const std::exception&) {
      throw IoError(path + ": unparseable label line " + std::to_string(line_no));
    }
  }
  if (!plain.empty() && !indexed.empty()) {
    throw IoError(path + ": mixed plain and index,class_id label lines");
  }
  std::vector<std::int64_t> labels;
  if (!indexed.empty()) {
    labels.assign(indexed.size(), -1);
    for (const auto& [idx, cls] : indexed) {
      if (idx < 0 || static_cast<std::size_t>(idx) >= labels.size() || labels[idx] != -1) {
        throw IoError(path + ": sample indices must cover 0..N-1 exactly once");
      }
      labels[idx] = cls;
    }
  } else {
    labels = std::move(plain);
  }
  if (labels.empty()) throw IoError(path + ": no labels");
  for (std::int64_t c : labels) {
    if (c < 0) throw IoError(path + ": class ids must be >= 0");
  }
  return labels;
}

void write_labels(const std::string& path, const std::vector<std::int64_t>& labels) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  for (std::int64_t c : labels) out << c << '\n';
  if (!out) throw IoError("failed writing " + path);
}

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
  if (spec.n_clusters < 1 || spec.samples_per_cluster < 1 || spec.dim < 1) {
    throw ConfigError("synthetic spec requires positive cluster count, size, and dim");
  }
  if (spec.within_cluster_noise < 0.0) {
    throw ConfigError("within_cluster_noise must be >= 0");
  }
  Rng rng(spec.seed);

  constexpr int kMaxTries = 10000;
  constexpr double kMaxCenterCosine = 0.5;
  Matrix centers(spec.n_clusters, spec.dim);
  for (std::size_t c = 0; c < spec.n_clusters; ++c) {
    int tries = 0;
    for (;;) {
      if (++tries > kMaxTries) {
        throw ConfigError("could not place " + std::to_string(spec.n_clusters) +
                          " cluster centers with pairwise cosine < 0.5 in dim " +
                          std::to_string(spec.dim));
      }
      auto row = centers.row(c);
      for (double& x : row) x = rng.normal();
      const double norm = std::sqrt(squared_norm(row));
      if (norm < 1e-12) continue;
      for (double& x : row) x /= norm;
      bool ok = true;
      for (std::size_t prev = 0; prev < c && ok; ++prev) {
        ok = dot(centers.row(prev), row) < kMaxCenterCosine;
      }
      if (ok) break;
    }
  }

  const std::size_t n = spec.n_clusters * spec.samples_per_cluster;
  Matrix raw(n, spec.dim);
  std::vector<std::int64_t> labels(n);
  std::size_t row = 0;
  for (std::size_t c = 0; c < spec.n_clusters; ++c) {
    for (std::size_t s = 0; s < spec.samples_per_cluster; ++s, ++row) {
      auto dst = raw.row(row);
      auto center = centers.row(c);
      for (std::size_t j = 0; j < spec.dim; ++j) {
        dst[j] = center[j] + spec.within_cluster_noise * rng.normal();
      }
      labels[row] = static_cast<std::int64_t>(c);
    }
  }
  return SyntheticData{FeatureMatrix(std::move(raw)), std::move(labels), std::move(centers)};
}

Matrix indicator_activations(const SyntheticSpec& spec,
                             const std::vector<std::int64_t>& labels) {
  Matrix a(spec.n_clusters, labels.size(), 0.0);
  for (std::size_t n = 0; n < labels.size(); ++n) {
    a(static_cast<std::size_t>(labels[n]), n) = 1.0;
  }
  return a;
}

}  // namespace monosema
