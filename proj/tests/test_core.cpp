#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "monosema/core.hpp"
#include "monosema/errors.hpp"
#include "monosema/monoscore.hpp"
#include "test_util.hpp"

using namespace monosema;
using testutil::Rng;

TEST_CASE("normalize_rows: direct norm computation") {
  Matrix m(1, 2);
  m(0, 0) = 3.0;
  m(0, 1) = 4.0;
  const FeatureMatrix f = normalize_rows(std::move(m));
  CHECK(f.row(0)[0] == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(f.row(0)[1] == doctest::Approx(0.8).epsilon(1e-15));
}

TEST_CASE("normalize_rows: unit row unchanged") {
  Matrix m(1, 3, 0.0);
  m(0, 1) = 1.0;
  const FeatureMatrix f = normalize_rows(std::move(m));
  CHECK(f.row(0)[0] == 0.0);
  CHECK(f.row(0)[1] == 1.0);
  CHECK(f.row(0)[2] == 0.0);
}

TEST_CASE("normalize_rows: random matrix has unit rows afterwards") {
  Rng rng(11);
  Matrix m(8, 4);
  for (double& x : m.storage()) x = rng.normal() * 3.0;
  const FeatureMatrix f = normalize_rows(std::move(m));
  for (std::size_t i = 0; i < f.n_samples(); ++i) {
    CHECK(std::abs(std::sqrt(squared_norm(f.row(i))) - 1.0) < 1e-12);
  }
}

TEST_CASE("normalize_rows: zero row is an error with the offending index") {
  Matrix m(3, 2, 1.0);
  m(1, 0) = 0.0;
  m(1, 1) = 0.0;
  try {
    normalize_rows(std::move(m));
    FAIL("expected ZeroRowError");
  } catch (const ZeroRowError& e) {
    CHECK(e.row_index == 1);
  }
}

TEST_CASE("ActivationMatrix rejects out-of-range values when flagged normalized") {
  Matrix m(1, 2, 0.5);
  m(0, 1) = 1.5;
  CHECK_THROWS_AS(ActivationMatrix(std::move(m), true), NumericalError);
}

TEST_CASE("merge_stats: additive identity") {
  MonoStats zero = MonoStats::zeros(3, 2);
  MonoStats s = MonoStats::zeros(3, 2);
  s.u = {1.0, 2.0, 3.0};
  s.v = {0.5, 1.0, 1.5};
  s.w(0, 0) = 7.0;
  s.n_seen = 4;
  const MonoStats merged = merge_stats(zero, s);
  CHECK(merged.u == s.u);
  CHECK(merged.v == s.v);
  CHECK(merged.w.storage() == s.w.storage());
  CHECK(merged.n_seen == 4);
}

TEST_CASE("merge_stats: linearity, merge(S, S) doubles every component") {
  Rng rng(5);
  MonoStats s = MonoStats::zeros(4, 3);
  for (double& x : s.u) x = rng.uniform01();
  for (double& x : s.v) x = rng.uniform01();
  for (double& x : s.w.storage()) x = rng.normal();
  s.n_seen = 9;
  const MonoStats d = merge_stats(s, s);
  for (std::size_t k = 0; k < 4; ++k) {
    CHECK(d.u[k] == 2.0 * s.u[k]);
    CHECK(d.v[k] == 2.0 * s.v[k]);
  }
  for (std::size_t i = 0; i < s.w.size(); ++i) {
    CHECK(d.w.storage()[i] == 2.0 * s.w.storage()[i]);
  }
  CHECK(d.n_seen == 18);
}

TEST_CASE("merge_stats: dimension mismatch") {
  CHECK_THROWS_AS(merge_stats(MonoStats::zeros(3, 2), MonoStats::zeros(3, 4)),
                  DimensionError);
  CHECK_THROWS_AS(merge_stats(MonoStats::zeros(2, 2), MonoStats::zeros(3, 2)),
                  DimensionError);
}

// Exact-arithmetic instance: basis-vector embeddings and dyadic activations
// make every accumulated sum exact, so split-vs-concatenated equality holds
// bit for bit rather than merely to rounding.
namespace {

struct ExactInstance {
  Matrix h;
  Matrix a;
};

ExactInstance exact_instance(std::size_t n, std::size_t d, std::size_t m, Rng& rng) {
  Matrix h(n, d, 0.0);
  for (std::size_t i = 0; i < n; ++i) h(i, rng.below(d)) = 1.0;
  Matrix a(m, n);
  for (double& x : a.storage()) x = static_cast<double>(rng.below(65)) / 64.0;
  return {std::move(h), std::move(a)};
}

}  // namespace

TEST_CASE("stats over a partition merge exactly to stats over the whole, fixed order") {
  Rng rng(17);
  const auto [h_raw, a_raw] = exact_instance(16, 4, 5, rng);
  const FeatureMatrix h(h_raw);
  const ActivationMatrix a(a_raw, true);

  MonoStats whole = MonoStats::zeros(5, 4);
  accumulate_stats(whole, h, a);

  // First and second halves as independent accumulations, merged in order.
  auto slice = [&](std::size_t lo, std::size_t hi) {
    Matrix hs(hi - lo, 4);
    Matrix as(5, hi - lo);
    for (std::size_t i = lo; i < hi; ++i) {
      for (std::size_t j = 0; j < 4; ++j) hs(i - lo, j) = h_raw(i, j);
      for (std::size_t k = 0; k < 5; ++k) as(k, i - lo) = a_raw(k, i);
    }
    MonoStats s = MonoStats::zeros(5, 4);
    accumulate_stats(s, FeatureMatrix(std::move(hs)), ActivationMatrix(std::move(as), true));
    return s;
  };
  const MonoStats merged = merge_stats(slice(0, 8), slice(8, 16));
  CHECK(merged.u == whole.u);
  CHECK(merged.v == whole.v);
  CHECK(merged.w.storage() == whole.w.storage());
  CHECK(merged.n_seen == whole.n_seen);
}

TEST_CASE("v_k <= u_k for activations in [0,1]") {
  Rng rng(23);
  const Matrix h_raw = testutil::random_unit_rows(40, 6, rng);
  const Matrix a_raw = testutil::random_activations(8, 40, 0.4, rng);
  MonoStats stats = MonoStats::zeros(8, 6);
  accumulate_stats(stats, FeatureMatrix(h_raw), ActivationMatrix(a_raw, true));
  for (std::size_t k = 0; k < 8; ++k) {
    CHECK(stats.u[k] >= 0.0);
    CHECK(stats.v[k] >= 0.0);
    CHECK(stats.v[k] <= stats.u[k]);
  }
}
