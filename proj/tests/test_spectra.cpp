#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "reflex/rng.hpp"
#include "reflex/spectra.hpp"
#include "reflex/theory.hpp"

using namespace reflex;

namespace {

PmiMatrix matrix_from(std::vector<double> values, uint32_t n) {
  PmiMatrix m;
  m.n = n;
  m.missing_policy = "synthetic";
  m.values = std::move(values);
  return m;
}

PmiMatrix random_symmetric(uint32_t n, uint64_t seed, double scale = 1.0) {
  Philox4x32 rng(seed);
  PmiMatrix m = matrix_from(std::vector<double>(n * n, 0.0), n);
  for (uint32_t i = 0; i < n; ++i) {
    for (uint32_t j = i; j < n; ++j) {
      const double v = rng.next_gaussian() * scale;
      m.at(i, j) = v;
      m.at(j, i) = v;
    }
  }
  return m;
}

}  // namespace

TEST_SUITE("spectra") {

TEST_CASE("diagonal matrix eigenvalues come back sorted") {
  const auto eigs = eigenvalues_symmetric(
      matrix_from({3, 0, 0, 0, 1, 0, 0, 0, 2}, 3));
  REQUIRE(eigs.size() == 3);
  CHECK(eigs[0] == doctest::Approx(1.0));
  CHECK(eigs[1] == doctest::Approx(2.0));
  CHECK(eigs[2] == doctest::Approx(3.0));
}

TEST_CASE("2x2 reflection has eigenvalues -1 and 1") {
  const auto eigs = eigenvalues_symmetric(matrix_from({0, 1, 1, 0}, 2));
  CHECK(eigs[0] == doctest::Approx(-1.0));
  CHECK(eigs[1] == doctest::Approx(1.0));
}

TEST_CASE("asymmetric input is rejected with the worst offender") {
  auto m = matrix_from({0, 1, 2, 0}, 2);
  CHECK_THROWS_WITH_AS(eigenvalues_symmetric(m),
                       doctest::Contains("not symmetric"),
                       std::invalid_argument);
}

TEST_CASE("matches the characteristic polynomial oracle for n <= 6") {
  Philox4x32 rng(31337);
  for (int trial = 0; trial < 25; ++trial) {
    const auto n = static_cast<uint32_t>(2 + rng.next_below(5));  // 2..6
    const auto m = random_symmetric(n, rng.next_u64());
    const auto fast = eigenvalues_symmetric(m);
    const auto oracle = oracles::charpoly_eigenvalues(m.values, n);
    REQUIRE(fast.size() == oracle.size());
    for (size_t k = 0; k < fast.size(); ++k) {
      CHECK(std::abs(fast[k] - oracle[k]) < 1e-8);
    }
  }
}

TEST_CASE("scale equivariance") {
  const auto m = random_symmetric(8, 99);
  auto scaled = m;
  const double c = 3.25;
  for (auto& v : scaled.values) v *= c;
  const auto e1 = eigenvalues_symmetric(m);
  const auto e2 = eigenvalues_symmetric(scaled);
  for (size_t k = 0; k < e1.size(); ++k) {
    CHECK(std::abs(e2[k] - c * e1[k]) < 1e-10 * std::max(1.0, std::abs(e1[k])));
  }
}

TEST_CASE("orthogonal conjugation preserves the spectrum") {
  const uint32_t n = 12;
  const auto m = random_symmetric(n, 123);
  const Mat p = random_rotation(n, 7);

  // B = P' A P, computed directly.
  PmiMatrix b = matrix_from(std::vector<double>(n * n, 0.0), n);
  std::vector<double> tmp(n * n, 0.0);
  for (uint32_t i = 0; i < n; ++i) {
    for (uint32_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (uint32_t k = 0; k < n; ++k) s += m.at(i, k) * p(k, j);
      tmp[i * n + j] = s;
    }
  }
  for (uint32_t i = 0; i < n; ++i) {
    for (uint32_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (uint32_t k = 0; k < n; ++k) s += p(k, i) * tmp[k * n + j];
      b.at(i, j) = s;
    }
  }
  // Symmetrize away the float dust so the input check passes.
  for (uint32_t i = 0; i < n; ++i) {
    for (uint32_t j = i + 1; j < n; ++j) {
      const double avg = 0.5 * (b.at(i, j) + b.at(j, i));
      b.at(i, j) = avg;
      b.at(j, i) = avg;
    }
  }

  const auto ea = eigenvalues_symmetric(m);
  const auto eb = eigenvalues_symmetric(b);
  for (size_t k = 0; k < ea.size(); ++k) {
    CHECK(std::abs(ea[k] - eb[k]) < 1e-8);
  }
}

TEST_CASE("spectrum_stats on a symmetric triple") {
  const auto r = spectrum_stats({-1.0, 0.0, 1.0}, 11);
  CHECK(r.trace == doctest::Approx(0.0));
  CHECK(r.skewness == doctest::Approx(0.0));
  CHECK(r.mean == doctest::Approx(0.0));
  uint64_t total = 0;
  for (const auto c : r.bin_counts) total += c;
  CHECK(total == r.n);
  CHECK(r.bin_edges.front() == doctest::Approx(-1.0));
  CHECK(r.bin_edges.back() == doctest::Approx(1.0));
}

TEST_CASE("eigenvalue sum reproduces the trace") {
  const auto m = random_symmetric(40, 5);
  const auto eigs = eigenvalues_symmetric(m);
  double sum = 0.0;
  for (const double e : eigs) sum += e;
  CHECK(sum == doctest::Approx(m.trace()).epsilon(1e-9));
}

TEST_CASE("wigner control approaches the semicircle") {
  const auto m = wigner_control(2000, 424242);
  const auto eigs = eigenvalues_symmetric(m);
  const auto report = spectrum_stats(eigs);
  CHECK(semicircle_l1(report) < 0.15);
  // And it is nearly symmetric: standardized trace ratio close to zero.
  CHECK(report.trace_scale_ratio < 0.05);
}

TEST_CASE("report serialization carries the histogram") {
  const auto r = spectrum_stats({-2.0, -1.0, 0.5, 1.0, 1.5}, 7);
  const auto json = to_json(r);
  CHECK(json.find("\"skewness\"") != std::string::npos);
  CHECK(json.find("\"semicircle_l1\"") != std::string::npos);
  const std::string path = "spectrum_report_test";
  save_spectrum_report(r, path + ".json");
  save_histogram_csv(r, path + ".csv");
  std::remove((path + ".json").c_str());
  std::remove((path + ".csv").c_str());
}

}  // TEST_SUITE
