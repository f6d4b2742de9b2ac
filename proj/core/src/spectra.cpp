#include "reflex/spectra.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <lapacke.h>
#include <nlohmann/json.hpp>

#include "reflex/rng.hpp"

namespace reflex {
namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

void check_symmetry(const std::vector<double>& a, uint32_t n) {
  double max_abs = 0.0;
  double max_asym = 0.0;
  for (uint32_t i = 0; i < n; ++i) {
    for (uint32_t j = i; j < n; ++j) {
      const double x = a[static_cast<size_t>(i) * n + j];
      const double y = a[static_cast<size_t>(j) * n + i];
      max_abs = std::max(max_abs, std::abs(x));
      max_asym = std::max(max_asym, std::abs(x - y));
    }
  }
  if (max_asym > 1e-10 * std::max(1.0, max_abs)) {
    throw std::invalid_argument(
        "matrix is not symmetric: max |A_ij - A_ji| = " +
        std::to_string(max_asym));
  }
}

}  // namespace

std::vector<double> eigenvalues_symmetric(std::vector<double>&& values,
                                          uint32_t n) {
  if (n < 1) throw std::invalid_argument("matrix must be at least 1x1");
  if (values.size() != static_cast<size_t>(n) * n) {
    throw std::invalid_argument("matrix buffer size does not match n");
  }
  check_symmetry(values, n);

  double trace = 0.0;
  for (uint32_t i = 0; i < n; ++i) trace += values[static_cast<size_t>(i) * n + i];

  std::vector<double> eigs(n);
  std::vector<double> a = std::move(values);
  const lapack_int info = LAPACKE_dsyevd(
      LAPACK_ROW_MAJOR, 'N', 'U', static_cast<lapack_int>(n), a.data(),
      static_cast<lapack_int>(n), eigs.data());
  if (info != 0) {
    throw std::runtime_error("dsyevd failed with info=" + std::to_string(info));
  }

  double sum = 0.0;
  double max_abs = 0.0;
  for (const double e : eigs) {
    sum += e;
    max_abs = std::max(max_abs, std::abs(e));
  }
  const double tol = static_cast<double>(n) * 1e-8 * std::max(1.0, max_abs);
  if (std::abs(sum - trace) > tol) {
    throw std::runtime_error("eigenvalue sum drifted from trace by " +
                             std::to_string(std::abs(sum - trace)));
  }
  return eigs;  // dsyevd returns ascending order
}

std::vector<double> eigenvalues_symmetric(const PmiMatrix& m) {
  std::vector<double> copy = m.values;
  return eigenvalues_symmetric(std::move(copy), m.n);
}

SpectrumReport spectrum_stats(const std::vector<double>& eigenvalues,
                              int bins) {
  if (eigenvalues.empty()) throw std::invalid_argument("empty spectrum");
  if (bins < 1) throw std::invalid_argument("bins must be >= 1");

  SpectrumReport r;
  r.n = eigenvalues.size();
  r.eigenvalues = eigenvalues;
  std::sort(r.eigenvalues.begin(), r.eigenvalues.end());

  const double n = static_cast<double>(r.n);
  double sum = 0.0;
  double max_abs = 0.0;
  for (const double e : r.eigenvalues) {
    sum += e;
    max_abs = std::max(max_abs, std::abs(e));
  }
  r.trace = sum;
  r.mean = sum / n;
  double m2 = 0.0;
  double m3 = 0.0;
  for (const double e : r.eigenvalues) {
    const double d = e - r.mean;
    m2 += d * d;
    m3 += d * d * d;
  }
  m2 /= n;
  m3 /= n;
  r.stdev = std::sqrt(m2);
  r.odd_moment_3 = m3;
  r.skewness = m2 > 0.0 ? m3 / std::pow(m2, 1.5) : 0.0;
  r.trace_scale_ratio =
      r.stdev > 0.0 ? std::abs(r.trace) / (n * r.stdev) : 0.0;

  // Symmetric support so symmetry around zero is readable off the histogram.
  const double half = max_abs > 0.0 ? max_abs : 1.0;
  r.bin_edges.resize(bins + 1);
  for (int b = 0; b <= bins; ++b) {
    r.bin_edges[b] = -half + 2.0 * half * static_cast<double>(b) / bins;
  }
  r.bin_counts.assign(bins, 0);
  for (const double e : r.eigenvalues) {
    int b = static_cast<int>((e + half) / (2.0 * half) * bins);
    b = std::clamp(b, 0, bins - 1);
    ++r.bin_counts[static_cast<size_t>(b)];
  }

  r.semicircle_reference.resize(bins);
  for (int b = 0; b < bins; ++b) {
    const double center = 0.5 * (r.bin_edges[b] + r.bin_edges[b + 1]);
    const double z = r.stdev > 0.0 ? (center - r.mean) / r.stdev : 0.0;
    r.semicircle_reference[b] =
        std::abs(z) < 2.0 ? std::sqrt(4.0 - z * z) / kTwoPi : 0.0;
  }
  return r;
}

double semicircle_l1(const SpectrumReport& report) {
  if (report.stdev <= 0.0) return 2.0;
  const double n = static_cast<double>(report.n);
  double l1 = 0.0;
  for (size_t b = 0; b < report.bin_counts.size(); ++b) {
    const double width_z =
        (report.bin_edges[b + 1] - report.bin_edges[b]) / report.stdev;
    const double density =
        static_cast<double>(report.bin_counts[b]) / (n * width_z);
    l1 += std::abs(density - report.semicircle_reference[b]) * width_z;
  }
  return l1;
}

PmiMatrix wigner_control(uint32_t n, uint64_t seed) {
  PmiMatrix m;
  m.n = n;
  m.shift = 0.0;
  m.missing_policy = "wigner";
  m.values.assign(static_cast<size_t>(n) * n, 0.0);
  Philox4x32 rng(seed, 0x57494752u);  // dedicated stream
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  for (uint32_t i = 0; i < n; ++i) {
    for (uint32_t j = i; j < n; ++j) {
      const double v = rng.next_gaussian() * scale;
      m.at(i, j) = v;
      m.at(j, i) = v;
    }
  }
  return m;
}

std::string to_json(const SpectrumReport& r) {
  nlohmann::json j{
      {"n", r.n},
      {"trace", r.trace},
      {"mean", r.mean},
      {"stdev", r.stdev},
      {"skewness", r.skewness},
      {"odd_moment_3", r.odd_moment_3},
      {"trace_scale_ratio", r.trace_scale_ratio},
      {"bin_edges", r.bin_edges},
      {"bin_counts", r.bin_counts},
      {"semicircle_reference", r.semicircle_reference},
      {"semicircle_l1", semicircle_l1(r)},
      {"eigenvalues", r.eigenvalues},
  };
  return j.dump(2);
}

void save_spectrum_report(const SpectrumReport& report,
                          const std::string& json_path) {
  std::ofstream out(json_path);
  if (!out) throw std::runtime_error("cannot open for writing: " + json_path);
  out << to_json(report) << '\n';
}

void save_histogram_csv(const SpectrumReport& report,
                        const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << "bin_center,count\n";
  for (size_t b = 0; b < report.bin_counts.size(); ++b) {
    const double center = 0.5 * (report.bin_edges[b] + report.bin_edges[b + 1]);
    out << center << ',' << report.bin_counts[b] << '\n';
  }
}

}  // namespace reflex
