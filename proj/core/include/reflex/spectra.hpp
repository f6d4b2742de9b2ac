#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "reflex/pmi.hpp"

namespace reflex {

// Full spectrum of a dense symmetric matrix, ascending. Validates symmetry
// (relative 1e-10, error reports the worst offender) and that the eigenvalue
// sum reproduces the trace within n * 1e-8 * max|lambda|.
std::vector<double> eigenvalues_symmetric(const PmiMatrix& m);

// In-place variant: consumes the buffer instead of copying the matrix.
std::vector<double> eigenvalues_symmetric(std::vector<double>&& values,
                                          uint32_t n);

struct SpectrumReport {
  size_t n = 0;
  std::vector<double> eigenvalues;  // ascending
  double trace = 0.0;
  double mean = 0.0;
  double stdev = 0.0;
  double skewness = 0.0;      // m3 / m2^(3/2)
  double odd_moment_3 = 0.0;  // central third moment
  double trace_scale_ratio = 0.0;  // |trace| / (n * stdev)
  std::vector<double> bin_edges;   // bins+1 edges over [-max|l|, +max|l|]
  std::vector<uint64_t> bin_counts;
  // Semicircle density (1/2pi) sqrt(4 - x^2) sampled at the standardized
  // bin centers (x - mean)/stdev; zero outside [-2, 2].
  std::vector<double> semicircle_reference;
};

SpectrumReport spectrum_stats(const std::vector<double>& eigenvalues,
                              int bins = 101);

// L1 distance between the standardized histogram density and the semicircle,
// integrated over the histogram support.
double semicircle_l1(const SpectrumReport& report);

// Negative control: symmetric matrix with i.i.d. N(0, 1/n) entries, whose
// spectrum does follow the semicircle law.
PmiMatrix wigner_control(uint32_t n, uint64_t seed);

std::string to_json(const SpectrumReport& report);
void save_spectrum_report(const SpectrumReport& report,
                          const std::string& json_path);
// Two-column CSV (bin_center, count) for external plotting.
void save_histogram_csv(const SpectrumReport& report, const std::string& path);

}  // namespace reflex
