#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "reflex/mat.hpp"
#include "reflex/pmi.hpp"

namespace reflex {

// n i.i.d. word vectors, rows of `vectors`, each N(0, sigma2 * I).
struct GaussianEnsemble {
  uint32_t n = 0;
  uint32_t d = 0;
  double sigma2 = 0.0;
  uint64_t seed = 0;
  Mat vectors;  // n x d
};

GaussianEnsemble sample_ensemble(uint32_t n, uint32_t d, double sigma2,
                                 uint64_t seed);

// Signature involution: diag(signs) with signs in {+1,-1}. Q^2 = I exactly.
struct ReflectionMask {
  uint32_t d = 0;
  std::vector<int8_t> signs;
  uint32_t plus_count = 0;  // l
  uint64_t seed = 0;

  Mat as_matrix() const;
};

ReflectionMask rademacher_mask(uint32_t d, uint64_t seed);  // i.i.d. signs
ReflectionMask balanced_mask(uint32_t d, uint64_t seed);    // exactly d/2 each
ReflectionMask block_mask(uint32_t d, uint32_t l);  // first l entries +1

// Orthogonal matrix from the QR of a Gaussian matrix, det forced to +1.
Mat random_rotation(uint32_t d, uint64_t seed);

// Outcome of one Monte Carlo claim check. `pass` is recomputable from the
// recorded numbers and the tolerances stored in `extras`.
struct ConcentrationReport {
  std::string claim;  // equation tag under test
  uint64_t trials = 0;
  uint64_t seed = 0;
  double empirical_mean = 0.0;
  double empirical_var = 0.0;
  double predicted_mean = 0.0;
  double predicted_var = 0.0;
  std::vector<double> t_grid;
  std::vector<double> chebyshev_violations;  // observed fraction per t
  std::vector<double> chebyshev_limits;      // 1/t^2 + 3 binomial SE per t
  std::map<std::string, double> extras;
  bool pass = false;
};

std::string to_json(const ConcentrationReport& report);
void save_report(const ConcentrationReport& report, const std::string& path);

// X = w' Q w for w ~ N(0, sigma2 I): mean Tr(Q) sigma2, variance
// (d + Tr(Q^2)) sigma2^2, and Pr(|X - mean| > t sqrt(2d) sigma2) <= 1/t^2
// on the given t grid. Throws if Q is not orthogonal (reports ||Q'Q - I||).
ConcentrationReport quadratic_form_check(const Mat& q, double sigma2,
                                         std::vector<double> t_grid,
                                         uint64_t trials, uint64_t seed,
                                         int threads = 1,
                                         const std::string& claim_suffix = "");

// Norm concentration (Q = identity, sigma2 = 1/d).
ConcentrationReport norm_concentration_check(uint32_t d, uint64_t trials,
                                             uint64_t seed, int threads = 1);

// Partition function Z_j = sum_i p_i exp(w_j' Q w_i) with rank-mode unigram
// probabilities. Fixed probe words are planted into resampled ensembles, so
// the reported variance is the conditional Var[Z_j | w_j] of the claim; the
// check also reruns at 4n and compares the variance ratio against the
// predicted decay rate 4^min(1, 2 alpha).
struct PartitionCheckParams {
  uint32_t n = 10000;
  uint32_t d = 100;
  double alpha = 1.0;
  uint32_t probes = 64;
  uint32_t resamples = 32;
};

ConcentrationReport partition_function_check(const PartitionCheckParams& p,
                                             const Mat& q, uint64_t seed,
                                             int threads = 1);

// W diag(signs) W' with symmetric accumulation (bit-exact symmetry).
PmiMatrix synthetic_pmi(const GaussianEnsemble& ensemble,
                        const ReflectionMask& mask);

// Entry moments + spectrum symmetry of the synthetic PMI ensemble, averaged
// over `seeds` independent draws, plus the l = d control.
ConcentrationReport pmi_ensemble_check(uint32_t n, uint32_t d, uint32_t l,
                                       uint32_t seeds, uint64_t seed,
                                       int threads = 1);

// Covariance of distinct PMI entries (same-row and unrelated) across many
// small-n draws, for each dimension in `dims`.
ConcentrationReport entry_dependence_check(uint32_t n,
                                           const std::vector<uint32_t>& dims,
                                           uint64_t trials, uint64_t seed,
                                           int threads = 1);

// Orthogonal Procrustes fit of C ~ W Q': Q_hat = V U' from the SVD of W'C.
struct ReflectionEstimate {
  uint32_t d = 0;
  Mat q_hat;                       // orthogonal d x d
  double involution_score = 0.0;   // ||Q_hat^2 - I||_F / sqrt(d)
  uint32_t plus_count = 0;  // positive eigenvalues of (Q_hat + Q_hat')/2
};

ReflectionEstimate estimate_reflection(const Mat& w, const Mat& c);

// Synthetic recovery: C = W diag(signs) + noise, noise_stdev/sqrt(d) per
// coordinate; reports recovered plus_count and involution score per d.
ConcentrationReport reflection_recovery_check(
    const std::vector<uint32_t>& dims, double noise_stdev, uint64_t seed);

// Deterministic sub-seed derivation (Philox block of (salt, index) under the
// master seed), used to hand independent streams to trials and shards.
uint64_t derive_seed(uint64_t master, uint64_t salt, uint64_t index);

}  // namespace reflex
