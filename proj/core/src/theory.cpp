#include "reflex/theory.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "reflex/corpus.hpp"
#include "reflex/rng.hpp"
#include "reflex/spectra.hpp"
#include "reflex/threading.hpp"

namespace reflex {
namespace {

using EMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                           Eigen::RowMajor>;
using EMap = Eigen::Map<EMat>;
using ECMap = Eigen::Map<const EMat>;

// Stream salts so unrelated samplers never share a Philox stream.
enum Salt : uint64_t {
  kSaltEnsemble = 0xE75A'0001,
  kSaltQuadratic = 0xE75A'0002,
  kSaltPartition = 0xE75A'0003,
  kSaltProbes = 0xE75A'0004,
  kSaltDependence = 0xE75A'0005,
  kSaltRotation = 0xE75A'0006,
  kSaltMask = 0xE75A'0007,
  kSaltRecovery = 0xE75A'0008,
  kSaltPmiEnsemble = 0xE75A'0009,
};

constexpr size_t kTrialBlock = 4096;

ECMap map_of(const Mat& m) { return ECMap(m.a.data(), m.rows, m.cols); }

void check_orthogonal(const Mat& q) {
  require(q.rows == q.cols && q.rows > 0, "Q must be square");
  const auto Q = map_of(q);
  const EMat g = Q.transpose() * Q;
  double worst = 0.0;
  for (Eigen::Index i = 0; i < g.rows(); ++i) {
    for (Eigen::Index j = 0; j < g.cols(); ++j) {
      const double target = i == j ? 1.0 : 0.0;
      worst = std::max(worst, std::abs(g(i, j) - target));
    }
  }
  if (worst > 1e-10) {
    throw std::invalid_argument("Q is not orthogonal: ||Q'Q - I||_max = " +
                                std::to_string(worst));
  }
}

void fill_gaussian(double* dst, size_t count, double stdev, Philox4x32& rng) {
  for (size_t i = 0; i < count; ++i) dst[i] = rng.next_gaussian() * stdev;
}

double binomial_limit(double p, uint64_t trials) {
  return p + 3.0 * std::sqrt(p * (1.0 - p) / static_cast<double>(trials));
}

}  // namespace

uint64_t derive_seed(uint64_t master, uint64_t salt, uint64_t index) {
  const auto out = Philox4x32::block(
      {static_cast<uint32_t>(salt), static_cast<uint32_t>(salt >> 32),
       static_cast<uint32_t>(index), static_cast<uint32_t>(index >> 32)},
      {static_cast<uint32_t>(master), static_cast<uint32_t>(master >> 32)});
  return (uint64_t{out[1]} << 32) | out[0];
}

GaussianEnsemble sample_ensemble(uint32_t n, uint32_t d, double sigma2,
                                 uint64_t seed) {
  require(n >= 1 && d >= 1, "ensemble needs n >= 1 and d >= 1");
  require(sigma2 > 0.0, "sigma2 must be positive");
  GaussianEnsemble e;
  e.n = n;
  e.d = d;
  e.sigma2 = sigma2;
  e.seed = seed;
  e.vectors = Mat(n, d);
  const double stdev = std::sqrt(sigma2);
  // Fixed 4096-row blocks with per-block streams: reproducible and
  // parallelizable without changing the draw.
  const size_t blocks = (n + kTrialBlock - 1) / kTrialBlock;
  for (size_t b = 0; b < blocks; ++b) {
    Philox4x32 rng(derive_seed(seed, kSaltEnsemble, b));
    const size_t begin = b * kTrialBlock;
    const size_t end = std::min<size_t>(n, begin + kTrialBlock);
    fill_gaussian(e.vectors.row(begin), (end - begin) * d, stdev, rng);
  }
  return e;
}

Mat ReflectionMask::as_matrix() const {
  Mat q(d, d);
  for (uint32_t i = 0; i < d; ++i) q(i, i) = static_cast<double>(signs[i]);
  return q;
}

ReflectionMask rademacher_mask(uint32_t d, uint64_t seed) {
  require(d >= 1, "mask dimension must be >= 1");
  ReflectionMask m;
  m.d = d;
  m.seed = seed;
  m.signs.resize(d);
  Philox4x32 rng(derive_seed(seed, kSaltMask, 0));
  for (uint32_t i = 0; i < d; ++i) {
    m.signs[i] = static_cast<int8_t>(rng.next_sign());
    if (m.signs[i] > 0) ++m.plus_count;
  }
  return m;
}

ReflectionMask balanced_mask(uint32_t d, uint64_t seed) {
  require(d >= 2 && d % 2 == 0, "balanced mask needs even d");
  ReflectionMask m;
  m.d = d;
  m.seed = seed;
  m.plus_count = d / 2;
  m.signs.assign(d, -1);
  std::fill(m.signs.begin(), m.signs.begin() + d / 2, int8_t{1});
  // Fisher-Yates with the counter-based stream.
  Philox4x32 rng(derive_seed(seed, kSaltMask, 1));
  for (uint32_t i = d - 1; i > 0; --i) {
    const auto j = static_cast<uint32_t>(rng.next_below(i + 1));
    std::swap(m.signs[i], m.signs[j]);
  }
  return m;
}

ReflectionMask block_mask(uint32_t d, uint32_t l) {
  require(d >= 1 && l <= d, "need l <= d");
  ReflectionMask m;
  m.d = d;
  m.plus_count = l;
  m.signs.assign(d, -1);
  std::fill(m.signs.begin(), m.signs.begin() + l, int8_t{1});
  return m;
}

Mat random_rotation(uint32_t d, uint64_t seed) {
  require(d >= 1, "dimension must be >= 1");
  EMat g(d, d);
  Philox4x32 rng(derive_seed(seed, kSaltRotation, 0));
  fill_gaussian(g.data(), static_cast<size_t>(d) * d, 1.0, rng);
  Eigen::HouseholderQR<EMat> qr(g);
  EMat q = qr.householderQ() * EMat::Identity(d, d);
  const EMat r = qr.matrixQR().template triangularView<Eigen::Upper>();
  for (uint32_t i = 0; i < d; ++i) {
    if (r(i, i) < 0) q.col(i) = -q.col(i);
  }
  if (q.determinant() < 0) q.col(d - 1) = -q.col(d - 1);
  Mat out(d, d);
  EMap(out.a.data(), d, d) = q;
  return out;
}

ConcentrationReport quadratic_form_check(const Mat& q, double sigma2,
                                         std::vector<double> t_grid,
                                         uint64_t trials, uint64_t seed,
                                         int threads,
                                         const std::string& claim_suffix) {
  check_orthogonal(q);
  require(sigma2 > 0.0, "sigma2 must be positive");
  require(trials >= 2, "need at least 2 trials");
  const auto d = static_cast<uint32_t>(q.rows);
  const auto Q = map_of(q);

  double trace_q = 0.0;
  double trace_q2 = 0.0;
  for (uint32_t i = 0; i < d; ++i) {
    trace_q += q(i, i);
    for (uint32_t j = 0; j < d; ++j) trace_q2 += q(i, j) * q(j, i);
  }
  const double pred_mean = trace_q * sigma2;
  const double pred_var = (d + trace_q2) * sigma2 * sigma2;
  const double band_unit = std::sqrt(2.0 * d) * sigma2;  // t = 1 deviation

  const size_t blocks = (trials + kTrialBlock - 1) / kTrialBlock;
  struct Partial {
    double sum = 0.0;
    double sum_sq = 0.0;
    std::vector<uint64_t> violations;
  };
  std::vector<Partial> partials(blocks);
  for (auto& p : partials) p.violations.assign(t_grid.size(), 0);

  parallel_blocks(blocks, threads, [&](size_t b) {
    const size_t begin = b * kTrialBlock;
    const size_t end = std::min<size_t>(trials, begin + kTrialBlock);
    const size_t rows = end - begin;
    Philox4x32 rng(derive_seed(seed, kSaltQuadratic, b));
    EMat w(rows, d);
    fill_gaussian(w.data(), rows * d, std::sqrt(sigma2), rng);
    const EMat y = w * Q.transpose();
    auto& p = partials[b];
    for (size_t t = 0; t < rows; ++t) {
      const double x = y.row(t).cwiseProduct(w.row(t)).sum();
      p.sum += x;
      p.sum_sq += x * x;
      const double dev = std::abs(x - pred_mean);
      for (size_t k = 0; k < t_grid.size(); ++k) {
        if (dev > t_grid[k] * band_unit) ++p.violations[k];
      }
    }
  });

  double sum = 0.0;
  double sum_sq = 0.0;
  std::vector<uint64_t> violations(t_grid.size(), 0);
  for (const auto& p : partials) {
    sum += p.sum;
    sum_sq += p.sum_sq;
    for (size_t k = 0; k < t_grid.size(); ++k) violations[k] += p.violations[k];
  }
  const auto nt = static_cast<double>(trials);
  const double mean = sum / nt;
  const double var = (sum_sq - nt * mean * mean) / (nt - 1.0);

  ConcentrationReport r;
  r.claim = "lemma1/eq5-8" + claim_suffix;
  r.trials = trials;
  r.seed = seed;
  r.empirical_mean = mean;
  r.empirical_var = var;
  r.predicted_mean = pred_mean;
  r.predicted_var = pred_var;
  r.t_grid = std::move(t_grid);
  r.chebyshev_violations.resize(r.t_grid.size());
  r.chebyshev_limits.resize(r.t_grid.size());
  bool cheb_ok = true;
  for (size_t k = 0; k < r.t_grid.size(); ++k) {
    r.chebyshev_violations[k] = static_cast<double>(violations[k]) / nt;
    const double p = std::min(1.0, 1.0 / (r.t_grid[k] * r.t_grid[k]));
    r.chebyshev_limits[k] = binomial_limit(p, trials);
    cheb_ok = cheb_ok && r.chebyshev_violations[k] <= r.chebyshev_limits[k];
  }
  const double mean_tol = 3.0 * std::sqrt(std::max(var, 0.0) / nt);
  const double var_tol = 0.05 * pred_var + 1e-12;
  r.extras["d"] = d;
  r.extras["sigma2"] = sigma2;
  r.extras["trace_q"] = trace_q;
  r.extras["trace_q2"] = trace_q2;
  r.extras["mean_tol"] = mean_tol;
  r.extras["var_tol"] = var_tol;
  r.pass = std::abs(mean - pred_mean) <= mean_tol &&
           std::abs(var - pred_var) <= var_tol && cheb_ok;
  return r;
}

ConcentrationReport norm_concentration_check(uint32_t d, uint64_t trials,
                                             uint64_t seed, int threads) {
  auto report = quadratic_form_check(identity(d), 1.0 / d, {1, 2, 4, 8},
                                     trials, seed, threads, "");
  report.claim = "corollary1/eq9";
  return report;
}

namespace {

std::vector<uint32_t> probe_indices(uint32_t n, uint32_t probes) {
  std::vector<uint32_t> idx;
  idx.reserve(probes);
  for (uint32_t k = 0; k < probes; ++k) {
    idx.push_back(static_cast<uint32_t>(
        static_cast<uint64_t>(k) * n / probes));
  }
  idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
  return idx;
}

// Z_j for each probe row of `probe_vectors` against contexts Q w_i over the
// whole ensemble: Z_j = sum_i p_i exp(probe_j' Q w_i).
void partition_values(const EMat& probe_vectors, const EMat& w,
                      const Eigen::Ref<const EMat>& q,
                      const std::vector<double>& probs, double* z_out) {
  const EMat a = probe_vectors * q;       // J x d
  const EMat s = a * w.transpose();       // J x n
  const auto j_count = static_cast<size_t>(s.rows());
  const auto n = static_cast<size_t>(s.cols());
  for (size_t j = 0; j < j_count; ++j) {
    double z = 0.0;
    for (size_t i = 0; i < n; ++i) {
      const double v = s(static_cast<Eigen::Index>(j),
                         static_cast<Eigen::Index>(i));
      if (v > 700.0) {
        throw std::runtime_error("partition function overflow: w'Qw = " +
                                 std::to_string(v));
      }
      z += probs[i] * std::exp(v);
    }
    z_out[j] = z;
  }
}

struct PartitionStats {
  double mean = 0.0;       // over fresh probes and resamples
  double mean_se = 0.0;    // cluster SE over resample means
  double cond_var = 0.0;   // Var[Z_j | w_j], averaged over probes
};

PartitionStats partition_run(uint32_t n, uint32_t d, double alpha,
                             const Mat& q, uint32_t probes,
                             uint32_t resamples, uint64_t seed,
                             uint64_t size_salt, const EMat& fixed_probes,
                             int threads) {
  const std::vector<double> probs = rank_unigram_probs(n, alpha);
  const std::vector<uint32_t> idx = probe_indices(n, probes);
  const auto j_count = idx.size();
  const auto Q = map_of(q);

  std::vector<double> z_fresh(resamples * j_count);
  std::vector<double> z_fixed(resamples * j_count);

  parallel_blocks(resamples, threads, [&](size_t r) {
    Philox4x32 rng(derive_seed(seed, kSaltPartition + size_salt, r));
    EMat w(n, d);
    fill_gaussian(w.data(), static_cast<size_t>(n) * d,
                  std::sqrt(1.0 / d), rng);
    EMat fresh(j_count, d);
    for (size_t k = 0; k < j_count; ++k) fresh.row(k) = w.row(idx[k]);
    partition_values(fresh, w, Q, probs, &z_fresh[r * j_count]);
    // Plant the fixed probe words and measure Z with everything else
    // resampled: that is the conditional distribution of the claim.
    for (size_t k = 0; k < j_count; ++k) w.row(idx[k]) = fixed_probes.row(k);
    partition_values(fixed_probes, w, Q, probs, &z_fixed[r * j_count]);
  });

  PartitionStats out;
  std::vector<double> resample_means(resamples, 0.0);
  for (size_t r = 0; r < resamples; ++r) {
    double m = 0.0;
    for (size_t k = 0; k < j_count; ++k) m += z_fresh[r * j_count + k];
    resample_means[r] = m / static_cast<double>(j_count);
    out.mean += resample_means[r];
  }
  out.mean /= static_cast<double>(resamples);
  double var_of_means = 0.0;
  for (const double m : resample_means) {
    var_of_means += (m - out.mean) * (m - out.mean);
  }
  var_of_means /= static_cast<double>(resamples - 1);
  out.mean_se = std::sqrt(var_of_means / static_cast<double>(resamples));

  for (size_t k = 0; k < j_count; ++k) {
    double m = 0.0;
    for (size_t r = 0; r < resamples; ++r) m += z_fixed[r * j_count + k];
    m /= static_cast<double>(resamples);
    double v = 0.0;
    for (size_t r = 0; r < resamples; ++r) {
      const double dlt = z_fixed[r * j_count + k] - m;
      v += dlt * dlt;
    }
    out.cond_var += v / static_cast<double>(resamples - 1);
  }
  out.cond_var /= static_cast<double>(j_count);
  return out;
}

}  // namespace

ConcentrationReport partition_function_check(const PartitionCheckParams& p,
                                             const Mat& q, uint64_t seed,
                                             int threads) {
  require(p.n >= 100, "partition check needs n >= 100");
  require(p.d >= 10, "partition check needs d >= 10");
  require(p.alpha > 0.0 && p.alpha <= 1.0, "alpha must lie in (0, 1]");
  require(p.resamples >= 4, "need at least 4 resamples");
  check_orthogonal(q);
  require(q.rows == p.d, "Q dimension mismatch");

  EMat fixed_probes(probe_indices(p.n, p.probes).size(), p.d);
  {
    Philox4x32 rng(derive_seed(seed, kSaltProbes, 0));
    fill_gaussian(fixed_probes.data(),
                  static_cast<size_t>(fixed_probes.rows()) * p.d,
                  std::sqrt(1.0 / p.d), rng);
  }

  const PartitionStats at_n = partition_run(p.n, p.d, p.alpha, q, p.probes,
                                            p.resamples, seed, 0,
                                            fixed_probes, threads);
  // 4n reuses the same fixed probe vectors; only the crowd around them grows.
  EMat fixed_probes_4n(probe_indices(4 * p.n, p.probes).size(), p.d);
  fixed_probes_4n = fixed_probes.topRows(fixed_probes_4n.rows());
  const PartitionStats at_4n =
      partition_run(4 * p.n, p.d, p.alpha, q, p.probes, p.resamples, seed, 1,
                    fixed_probes_4n, threads);

  const double predicted_mean = 1.0 + 1.0 / (2.0 * p.d);
  // Bias of the 1 + 1/(2d) prediction itself (Maclaurin truncation).
  const double remainder =
      std::exp(1.0 / (2.0 * p.d)) - 1.0 - 1.0 / (2.0 * p.d);
  const double mean_tol = 3.0 * at_n.mean_se + remainder;
  const double ratio = at_n.cond_var / at_4n.cond_var;
  const double predicted_ratio =
      std::pow(4.0, std::min(1.0, 2.0 * p.alpha));

  ConcentrationReport r;
  r.claim = "lemma2/eq10,18";
  r.trials = static_cast<uint64_t>(p.resamples) * p.probes;
  r.seed = seed;
  r.empirical_mean = at_n.mean;
  r.predicted_mean = predicted_mean;
  r.empirical_var = at_n.cond_var;
  r.predicted_var = predicted_ratio * at_4n.cond_var;
  r.extras["n"] = p.n;
  r.extras["d"] = p.d;
  r.extras["alpha"] = p.alpha;
  r.extras["probes"] = p.probes;
  r.extras["resamples"] = p.resamples;
  r.extras["mean_tol"] = mean_tol;
  r.extras["maclaurin_remainder"] = remainder;
  r.extras["mean_4n"] = at_4n.mean;
  r.extras["cond_var_n"] = at_n.cond_var;
  r.extras["cond_var_4n"] = at_4n.cond_var;
  r.extras["var_ratio"] = ratio;
  r.extras["predicted_ratio"] = predicted_ratio;
  r.extras["ratio_slack"] = 2.0;
  const bool mean_ok = std::abs(at_n.mean - predicted_mean) <= mean_tol;
  const bool ratio_ok =
      ratio >= predicted_ratio / 2.0 && ratio <= predicted_ratio * 2.0;
  r.pass = mean_ok && ratio_ok;
  return r;
}

PmiMatrix synthetic_pmi(const GaussianEnsemble& ensemble,
                        const ReflectionMask& mask) {
  require(ensemble.d == mask.d, "ensemble and mask dimensions differ");
  const uint32_t n = ensemble.n;
  const uint32_t d = ensemble.d;
  const uint32_t l = mask.plus_count;

  // Split columns by sign so the product accumulates symmetrically:
  // M = Wp Wp' - Wn Wn'.
  EMat wp(n, l);
  EMat wn(n, d - l);
  {
    const auto W = map_of(ensemble.vectors);
    uint32_t cp = 0;
    uint32_t cn = 0;
    for (uint32_t k = 0; k < d; ++k) {
      if (mask.signs[k] > 0) {
        wp.col(cp++) = W.col(k);
      } else {
        wn.col(cn++) = W.col(k);
      }
    }
  }

  PmiMatrix m;
  m.n = n;
  m.shift = 0.0;
  m.missing_policy = "synthetic";
  m.values.assign(static_cast<size_t>(n) * n, 0.0);
  EMap dst(m.values.data(), n, n);
  auto upper = dst.selfadjointView<Eigen::Upper>();
  if (l > 0) upper.rankUpdate(wp, 1.0);
  if (d - l > 0) upper.rankUpdate(wn, -1.0);
  for (uint32_t i = 0; i < n; ++i) {
    for (uint32_t j = i + 1; j < n; ++j) m.at(j, i) = m.at(i, j);
  }
  return m;
}

ConcentrationReport pmi_ensemble_check(uint32_t n, uint32_t d, uint32_t l,
                                       uint32_t seeds, uint64_t seed,
                                       int threads) {
  require(n >= 2 && d >= 2 && l <= d, "bad ensemble geometry");
  require(seeds >= 1, "need at least one seed");

  struct SeedStats {
    double diag_mean = 0.0;
    double diag_var = 0.0;
    double off_mean = 0.0;
    double off_var = 0.0;
    double skew = 0.0;
    double control_trace = 0.0;
  };
  std::vector<SeedStats> stats(seeds);

  parallel_blocks(seeds, threads, [&](size_t s) {
    const uint64_t sub = derive_seed(seed, kSaltPmiEnsemble, s);
    const GaussianEnsemble ens = sample_ensemble(n, d, 1.0 / d, sub);
    PmiMatrix m = synthetic_pmi(ens, block_mask(d, l));

    auto& st = stats[s];
    double dsum = 0.0;
    double dsq = 0.0;
    for (uint32_t i = 0; i < n; ++i) {
      dsum += m.at(i, i);
      dsq += m.at(i, i) * m.at(i, i);
    }
    const double nn = n;
    st.diag_mean = dsum / nn;
    st.diag_var = dsq / nn - st.diag_mean * st.diag_mean;

    double osum = 0.0;
    double osq = 0.0;
    const double pairs = nn * (nn - 1.0) / 2.0;
    for (uint32_t i = 0; i < n; ++i) {
      for (uint32_t j = i + 1; j < n; ++j) {
        osum += m.at(i, j);
        osq += m.at(i, j) * m.at(i, j);
      }
    }
    st.off_mean = osum / pairs;
    st.off_var = osq / pairs - st.off_mean * st.off_mean;

    const auto eigs = eigenvalues_symmetric(std::move(m.values), n);
    st.skew = spectrum_stats(eigs).skewness;

    // Control: all-plus mask turns the diagonal into squared norms.
    const PmiMatrix control = synthetic_pmi(ens, block_mask(d, d));
    st.control_trace = control.trace();
  });

  double diag_mean = 0.0;
  double diag_var = 0.0;
  double off_var = 0.0;
  double skew_sum = 0.0;
  double max_abs_skew = 0.0;
  double control_trace = 0.0;
  for (const auto& st : stats) {
    diag_mean += st.diag_mean;
    diag_var += st.diag_var;
    off_var += st.off_var;
    skew_sum += st.skew;
    max_abs_skew = std::max(max_abs_skew, std::abs(st.skew));
    control_trace += st.control_trace;
  }
  const double k = seeds;
  diag_mean /= k;
  diag_var /= k;
  off_var /= k;
  control_trace /= k;
  const double mean_skew = skew_sum / k;

  const double pred_diag_mean = (2.0 * l - static_cast<double>(d)) / d;
  const double pred_diag_var = 2.0 / d;
  const double pred_off_var = 1.0 / d;
  const double diag_mean_tol =
      3.0 * std::sqrt(2.0 / d) / std::sqrt(static_cast<double>(n) * seeds);

  ConcentrationReport r;
  r.claim = "pmi-ensemble/eq24-25,29-30";
  r.trials = seeds;
  r.seed = seed;
  r.empirical_mean = diag_mean;
  r.predicted_mean = pred_diag_mean;
  r.empirical_var = off_var;
  r.predicted_var = pred_off_var;
  r.extras["n"] = n;
  r.extras["d"] = d;
  r.extras["l"] = l;
  r.extras["diag_var"] = diag_var;
  r.extras["pred_diag_var"] = pred_diag_var;
  r.extras["diag_mean_tol"] = diag_mean_tol;
  r.extras["mean_skewness"] = mean_skew;
  r.extras["max_abs_skewness"] = max_abs_skew;
  r.extras["skew_limit"] = 0.2;
  r.extras["control_trace"] = control_trace;
  r.extras["control_trace_target"] = n;
  r.pass = std::abs(diag_mean - pred_diag_mean) <= diag_mean_tol &&
           std::abs(off_var - pred_off_var) <= 0.05 * pred_off_var &&
           std::abs(diag_var - pred_diag_var) <= 0.10 * pred_diag_var &&
           std::abs(mean_skew) < 0.2 &&
           std::abs(control_trace - n) <= 0.05 * n;
  return r;
}

ConcentrationReport entry_dependence_check(uint32_t n,
                                           const std::vector<uint32_t>& dims,
                                           uint64_t trials, uint64_t seed,
                                           int threads) {
  require(n >= 4, "need n >= 4 for two disjoint entry pairs");
  require(trials >= 1000, "need at least 1000 matrix draws");
  require(!dims.empty(), "need at least one dimension");

  ConcentrationReport r;
  r.claim = "dependence/eq26-28";
  r.trials = trials;
  r.seed = seed;
  r.t_grid = {};
  bool ok = true;
  double prev_same_row = 0.0;
  double prev_se = 0.0;

  for (size_t di = 0; di < dims.size(); ++di) {
    const uint32_t d = dims[di];
    require(d >= 2, "dims must be >= 2");
    const auto mask = block_mask(d, d / 2);

    const size_t blocks = (trials + kTrialBlock - 1) / kTrialBlock;
    struct Sums {
      double a = 0, b = 0, c = 0, ab = 0, ac = 0;
    };
    std::vector<Sums> partials(blocks);
    parallel_blocks(blocks, threads, [&](size_t blk) {
      const size_t begin = blk * kTrialBlock;
      const size_t end = std::min<size_t>(trials, begin + kTrialBlock);
      Philox4x32 rng(derive_seed(seed, kSaltDependence + d, blk));
      std::vector<double> w(static_cast<size_t>(n) * d);
      auto& p = partials[blk];
      const double stdev = std::sqrt(1.0 / d);
      for (size_t t = begin; t < end; ++t) {
        fill_gaussian(w.data(), w.size(), stdev, rng);
        double m01 = 0, m23 = 0, m02 = 0;
        for (uint32_t k = 0; k < d; ++k) {
          const double s = mask.signs[k];
          m01 += s * w[0 * d + k] * w[1 * d + k];
          m23 += s * w[2 * d + k] * w[3 * d + k];
          m02 += s * w[0 * d + k] * w[2 * d + k];
        }
        p.a += m01;
        p.b += m23;
        p.c += m02;
        p.ab += m01 * m23;
        p.ac += m01 * m02;
      }
    });
    Sums total;
    for (const auto& p : partials) {
      total.a += p.a;
      total.b += p.b;
      total.c += p.c;
      total.ab += p.ab;
      total.ac += p.ac;
    }
    const double nt = static_cast<double>(trials);
    const double cov_unrelated =
        total.ab / nt - (total.a / nt) * (total.b / nt);
    const double cov_same_row =
        total.ac / nt - (total.a / nt) * (total.c / nt);
    // Entries have variance ~ 1/d, so the covariance estimator's standard
    // error is ~ 1/(d sqrt(trials)); the recorded bound allows 4 of those.
    const double se = 1.0 / (d * std::sqrt(nt));
    const double bound = 4.0 / (std::sqrt(nt) * d);

    const std::string tag = "_d" + std::to_string(d);
    r.extras["cov_unrelated" + tag] = cov_unrelated;
    r.extras["cov_same_row" + tag] = cov_same_row;
    r.extras["cov_same_row_times_d" + tag] = cov_same_row * d;
    r.extras["cov_unrelated_times_d" + tag] = cov_unrelated * d;
    r.extras["bound" + tag] = bound;

    ok = ok && std::abs(cov_unrelated) <= bound &&
         std::abs(cov_same_row) <= bound;
    if (di > 0) {
      // Non-increasing in d, within Monte Carlo noise.
      ok = ok && std::abs(cov_same_row) <=
                     std::abs(prev_same_row) + 3.0 * (se + prev_se);
    }
    prev_same_row = cov_same_row;
    prev_se = se;
  }
  r.extras["n"] = n;
  r.pass = ok;
  return r;
}

ReflectionEstimate estimate_reflection(const Mat& w, const Mat& c) {
  require(w.rows == c.rows && w.cols == c.cols,
          "W and C must have identical shapes");
  require(w.rows >= w.cols, "need n >= d");
  const auto n = static_cast<Eigen::Index>(w.rows);
  const auto d = static_cast<Eigen::Index>(w.cols);
  const auto W = map_of(w);
  const auto C = map_of(c);

  {
    Eigen::ColPivHouseholderQR<EMat> qr_w(W);
    if (qr_w.rank() < d) throw std::invalid_argument("W is rank deficient");
    Eigen::ColPivHouseholderQR<EMat> qr_c(C);
    if (qr_c.rank() < d) throw std::invalid_argument("C is rank deficient");
  }
  (void)n;

  const EMat m = W.transpose() * C;
  Eigen::JacobiSVD<EMat> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const EMat q = svd.matrixV() * svd.matrixU().transpose();

  ReflectionEstimate est;
  est.d = static_cast<uint32_t>(d);
  est.q_hat = Mat(d, d);
  EMap(est.q_hat.a.data(), d, d) = q;
  est.involution_score =
      (q * q - EMat::Identity(d, d)).norm() / std::sqrt(static_cast<double>(d));
  const EMat sym = 0.5 * (q + q.transpose());
  Eigen::SelfAdjointEigenSolver<EMat> eig(sym);
  for (Eigen::Index i = 0; i < d; ++i) {
    if (eig.eigenvalues()[i] > 0.0) ++est.plus_count;
  }
  return est;
}

ConcentrationReport reflection_recovery_check(
    const std::vector<uint32_t>& dims, double noise_stdev, uint64_t seed) {
  require(!dims.empty(), "need at least one dimension");
  ConcentrationReport r;
  r.claim = "reflection/eq20-21,30";
  r.seed = seed;
  bool ok = true;
  for (const uint32_t d : dims) {
    const uint32_t n = 8 * d;
    const uint64_t sub = derive_seed(seed, kSaltRecovery, d);
    const GaussianEnsemble ens = sample_ensemble(n, d, 1.0 / d, sub);
    const ReflectionMask mask = rademacher_mask(d, sub);

    Mat c(n, d);
    Philox4x32 noise(derive_seed(sub, kSaltRecovery, 1));
    const double eps = noise_stdev / std::sqrt(static_cast<double>(d));
    for (uint32_t i = 0; i < n; ++i) {
      for (uint32_t k = 0; k < d; ++k) {
        c(i, k) = ens.vectors(i, k) * mask.signs[k] +
                  noise.next_gaussian() * eps;
      }
    }
    const ReflectionEstimate est = estimate_reflection(ens.vectors, c);
    const std::string tag = "_d" + std::to_string(d);
    r.extras["true_plus_count" + tag] = mask.plus_count;
    r.extras["plus_count" + tag] = est.plus_count;
    r.extras["involution_score" + tag] = est.involution_score;
    ok = ok && est.plus_count == mask.plus_count &&
         est.involution_score < 0.1;
  }
  r.trials = dims.size();
  r.extras["noise_stdev"] = noise_stdev;
  r.extras["involution_limit"] = 0.1;
  r.pass = ok;
  return r;
}

std::string to_json(const ConcentrationReport& r) {
  nlohmann::json j{
      {"claim", r.claim},
      {"trials", r.trials},
      {"seed", r.seed},
      {"empirical_mean", r.empirical_mean},
      {"empirical_var", r.empirical_var},
      {"predicted_mean", r.predicted_mean},
      {"predicted_var", r.predicted_var},
      {"t_grid", r.t_grid},
      {"chebyshev_violations", r.chebyshev_violations},
      {"chebyshev_limits", r.chebyshev_limits},
      {"extras", r.extras},
      {"pass", r.pass},
  };
  return j.dump(2);
}

void save_report(const ConcentrationReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << to_json(report) << '\n';
}

}  // namespace reflex
