#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>

namespace oracles {
namespace {

using cd = std::complex<double>;

// Monic characteristic polynomial coefficients via Faddeev-LeVerrier:
// p(x) = x^n + c[0] x^(n-1) + ... + c[n-1].
std::vector<double> charpoly_coeffs(std::span<const double> a, int n) {
  auto mul = [n](const std::vector<double>& x, const std::vector<double>& y) {
    std::vector<double> z(static_cast<size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i) {
      for (int k = 0; k < n; ++k) {
        const double xik = x[i * n + k];
        for (int j = 0; j < n; ++j) z[i * n + j] += xik * y[k * n + j];
      }
    }
    return z;
  };
  std::vector<double> m(static_cast<size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i) m[i * n + i] = 1.0;  // M_1 = I
  std::vector<double> coeffs;
  double c = 0.0;
  for (int k = 1; k <= n; ++k) {
    const std::vector<double> am = mul({a.begin(), a.end()}, m);
    double tr = 0.0;
    for (int i = 0; i < n; ++i) tr += am[i * n + i];
    c = -tr / k;
    coeffs.push_back(c);
    m = am;
    for (int i = 0; i < n; ++i) m[i * n + i] += c;
  }
  return coeffs;
}

}  // namespace

std::vector<double> charpoly_eigenvalues(std::span<const double> matrix,
                                         int n) {
  if (n < 1 || n > 6) throw std::invalid_argument("oracle handles n in 1..6");
  const auto coeffs = charpoly_coeffs(matrix, n);

  // Durand-Kerner on the monic polynomial.
  auto eval = [&](cd z) {
    cd p = 1.0;
    for (int k = 0; k < n; ++k) p = p * z + coeffs[k];
    return p;
  };
  std::vector<cd> roots(n);
  const cd base(0.4, 0.9);
  cd pw = 1.0;
  for (int i = 0; i < n; ++i) {
    pw *= base;
    roots[i] = pw;
  }
  for (int iter = 0; iter < 1000; ++iter) {
    double worst = 0.0;
    for (int i = 0; i < n; ++i) {
      cd denom = 1.0;
      for (int j = 0; j < n; ++j) {
        if (j != i) denom *= roots[i] - roots[j];
      }
      const cd delta = eval(roots[i]) / denom;
      roots[i] -= delta;
      worst = std::max(worst, std::abs(delta));
    }
    if (worst < 1e-13) break;
  }
  std::vector<double> out(n);
  for (int i = 0; i < n; ++i) out[i] = roots[i].real();
  std::sort(out.begin(), out.end());
  return out;
}

BruteCooc brute_cooccurrences(std::span<const uint32_t> ids, uint32_t window,
                              uint32_t n) {
  BruteCooc out;
  out.marginals.assign(n, 0);
  const uint32_t no_word = UINT32_MAX;
  for (size_t t = 0; t < ids.size(); ++t) {
    for (uint32_t o = 1; o <= window; ++o) {
      if (t + o >= ids.size()) break;
      const uint32_t a = ids[t];
      const uint32_t b = ids[t + o];
      if (a == no_word || b == no_word) continue;
      const auto lo = std::min(a, b);
      const auto hi = std::max(a, b);
      ++out.counts[{lo, hi}];
      ++out.marginals[a];
      ++out.marginals[b];
      ++out.pair_total;
    }
  }
  return out;
}

BruteAnalogy brute_three_cos_mul(std::span<const double> vectors, uint32_t n,
                                 uint32_t d, uint32_t a, uint32_t b,
                                 uint32_t c, double epsilon) {
  auto cos01 = [&](uint32_t x, uint32_t y) {
    double dot = 0.0;
    double nx = 0.0;
    double ny = 0.0;
    for (uint32_t m = 0; m < d; ++m) {
      const double xv = vectors[static_cast<size_t>(x) * d + m];
      const double yv = vectors[static_cast<size_t>(y) * d + m];
      dot += xv * yv;
      nx += xv * xv;
      ny += yv * yv;
    }
    return (1.0 + dot / (std::sqrt(nx) * std::sqrt(ny))) / 2.0;
  };
  BruteAnalogy best{UINT32_MAX, -1.0};
  for (uint32_t x = 0; x < n; ++x) {
    if (x == a || x == b || x == c) continue;
    const double score =
        cos01(x, b) * cos01(x, c) / (cos01(x, a) + epsilon);
    if (score > best.score) best = {x, score};
  }
  return best;
}

uint64_t count_tokens_bytewise(std::string_view text) {
  uint64_t count = 0;
  bool in_token = false;
  for (const char ch : text) {
    const bool ws = ch == ' ' || ch == '\n' || ch == '\t' || ch == '\r' ||
                    ch == '\v' || ch == '\f';
    if (!ws && !in_token) ++count;
    in_token = !ws;
  }
  return count;
}

double harmonic_generalized(size_t n, double alpha) {
  double h = 0.0;
  for (size_t k = 1; k <= n; ++k) {
    h += std::pow(static_cast<double>(k), alpha - 1.0);
  }
  return h;
}

}  // namespace oracles
