#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "reflex/cooc.hpp"

namespace reflex {

// Dense symmetric matrix of shifted PMI values. The missing policy is part
// of the data: "zero" means unobserved pairs were left at exactly 0 (the
// shift is not subtracted from them), "synthetic" marks model-generated
// matrices that have no notion of missing pairs.
struct PmiMatrix {
  uint32_t n = 0;
  double shift = 0.0;  // ln k
  std::string missing_policy = "zero";
  std::vector<double> values;  // row-major n*n

  double& at(uint32_t i, uint32_t j) {
    return values[static_cast<size_t>(i) * n + j];
  }
  double at(uint32_t i, uint32_t j) const {
    return values[static_cast<size_t>(i) * n + j];
  }
  double trace() const;
};

// Densification refuses vocabularies whose matrix would not be manageable.
inline constexpr uint32_t kMaxDenseDim = 40000;

// Shifted PMI of observed pairs: ln(p(i,j) / (p(i) p(j))) - ln k with
// p(i,j) = #(i,j)/pair_total and p(i) from the co-occurrence marginals.
PmiMatrix pmi_matrix(const SparseCooc& cooc, double shift_k);

// Row-major f64 payload at `path` plus a JSON sidecar at `path + ".json"`.
void save_pmi(const PmiMatrix& pmi, const std::string& path);
PmiMatrix load_pmi(const std::string& path);

}  // namespace reflex
