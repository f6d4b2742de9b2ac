#include "reflex/pmi.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace reflex {

double PmiMatrix::trace() const {
  double t = 0.0;
  for (uint32_t i = 0; i < n; ++i) t += at(i, i);
  return t;
}

PmiMatrix pmi_matrix(const SparseCooc& cooc, double shift_k) {
  if (shift_k < 1.0) throw std::invalid_argument("shift k must be >= 1");
  if (cooc.pair_total == 0) {
    throw std::invalid_argument("empty co-occurrence counts");
  }
  if (cooc.n > kMaxDenseDim) {
    const double gib = static_cast<double>(cooc.n) * cooc.n * 8.0 /
                       (1024.0 * 1024.0 * 1024.0);
    throw std::invalid_argument(
        "vocabulary of " + std::to_string(cooc.n) +
        " words would need a " + std::to_string(gib) +
        " GiB dense PMI matrix (limit " + std::to_string(kMaxDenseDim) + ")");
  }

  PmiMatrix pmi;
  pmi.n = cooc.n;
  pmi.shift = std::log(shift_k);
  pmi.missing_policy = "zero";
  pmi.values.assign(static_cast<size_t>(cooc.n) * cooc.n, 0.0);

  const double pair_total = static_cast<double>(cooc.pair_total);
  const double marginal_total = 2.0 * pair_total;
  for (const auto& e : cooc.entries) {
    const double p_ij = static_cast<double>(e.count) / pair_total;
    const double p_i =
        static_cast<double>(cooc.word_context_totals[e.i]) / marginal_total;
    const double p_j =
        static_cast<double>(cooc.word_context_totals[e.j]) / marginal_total;
    const double v = std::log(p_ij / (p_i * p_j)) - pmi.shift;
    pmi.at(e.i, e.j) = v;
    pmi.at(e.j, e.i) = v;
  }
  return pmi;
}

void save_pmi(const PmiMatrix& pmi, const std::string& path) {
  {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out.write(reinterpret_cast<const char*>(pmi.values.data()),
              static_cast<std::streamsize>(pmi.values.size() *
                                           sizeof(double)));
    if (!out) throw std::runtime_error("write failed: " + path);
  }
  nlohmann::json sidecar{
      {"n", pmi.n},
      {"shift", pmi.shift},
      {"missing_policy", pmi.missing_policy},
  };
  std::ofstream meta(path + ".json");
  if (!meta) throw std::runtime_error("cannot open for writing: " + path +
                                      ".json");
  meta << sidecar.dump(2) << '\n';
}

PmiMatrix load_pmi(const std::string& path) {
  nlohmann::json sidecar;
  {
    std::ifstream meta(path + ".json");
    if (!meta) {
      throw std::runtime_error("missing PMI sidecar: " + path + ".json");
    }
    meta >> sidecar;
  }
  PmiMatrix pmi;
  pmi.n = sidecar.at("n").get<uint32_t>();
  pmi.shift = sidecar.at("shift").get<double>();
  pmi.missing_policy = sidecar.at("missing_policy").get<std::string>();
  pmi.values.resize(static_cast<size_t>(pmi.n) * pmi.n);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open PMI payload: " + path);
  in.read(reinterpret_cast<char*>(pmi.values.data()),
          static_cast<std::streamsize>(pmi.values.size() * sizeof(double)));
  if (in.gcount() !=
      static_cast<std::streamsize>(pmi.values.size() * sizeof(double))) {
    throw std::runtime_error("truncated PMI payload: " + path);
  }
  return pmi;
}

}  // namespace reflex
