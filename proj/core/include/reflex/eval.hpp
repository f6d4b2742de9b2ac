#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "reflex/sgns.hpp"

namespace reflex {

struct SimilarityDataset {
  std::string name;
  struct Pair {
    std::string a;
    std::string b;
    double score = 0.0;
  };
  std::vector<Pair> pairs;
  size_t duplicates = 0;  // repeated pairs are kept, just flagged
};

struct AnalogyDataset {
  std::string name;
  struct Question {
    std::string a;
    std::string b;
    std::string c;
    std::string expected;
    uint32_t section = 0;
  };
  std::vector<Question> questions;
  std::vector<std::string> sections;
};

// `word_a word_b score` per line (extra columns ignored, one optional
// header tolerated); words are lowercased.
SimilarityDataset load_similarity(const std::string& path,
                                  const std::string& name = "");
// Four words per line; lines starting with ':' are section labels.
AnalogyDataset load_analogy(const std::string& path,
                            const std::string& name = "");

struct EvalResult {
  std::string dataset;
  std::string metric;  // "spearman_rho" or "accuracy"
  double value = 0.0;
  double coverage = 0.0;  // fraction of items with all words in vocabulary
  size_t skipped = 0;
  size_t total = 0;
};

double cosine(std::span<const double> u, std::span<const double> v);
// Pearson correlation of fractional ranks (ties averaged).
double spearman(std::span<const double> xs, std::span<const double> ys);

// Word (input) vectors only; context vectors are never consulted here.
struct WordVectors {
  uint32_t n = 0;
  uint32_t d = 0;
  std::vector<std::string> words;
  std::unordered_map<std::string, uint32_t> index;
  std::vector<double> vec;  // n x d row-major

  const double* row(uint32_t i) const {
    return vec.data() + static_cast<size_t>(i) * d;
  }
  std::optional<uint32_t> id_of(std::string_view w) const {
    auto it = index.find(std::string(w));
    if (it == index.end()) return std::nullopt;
    return it->second;
  }
};

WordVectors word_vectors(const EmbeddingStore& store,
                         const std::vector<std::string>& words);
WordVectors word_vectors(const LoadedEmbeddings& loaded);

EvalResult eval_similarity(const WordVectors& wv,
                           const SimilarityDataset& dataset);

struct RankedWord {
  uint32_t id = 0;
  double score = 0.0;
};

// 3CosMul over cosines shifted to [0,1]; a, b, c are excluded from the
// candidates. Returns the top_k best-scoring words, best first.
std::vector<RankedWord> three_cos_mul(const WordVectors& wv, uint32_t a,
                                      uint32_t b, uint32_t c,
                                      double epsilon = 1e-3,
                                      size_t top_k = 1);

EvalResult eval_analogy(const WordVectors& wv, const AnalogyDataset& dataset,
                        double epsilon = 1e-3);

std::string results_json(std::span<const EvalResult> results);
// Aligned text table, one dataset per column block, for terminal reading.
std::string results_table(std::span<const EvalResult> results);

}  // namespace reflex
