#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "reflex/corpus.hpp"
#include "reflex/rng.hpp"
#include "reflex/theory.hpp"

namespace reflex {

struct TrainConfig {
  uint32_t dim = 100;
  uint32_t window = 5;
  uint32_t negatives = 5;  // k
  uint32_t epochs = 5;
  double base_lr = 0.025;
  // Linear decay reaches the floor after this fraction of the nominal
  // schedule; 1.0 untied, 0.8 in the weight-tied model.
  double lr_decay_multiplier = 1.0;
  double neg_smoothing = 0.75;
  double subsample_threshold = 1e-3;  // 0 disables subsampling
  bool tied = false;
  bool balanced_mask = false;  // force exactly d/2 positive signs
  bool gaussian_init = true;   // N(0, 1/d); otherwise U[-1/(2d), 1/(2d)]
  bool shrink_window = true;   // reference-style random window shrinking
  uint64_t seed = 1;
  int threads = 1;
  uint64_t log_every = 1000000;  // pairs between loss log entries
};

// Word matrix plus either an independent context matrix (untied) or a fixed
// sign mask defining the context view c_i = q (.) w_i (tied). The tied
// context view is never materialized.
struct EmbeddingStore {
  uint32_t n = 0;
  uint32_t dim = 0;
  bool tied = false;
  std::vector<double> w;  // n x dim row-major
  std::vector<double> c;  // untied only
  ReflectionMask mask;    // tied only

  double* word(uint32_t i) { return w.data() + static_cast<size_t>(i) * dim; }
  const double* word(uint32_t i) const {
    return w.data() + static_cast<size_t>(i) * dim;
  }
  // Context view of word i, written into out[0..dim).
  void context_view(uint32_t i, double* out) const;
};

uint64_t trainable_parameters(const EmbeddingStore& store);

EmbeddingStore init_embeddings(uint32_t n, const TrainConfig& config);

// Walker alias table; the encoded distribution equals the normalized
// weights exactly (no quantization).
class AliasTable {
 public:
  explicit AliasTable(std::span<const double> weights);

  uint32_t sample(Philox4x32& rng) const;
  // Probability mass the table assigns to bucket i (test hook).
  double prob_of(uint32_t i) const;
  size_t size() const { return prob_.size(); }

 private:
  std::vector<double> prob_;
  std::vector<uint32_t> alias_;
};

// Negative-sampling distribution: P(i) proportional to count_i^smoothing.
AliasTable negative_sampler(const Vocabulary& vocab, double neg_smoothing);

// One gradient-ascent step on log sigmoid(w_j'c_i) + sum log sigmoid(-w_j'c_neg).
// All gradients are evaluated at the pre-step point, then applied; returns
// the loss (negative objective) at that point.
double sgns_step(EmbeddingStore& store, uint32_t center, uint32_t context,
                 std::span<const uint32_t> negatives, double lr);

struct TrainLogEntry {
  uint64_t pairs = 0;
  double lr = 0.0;
  double loss = 0.0;  // mean loss since the previous entry
};

struct TrainLog {
  std::vector<TrainLogEntry> entries;
  std::string lr_schedule;  // exact decay formula used
  uint64_t schedule_tokens = 0;
  uint64_t pairs_trained = 0;
};

struct TrainResult {
  EmbeddingStore store;
  TrainLog log;
};

// `ids` must already be in-vocabulary (OOV dropped upstream). Deterministic
// single-threaded; multithreaded updates are lock-free and racy by contract.
TrainResult train(std::span<const uint32_t> ids, const Vocabulary& vocab,
                  const TrainConfig& config);

// Text format: header `n d`, one `word v1 ... vd` line per word (6
// significant digits); tied stores add a `#mask +1 -1 ...` line after the
// header. The binary variant stores vectors as little-endian f32.
void save_embeddings_text(const EmbeddingStore& store,
                          const std::vector<std::string>& words,
                          const std::string& path);
void save_embeddings_binary(const EmbeddingStore& store,
                            const std::vector<std::string>& words,
                            const std::string& path);

struct LoadedEmbeddings {
  std::vector<std::string> words;
  EmbeddingStore store;
};

LoadedEmbeddings load_embeddings(const std::string& path, bool binary);

}  // namespace reflex
