#include "reflex/sgns.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace reflex {
namespace {

enum Salt : uint64_t {
  kSaltInitW = 0x5347'0001,
  kSaltInitC = 0x5347'0002,
  kSaltTrain = 0x5347'0003,
};

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// log(1 + e^x) without overflow.
inline double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

}  // namespace

void EmbeddingStore::context_view(uint32_t i, double* out) const {
  const double* src = word(i);
  if (tied) {
    for (uint32_t m = 0; m < dim; ++m) out[m] = mask.signs[m] * src[m];
  } else {
    std::memcpy(out, c.data() + static_cast<size_t>(i) * dim,
                dim * sizeof(double));
  }
}

uint64_t trainable_parameters(const EmbeddingStore& store) {
  const uint64_t nd = static_cast<uint64_t>(store.n) * store.dim;
  return store.tied ? nd : 2 * nd;
}

EmbeddingStore init_embeddings(uint32_t n, const TrainConfig& config) {
  require(n >= 1, "need at least one word");
  require(config.dim >= 1, "dimension must be >= 1");
  if (config.tied) {
    require(config.dim % 2 == 0, "tied mode needs even dimension");
  }
  EmbeddingStore store;
  store.n = n;
  store.dim = config.dim;
  store.tied = config.tied;
  store.w.resize(static_cast<size_t>(n) * config.dim);

  const auto fill = [&](std::vector<double>& dst, uint64_t salt) {
    Philox4x32 rng(derive_seed(config.seed, salt, 0));
    if (config.gaussian_init) {
      const double stdev = 1.0 / std::sqrt(static_cast<double>(config.dim));
      for (auto& v : dst) v = rng.next_gaussian() * stdev;
    } else {
      const double half = 0.5 / config.dim;
      for (auto& v : dst) v = (2.0 * rng.next_double() - 1.0) * half;
    }
  };
  fill(store.w, kSaltInitW);
  if (config.tied) {
    store.mask = config.balanced_mask
                     ? balanced_mask(config.dim, config.seed)
                     : rademacher_mask(config.dim, config.seed);
  } else {
    store.c.resize(store.w.size());
    fill(store.c, kSaltInitC);
  }
  return store;
}

AliasTable::AliasTable(std::span<const double> weights) {
  require(!weights.empty(), "alias table needs at least one weight");
  const size_t k = weights.size();
  double total = 0.0;
  for (const double w : weights) {
    require(w >= 0.0, "alias weights must be non-negative");
    total += w;
  }
  require(total > 0.0, "alias weights must not all be zero");

  prob_.resize(k);
  alias_.assign(k, 0);
  std::vector<double> scaled(k);
  for (size_t i = 0; i < k; ++i) scaled[i] = weights[i] / total * k;

  std::vector<uint32_t> small;
  std::vector<uint32_t> large;
  for (size_t i = 0; i < k; ++i) {
    (scaled[i] < 1.0 ? small : large).push_back(static_cast<uint32_t>(i));
  }
  while (!small.empty() && !large.empty()) {
    const uint32_t s = small.back();
    const uint32_t l = large.back();
    small.pop_back();
    large.pop_back();
    prob_[s] = scaled[s];
    alias_[s] = l;
    scaled[l] -= 1.0 - scaled[s];
    (scaled[l] < 1.0 ? small : large).push_back(l);
  }
  for (const uint32_t i : large) prob_[i] = 1.0;
  for (const uint32_t i : small) prob_[i] = 1.0;  // numerical leftovers
  for (size_t i = 0; i < k; ++i) {
    if (prob_[i] >= 1.0) alias_[i] = static_cast<uint32_t>(i);
  }
}

uint32_t AliasTable::sample(Philox4x32& rng) const {
  const auto bucket =
      static_cast<uint32_t>(rng.next_below(prob_.size()));
  return rng.next_double() < prob_[bucket] ? bucket : alias_[bucket];
}

double AliasTable::prob_of(uint32_t i) const {
  const double k = static_cast<double>(prob_.size());
  double mass = prob_[i];
  for (size_t b = 0; b < prob_.size(); ++b) {
    if (alias_[b] == i && b != i) mass += 1.0 - prob_[b];
  }
  return mass / k;
}

AliasTable negative_sampler(const Vocabulary& vocab, double neg_smoothing) {
  require(vocab.size() > 0, "empty vocabulary");
  std::vector<double> weights(vocab.size());
  for (size_t i = 0; i < vocab.size(); ++i) {
    weights[i] = std::pow(static_cast<double>(vocab.counts[i]), neg_smoothing);
  }
  return AliasTable(weights);
}

double sgns_step(EmbeddingStore& store, uint32_t center, uint32_t context,
                 std::span<const uint32_t> negatives, double lr) {
  const uint32_t d = store.dim;
  double* wj = store.word(center);

  // Gather pass: scores and the center-row gradient, all at the pre-step
  // point. No row is written until every score has been read, and the
  // context-role updates below use a snapshot of the center row so that
  // self-pairs and repeated targets all see the same pre-step values.
  const size_t terms = 1 + negatives.size();
  thread_local std::vector<double> g_buf;
  thread_local std::vector<double> center_buf;
  thread_local std::vector<double> wj0;
  g_buf.resize(terms);
  center_buf.assign(d, 0.0);
  wj0.assign(wj, wj + d);

  double loss = 0.0;
  for (size_t k = 0; k < terms; ++k) {
    const uint32_t target = k == 0 ? context : negatives[k - 1];
    const double label = k == 0 ? 1.0 : 0.0;
    double score = 0.0;
    if (store.tied) {
      const double* wt = store.word(target);
      for (uint32_t m = 0; m < d; ++m) {
        score += wj0[m] * store.mask.signs[m] * wt[m];
      }
    } else {
      const double* ct = store.c.data() + static_cast<size_t>(target) * d;
      for (uint32_t m = 0; m < d; ++m) score += wj0[m] * ct[m];
    }
    const double g = (label - sigmoid(score)) * lr;
    g_buf[k] = g;
    loss += k == 0 ? softplus(-score) : softplus(score);
    if (store.tied) {
      const double* wt = store.word(target);
      for (uint32_t m = 0; m < d; ++m) {
        center_buf[m] += g * store.mask.signs[m] * wt[m];
      }
    } else {
      const double* ct = store.c.data() + static_cast<size_t>(target) * d;
      for (uint32_t m = 0; m < d; ++m) center_buf[m] += g * ct[m];
    }
  }

  // Context-role updates; the tied chain rule multiplies by the mask.
  for (size_t k = 0; k < terms; ++k) {
    const uint32_t target = k == 0 ? context : negatives[k - 1];
    const double g = g_buf[k];
    if (store.tied) {
      double* wt = store.word(target);
      for (uint32_t m = 0; m < d; ++m) {
        wt[m] += g * store.mask.signs[m] * wj0[m];
      }
    } else {
      double* ct = store.c.data() + static_cast<size_t>(target) * d;
      for (uint32_t m = 0; m < d; ++m) ct[m] += g * wj0[m];
    }
  }
  for (uint32_t m = 0; m < d; ++m) wj[m] += center_buf[m];
  return loss;
}

namespace {

struct SharedTrainState {
  std::atomic<uint64_t> tokens_consumed{0};
  std::atomic<uint64_t> pairs_trained{0};
  uint64_t schedule_tokens = 0;
  double base_lr = 0.0;
  double decay_multiplier = 1.0;

  double lr_at(double consumed) const {
    const double progress =
        consumed / (static_cast<double>(schedule_tokens) + 1.0);
    const double lr = base_lr * (1.0 - progress / decay_multiplier);
    return std::max(lr, base_lr * 1e-4);
  }

  double lr_now() const {
    return lr_at(static_cast<double>(
        tokens_consumed.load(std::memory_order_relaxed)));
  }
};

}  // namespace

TrainResult train(std::span<const uint32_t> ids, const Vocabulary& vocab,
                  const TrainConfig& config) {
  require(!ids.empty(), "empty corpus");
  require(ids.size() >= config.window, "corpus shorter than window");
  require(config.negatives >= 1, "negatives must be >= 1");
  require(config.base_lr > 0.0, "learning rate must be positive");
  require(config.window >= 1, "window must be >= 1");
  const auto n = static_cast<uint32_t>(vocab.size());
  for (const uint32_t id : ids) {
    require(id < n, "token id outside vocabulary");
  }

  TrainResult result;
  result.store = init_embeddings(n, config);
  EmbeddingStore& store = result.store;

  const AliasTable sampler = negative_sampler(vocab, config.neg_smoothing);
  std::vector<double> keep;
  if (config.subsample_threshold > 0.0) {
    keep = subsample_keep_prob(vocab, config.subsample_threshold);
  }

  SharedTrainState shared;
  shared.schedule_tokens = static_cast<uint64_t>(ids.size()) * config.epochs;
  shared.base_lr = config.base_lr;
  shared.decay_multiplier = config.lr_decay_multiplier;

  {
    std::ostringstream formula;
    formula << "lr = max(" << config.base_lr << "*1e-4, " << config.base_lr
            << "*(1 - consumed/((" << shared.schedule_tokens << "+1)*"
            << config.lr_decay_multiplier << ")))";
    result.log.lr_schedule = formula.str();
  }
  result.log.schedule_tokens = shared.schedule_tokens;

  const int nthreads = std::max(1, config.threads);
  const size_t shard = (ids.size() + nthreads - 1) / nthreads;
  std::mutex log_mutex;

  auto worker = [&](int tid) {
    const size_t begin = static_cast<size_t>(tid) * shard;
    const size_t end = std::min(ids.size(), begin + shard);
    if (begin >= end) return;
    Philox4x32 rng(derive_seed(config.seed, kSaltTrain, tid));
    std::vector<uint32_t> negs;
    negs.reserve(config.negatives);
    constexpr size_t kSentence = 1000;  // reference chunk length
    std::vector<uint32_t> sentence;
    sentence.reserve(kSentence);

    uint64_t pair_count = 0;
    double loss_sum = 0.0;
    uint64_t loss_pairs = 0;

    for (uint32_t epoch = 0; epoch < config.epochs; ++epoch) {
      size_t cursor = begin;
      while (cursor < end) {
        // Subsampling is redrawn per pass; survivors close up within the
        // chunk and windows do not cross chunk boundaries.
        sentence.clear();
        const size_t chunk_start = cursor;
        while (cursor < end && sentence.size() < kSentence) {
          const uint32_t id = ids[cursor++];
          if (!keep.empty() && keep[id] < 1.0 &&
              rng.next_double() >= keep[id]) {
            continue;
          }
          sentence.push_back(id);
        }
        // The raw token count of this chunk is committed to the schedule
        // after training it; within the chunk, progress interpolates so the
        // learning rate decays smoothly even when the corpus is tiny.
        const auto chunk_raw = static_cast<double>(cursor - chunk_start);
        const auto consumed_before = static_cast<double>(
            shared.tokens_consumed.load(std::memory_order_relaxed));
        for (size_t t = 0; t < sentence.size(); ++t) {
          const uint32_t center = sentence[t];
          const uint32_t b =
              config.shrink_window
                  ? static_cast<uint32_t>(rng.next_below(config.window))
                  : 0;
          const uint32_t reach = config.window - b;
          const double lr = shared.lr_at(
              consumed_before +
              chunk_raw * static_cast<double>(t) /
                  static_cast<double>(sentence.size()));
          for (uint32_t o = 1; o <= reach; ++o) {
            for (const long dir : {-1L, +1L}) {
              const long pos =
                  static_cast<long>(t) + dir * static_cast<long>(o);
              if (pos < 0 || pos >= static_cast<long>(sentence.size())) {
                continue;
              }
              const uint32_t context = sentence[static_cast<size_t>(pos)];
              negs.clear();
              for (uint32_t s = 0; s < config.negatives; ++s) {
                const uint32_t draw = sampler.sample(rng);
                if (draw == context) continue;  // reference behavior
                negs.push_back(draw);
              }
              loss_sum += sgns_step(store, center, context, negs, lr);
              ++loss_pairs;
              ++pair_count;
              if (pair_count % config.log_every == 0) {
                std::lock_guard<std::mutex> lock(log_mutex);
                result.log.entries.push_back(
                    {shared.pairs_trained.load(std::memory_order_relaxed) +
                         pair_count,
                     lr, loss_sum / static_cast<double>(loss_pairs)});
                loss_sum = 0.0;
                loss_pairs = 0;
              }
            }
          }
        }
        shared.tokens_consumed.fetch_add(cursor - chunk_start,
                                         std::memory_order_relaxed);
      }
    }
    shared.pairs_trained.fetch_add(pair_count, std::memory_order_relaxed);
    if (loss_pairs > 0) {
      std::lock_guard<std::mutex> lock(log_mutex);
      result.log.entries.push_back(
          {shared.pairs_trained.load(std::memory_order_relaxed),
           shared.lr_now(), loss_sum / static_cast<double>(loss_pairs)});
    }
  };

  if (nthreads == 1) {
    worker(0);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(nthreads);
    for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker, t);
    for (auto& t : pool) t.join();
  }
  result.log.pairs_trained =
      shared.pairs_trained.load(std::memory_order_relaxed);
  return result;
}

namespace {

void write_header(std::ostream& out, const EmbeddingStore& store) {
  out << store.n << ' ' << store.dim << '\n';
  if (store.tied) {
    out << "#mask";
    for (uint32_t m = 0; m < store.dim; ++m) {
      out << ' ' << static_cast<int>(store.mask.signs[m]);
    }
    out << '\n';
  }
}

}  // namespace

void save_embeddings_text(const EmbeddingStore& store,
                          const std::vector<std::string>& words,
                          const std::string& path) {
  require(words.size() == store.n, "word list does not match store");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  write_header(out, store);
  char buf[32];
  for (uint32_t i = 0; i < store.n; ++i) {
    out << words[i];
    const double* row = store.word(i);
    for (uint32_t m = 0; m < store.dim; ++m) {
      std::snprintf(buf, sizeof(buf), " %.6g", row[m]);
      out << buf;
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

void save_embeddings_binary(const EmbeddingStore& store,
                            const std::vector<std::string>& words,
                            const std::string& path) {
  require(words.size() == store.n, "word list does not match store");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  write_header(out, store);
  std::vector<float> row(store.dim);
  for (uint32_t i = 0; i < store.n; ++i) {
    out << words[i] << ' ';
    const double* src = store.word(i);
    for (uint32_t m = 0; m < store.dim; ++m) {
      row[m] = static_cast<float>(src[m]);
    }
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(row.size() * sizeof(float)));
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

LoadedEmbeddings load_embeddings(const std::string& path, bool binary) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open embeddings: " + path);
  uint32_t n = 0;
  uint32_t dim = 0;
  in >> n >> dim;
  if (!in || n == 0 || dim == 0) {
    throw std::runtime_error("malformed embedding header in " + path);
  }
  in.ignore(1);  // newline

  LoadedEmbeddings out;
  out.store.n = n;
  out.store.dim = dim;
  out.store.w.resize(static_cast<size_t>(n) * dim);
  out.words.resize(n);

  if (in.peek() == '#') {
    std::string line;
    std::getline(in, line);
    if (line.rfind("#mask", 0) != 0) {
      throw std::runtime_error("unexpected header comment in " + path);
    }
    out.store.tied = true;
    std::istringstream mask_in(line.substr(5));
    out.store.mask.d = dim;
    out.store.mask.signs.resize(dim);
    int value = 0;
    for (uint32_t m = 0; m < dim; ++m) {
      if (!(mask_in >> value) || (value != 1 && value != -1)) {
        throw std::runtime_error("malformed #mask line in " + path);
      }
      out.store.mask.signs[m] = static_cast<int8_t>(value);
      if (value > 0) ++out.store.mask.plus_count;
    }
  }

  if (binary) {
    std::vector<float> row(dim);
    for (uint32_t i = 0; i < n; ++i) {
      std::string word;
      char ch;
      while (in.get(ch) && ch != ' ') word.push_back(ch);
      in.read(reinterpret_cast<char*>(row.data()),
              static_cast<std::streamsize>(row.size() * sizeof(float)));
      in.ignore(1);  // newline
      if (!in) throw std::runtime_error("truncated embeddings: " + path);
      out.words[i] = std::move(word);
      double* dst = out.store.word(i);
      for (uint32_t m = 0; m < dim; ++m) dst[m] = row[m];
    }
  } else {
    for (uint32_t i = 0; i < n; ++i) {
      if (!(in >> out.words[i])) {
        throw std::runtime_error("truncated embeddings: " + path);
      }
      double* dst = out.store.word(i);
      for (uint32_t m = 0; m < dim; ++m) {
        if (!(in >> dst[m])) {
          throw std::runtime_error("truncated embeddings: " + path);
        }
      }
    }
  }
  return out;
}

}  // namespace reflex
