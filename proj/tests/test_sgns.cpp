#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <numeric>

#include "reflex/corpus.hpp"
#include "reflex/eval.hpp"
#include "reflex/rng.hpp"
#include "reflex/sgns.hpp"

using namespace reflex;

namespace {

TrainConfig small_config(uint32_t dim, bool tied, uint64_t seed) {
  TrainConfig c;
  c.dim = dim;
  c.tied = tied;
  c.seed = seed;
  c.subsample_threshold = 0.0;
  return c;
}

// The objective the step is supposed to ascend, written independently.
double objective(const EmbeddingStore& s, uint32_t center, uint32_t context,
                 std::span<const uint32_t> negatives) {
  std::vector<double> ctx(s.dim);
  const auto log_sigmoid = [](double x) {
    return x > 0.0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
  };
  const auto score = [&](uint32_t target) {
    s.context_view(target, ctx.data());
    const double* wj = s.word(center);
    double dot = 0.0;
    for (uint32_t m = 0; m < s.dim; ++m) dot += wj[m] * ctx[m];
    return dot;
  };
  double obj = log_sigmoid(score(context));
  for (const uint32_t neg : negatives) obj += log_sigmoid(-score(neg));
  return obj;
}

EmbeddingStore random_store(uint32_t n, uint32_t dim, bool tied,
                            uint64_t seed) {
  auto store = init_embeddings(n, small_config(dim, tied, seed));
  return store;
}

}  // namespace

TEST_SUITE("sgns") {

TEST_CASE("init is deterministic and mask is Rademacher") {
  const auto a = random_store(20, 8, true, 3);
  const auto b = random_store(20, 8, true, 3);
  CHECK(a.w == b.w);
  CHECK(a.mask.signs == b.mask.signs);

  for (const auto s : a.mask.signs) CHECK((s == 1 || s == -1));

  auto cfg = small_config(10000, true, 5);
  cfg.dim = 10000;
  const auto big = init_embeddings(2, cfg);
  // E[plus] = d/2 with sd sqrt(d)/2: allow 3 sigma.
  CHECK(std::abs(static_cast<double>(big.mask.plus_count) - 5000.0) < 150.0);

  auto balanced = small_config(100, true, 5);
  balanced.balanced_mask = true;
  CHECK(init_embeddings(2, balanced).mask.plus_count == 50);
}

TEST_CASE("tied mode requires an even dimension") {
  CHECK_THROWS_AS(init_embeddings(4, small_config(7, true, 1)),
                  std::invalid_argument);
}

TEST_CASE("gaussian init has unit mean squared norm") {
  const auto store = random_store(10000, 100, false, 9);
  double sum = 0.0;
  for (uint32_t i = 0; i < store.n; ++i) {
    const double* row = store.word(i);
    double s = 0.0;
    for (uint32_t m = 0; m < store.dim; ++m) s += row[m] * row[m];
    sum += s;
  }
  const double mean = sum / store.n;
  CHECK(mean > 0.97);
  CHECK(mean < 1.03);
}

TEST_CASE("uniform init stays inside [-1/(2d), 1/(2d)]") {
  auto cfg = small_config(50, false, 4);
  cfg.gaussian_init = false;
  const auto store = init_embeddings(100, cfg);
  const double half = 0.5 / 50;
  for (const double v : store.w) {
    CHECK(v >= -half);
    CHECK(v <= half);
  }
}

TEST_CASE("trainable parameter count halves under tying") {
  const auto untied = random_store(1000, 100, false, 1);
  const auto tied = random_store(1000, 100, true, 1);
  CHECK(trainable_parameters(untied) == 200000);
  CHECK(trainable_parameters(tied) == 100000);
  CHECK(trainable_parameters(tied) * 2 == trainable_parameters(untied));
}

TEST_CASE("alias table encodes the distribution exactly") {
  SUBCASE("counts 8:1 with no smoothing") {
    const std::vector<double> w = {8.0, 1.0};
    AliasTable t(w);
    CHECK(t.prob_of(0) == doctest::Approx(8.0 / 9).epsilon(1e-12));
    CHECK(t.prob_of(1) == doctest::Approx(1.0 / 9).epsilon(1e-12));
  }
  SUBCASE("counts 16:1 smoothed by 0.75 gives 8:1") {
    std::vector<std::string> toks(16, "a");
    toks.push_back("b");
    const auto vocab = build_vocabulary(toks, 1);
    const auto t = negative_sampler(vocab, 0.75);
    CHECK(t.prob_of(0) == doctest::Approx(8.0 / 9).epsilon(1e-12));
  }
  SUBCASE("arbitrary weights") {
    const std::vector<double> w = {0.3, 2.7, 1.1, 0.0, 5.9, 0.01};
    const double total = std::accumulate(w.begin(), w.end(), 0.0);
    AliasTable t(w);
    for (size_t i = 0; i < w.size(); ++i) {
      CHECK(t.prob_of(static_cast<uint32_t>(i)) ==
            doctest::Approx(w[i] / total).epsilon(1e-12));
    }
  }
}

TEST_CASE("alias sampling passes a chi-square test at p > 0.001") {
  const std::vector<double> weights = {100, 50, 25, 12, 6, 3, 2, 1, 1, 0.5};
  AliasTable t(weights);
  Philox4x32 rng(2718);
  const int draws = 1000000;
  std::vector<uint64_t> hist(weights.size(), 0);
  for (int i = 0; i < draws; ++i) ++hist[t.sample(rng)];
  double chi2 = 0.0;
  for (size_t i = 0; i < weights.size(); ++i) {
    const double expected = t.prob_of(static_cast<uint32_t>(i)) * draws;
    const double diff = static_cast<double>(hist[i]) - expected;
    chi2 += diff * diff / expected;
  }
  // Critical value of chi-square with df = 9 at p = 0.001.
  CHECK(chi2 < 27.877);
}

TEST_CASE("tied context view is the mask times the word row") {
  auto store = random_store(10, 6, true, 7);
  Philox4x32 rng(1);
  std::vector<uint32_t> negs = {3, 7};
  for (int step = 0; step < 50; ++step) {
    const auto center = static_cast<uint32_t>(rng.next_below(10));
    const auto context = static_cast<uint32_t>(rng.next_below(10));
    sgns_step(store, center, context, negs, 0.05);
  }
  std::vector<double> view(store.dim);
  for (uint32_t i = 0; i < store.n; ++i) {
    store.context_view(i, view.data());
    for (uint32_t m = 0; m < store.dim; ++m) {
      CHECK(view[m] == store.mask.signs[m] * store.word(i)[m]);
    }
  }
}

TEST_CASE("mask involution: q (.) (q (.) w) = w exactly") {
  const auto store = random_store(5, 8, true, 11);
  std::vector<double> once(8);
  std::vector<double> twice(8);
  for (uint32_t i = 0; i < 5; ++i) {
    store.context_view(i, once.data());
    for (uint32_t m = 0; m < 8; ++m) {
      twice[m] = store.mask.signs[m] * once[m];
    }
    for (uint32_t m = 0; m < 8; ++m) {
      CHECK(twice[m] == store.word(i)[m]);  // bitwise
    }
  }
}

TEST_CASE("hand-checked tied gradient in 2 dimensions") {
  // q = [+1, -1], w_j = [a, b], w_i = [c, e]: score = ac - be, so the
  // context-role gradient on w_i is [a, -b] = q (.) w_j.
  auto cfg = small_config(2, true, 1);
  auto store = init_embeddings(3, cfg);
  store.mask.signs = {1, -1};
  store.w = {0.7, -0.3, 0.2, 0.5, 0.0, 0.0};  // rows: j, i, unused
  const double a = 0.7;
  const double b = -0.3;
  const double c = 0.2;
  const double e = 0.5;
  const double score = a * c - b * e;
  const double g = 1.0 - 1.0 / (1.0 + std::exp(-score));

  auto before = store.w;
  sgns_step(store, 0, 1, {}, 1.0);
  CHECK(store.w[2] - before[2] == doctest::Approx(g * a).epsilon(1e-12));
  CHECK(store.w[3] - before[3] == doctest::Approx(g * -b).epsilon(1e-12));
}

TEST_CASE("analytic gradients match central finite differences") {
  // 200 random instances across untied/tied, self pairs and repeated
  // negatives included, d <= 8.
  Philox4x32 rng(31415);
  const double h = 1e-5;
  int checked = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const bool tied = (trial % 2) == 1;
    const auto d = static_cast<uint32_t>(2 + 2 * rng.next_below(4));  // 2..8
    const auto n = static_cast<uint32_t>(3 + rng.next_below(5));
    auto store = random_store(n, d, tied, 1000 + trial);

    const auto center = static_cast<uint32_t>(rng.next_below(n));
    // Forced self pair on a third of the tied trials.
    const uint32_t context =
        (tied && trial % 3 == 0)
            ? center
            : static_cast<uint32_t>(rng.next_below(n));
    std::vector<uint32_t> negs;
    const auto k = static_cast<uint32_t>(rng.next_below(4));
    for (uint32_t i = 0; i < k; ++i) {
      negs.push_back(static_cast<uint32_t>(rng.next_below(n)));
    }
    if (trial % 5 == 0 && !negs.empty()) negs.push_back(negs[0]);  // repeat

    const double lr = 0.37;
    auto stepped = store;
    sgns_step(stepped, center, context, negs, lr);

    // Every touched coordinate: (after - before)/lr must equal dL/dtheta.
    for (size_t p = 0; p < store.w.size(); ++p) {
      const double analytic = (stepped.w[p] - store.w[p]) / lr;
      auto plus = store;
      auto minus = store;
      plus.w[p] += h;
      minus.w[p] -= h;
      const double numeric = (objective(plus, center, context, negs) -
                              objective(minus, center, context, negs)) /
                             (2 * h);
      if (analytic == 0.0 && std::abs(numeric) < 1e-9) continue;
      CHECK(std::abs(analytic - numeric) <=
            1e-5 * std::max(1.0, std::abs(numeric)));
      ++checked;
    }
    if (!tied) {
      for (size_t p = 0; p < store.c.size(); ++p) {
        const double analytic = (stepped.c[p] - store.c[p]) / lr;
        auto plus = store;
        auto minus = store;
        plus.c[p] += h;
        minus.c[p] -= h;
        const double numeric = (objective(plus, center, context, negs) -
                                objective(minus, center, context, negs)) /
                               (2 * h);
        if (analytic == 0.0 && std::abs(numeric) < 1e-9) continue;
        CHECK(std::abs(analytic - numeric) <=
              1e-5 * std::max(1.0, std::abs(numeric)));
        ++checked;
      }
    }
  }
  CHECK(checked > 1000);  // the loop really exercised coordinates
}

TEST_CASE("training loss decreases on a structured toy corpus") {
  // 100-token corpus with a strong repeating pattern, 1 epoch, 5 seeds.
  std::vector<std::string> toks;
  for (int rep = 0; rep < 10; ++rep) {
    for (int w = 0; w < 10; ++w) toks.push_back("w" + std::to_string(w));
  }
  const auto vocab = build_vocabulary(toks, 1);
  const auto ids = ids_from_tokens(vocab, toks);

  for (uint64_t seed = 1; seed <= 5; ++seed) {
    TrainConfig cfg = small_config(10, false, seed);
    cfg.window = 2;
    cfg.negatives = 3;
    cfg.epochs = 1;
    cfg.base_lr = 0.25;
    cfg.gaussian_init = false;  // cold start, scores near zero
    cfg.shrink_window = false;
    cfg.log_every = 20;
    const auto result = train(ids, vocab, cfg);
    const auto& entries = result.log.entries;
    REQUIRE(entries.size() >= 8);
    const size_t q = entries.size() / 4;
    double first = 0.0;
    double last = 0.0;
    for (size_t i = 0; i < q; ++i) first += entries[i].loss;
    for (size_t i = entries.size() - q; i < entries.size(); ++i) {
      last += entries[i].loss;
    }
    CHECK(last / q < first / q);
  }
}

TEST_CASE("single-threaded training is byte identical across runs") {
  std::vector<std::string> toks;
  for (int i = 0; i < 300; ++i) toks.push_back("t" + std::to_string(i % 17));
  const auto vocab = build_vocabulary(toks, 1);
  const auto ids = ids_from_tokens(vocab, toks);
  TrainConfig cfg = small_config(12, true, 99);
  cfg.epochs = 2;
  cfg.window = 3;
  const auto a = train(ids, vocab, cfg);
  const auto b = train(ids, vocab, cfg);
  REQUIRE(a.store.w.size() == b.store.w.size());
  CHECK(std::memcmp(a.store.w.data(), b.store.w.data(),
                    a.store.w.size() * sizeof(double)) == 0);
  CHECK(a.store.mask.signs == b.store.mask.signs);
}

TEST_CASE("multithreaded training produces finite vectors") {
  std::vector<std::string> toks;
  for (int i = 0; i < 4000; ++i) toks.push_back("t" + std::to_string(i % 29));
  const auto vocab = build_vocabulary(toks, 1);
  const auto ids = ids_from_tokens(vocab, toks);
  TrainConfig cfg = small_config(16, false, 5);
  cfg.epochs = 2;
  cfg.threads = 3;
  const auto result = train(ids, vocab, cfg);
  for (const double v : result.store.w) CHECK(std::isfinite(v));
  CHECK(result.log.pairs_trained > 0);
}

TEST_CASE("corpus shorter than the window is an error") {
  const auto vocab = build_vocabulary(tokenize("a b"), 1);
  const std::vector<uint32_t> ids = {0};
  TrainConfig cfg = small_config(4, false, 1);
  cfg.window = 5;
  CHECK_THROWS_AS(train(ids, vocab, cfg), std::invalid_argument);
}

TEST_CASE("lr schedule is recorded and compressed in tied mode") {
  std::vector<std::string> toks;
  for (int i = 0; i < 200; ++i) toks.push_back("t" + std::to_string(i % 7));
  const auto vocab = build_vocabulary(toks, 1);
  const auto ids = ids_from_tokens(vocab, toks);
  TrainConfig cfg = small_config(8, true, 1);
  cfg.lr_decay_multiplier = 0.8;
  const auto result = train(ids, vocab, cfg);
  CHECK(result.log.lr_schedule.find("0.8") != std::string::npos);
  CHECK(result.log.schedule_tokens == ids.size() * cfg.epochs);
}

TEST_CASE("trained scores correlate with corpus PMI") {
  // Corpus generated by the log-bilinear model itself (a Markov chain whose
  // transition law is p_i exp(w_j' c_i)), then refit by SGNS: the learned
  // score matrix should track the empirical PMI of observed pairs.
  const uint32_t n = 50;
  const uint32_t d = 8;
  Philox4x32 rng(777);
  std::vector<double> wstar(n * d);
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  for (auto& v : wstar) v = rng.next_gaussian() * scale * 2.0;
  const auto mask = block_mask(d, d / 2);
  const auto probs = rank_unigram_probs(n, 0.5);

  // Transition table p(i | j).
  std::vector<double> trans(n * n);
  for (uint32_t j = 0; j < n; ++j) {
    double z = 0.0;
    for (uint32_t i = 0; i < n; ++i) {
      double dot = 0.0;
      for (uint32_t m = 0; m < d; ++m) {
        dot += wstar[j * d + m] * mask.signs[m] * wstar[i * d + m];
      }
      trans[j * n + i] = probs[i] * std::exp(dot);
      z += trans[j * n + i];
    }
    for (uint32_t i = 0; i < n; ++i) trans[j * n + i] /= z;
  }
  auto draw_from = [&](const double* dist, double u) {
    double acc = 0.0;
    for (uint32_t i = 0; i < n; ++i) {
      acc += dist[i];
      if (u < acc) return i;
    }
    return n - 1;
  };

  const size_t steps = 120000;
  std::vector<uint32_t> chain(steps);
  chain[0] = draw_from(probs.data(), rng.next_double());
  for (size_t t = 1; t < steps; ++t) {
    chain[t] = draw_from(&trans[chain[t - 1] * n], rng.next_double());
  }

  // Vocabulary whose ids match the chain ids (counts descending by rank).
  std::vector<std::string> toks(steps);
  for (size_t t = 0; t < steps; ++t) {
    toks[t] = "v" + std::to_string(chain[t]);
  }
  const auto vocab = build_vocabulary(toks, 1);
  const auto ids = ids_from_tokens(vocab, toks);

  TrainConfig cfg = small_config(8, false, 4242);
  cfg.window = 1;
  cfg.negatives = 2;
  cfg.epochs = 3;
  cfg.base_lr = 0.05;
  const auto result = train(ids, vocab, cfg);

  const auto cooc = count_cooccurrences(ids, 1, static_cast<uint32_t>(vocab.size()));
  const auto pmi = pmi_matrix(cooc, 1.0);
  std::vector<double> xs;
  std::vector<double> ys;
  std::vector<double> ctx(d);
  for (const auto& entry : cooc.entries) {
    if (entry.count < 5) continue;
    const double* wi = result.store.word(entry.i);
    result.store.context_view(entry.j, ctx.data());
    double dot = 0.0;
    for (uint32_t m = 0; m < d; ++m) dot += wi[m] * ctx[m];
    xs.push_back(dot);
    ys.push_back(pmi.at(entry.i, entry.j));
  }
  REQUIRE(xs.size() > 100);
  // Pearson correlation.
  const auto nn = static_cast<double>(xs.size());
  double mx = 0.0;
  double my = 0.0;
  for (size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= nn;
  my /= nn;
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  const double pearson = sxy / std::sqrt(sxx * syy);
  CHECK(pearson > 0.5);
}

TEST_CASE("embedding formats round trip") {
  const uint32_t n = 7;
  const uint32_t d = 6;
  std::vector<std::string> words;
  for (uint32_t i = 0; i < n; ++i) words.push_back("w" + std::to_string(i));

  SUBCASE("text, untied") {
    const auto store = random_store(n, d, false, 10);
    save_embeddings_text(store, words, "emb_txt_test.txt");
    const auto loaded = load_embeddings("emb_txt_test.txt", false);
    CHECK(loaded.words == words);
    CHECK_FALSE(loaded.store.tied);
    for (size_t i = 0; i < store.w.size(); ++i) {
      CHECK(loaded.store.w[i] ==
            doctest::Approx(store.w[i]).epsilon(1e-5));
    }
    std::remove("emb_txt_test.txt");
  }
  SUBCASE("text, tied mask line") {
    const auto store = random_store(n, d, true, 10);
    save_embeddings_text(store, words, "emb_tied_test.txt");
    const auto loaded = load_embeddings("emb_tied_test.txt", false);
    CHECK(loaded.store.tied);
    CHECK(loaded.store.mask.signs == store.mask.signs);
    CHECK(loaded.store.mask.plus_count == store.mask.plus_count);
    std::remove("emb_tied_test.txt");
  }
  SUBCASE("binary f32") {
    const auto store = random_store(n, d, false, 10);
    save_embeddings_binary(store, words, "emb_bin_test.bin");
    const auto loaded = load_embeddings("emb_bin_test.bin", true);
    CHECK(loaded.words == words);
    for (size_t i = 0; i < store.w.size(); ++i) {
      CHECK(loaded.store.w[i] ==
            doctest::Approx(store.w[i]).epsilon(1e-6));
    }
    std::remove("emb_bin_test.bin");
  }
}

}  // TEST_SUITE
