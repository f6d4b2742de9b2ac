#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace reflex::cli {

struct GlobalOpts {
  int threads = 1;
  bool force = false;
  std::string out_dir;  // default output directory (REFLEX_OUT_DIR)
};

struct VocabOpts {
  std::string input;
  uint64_t min_count = 1;
  std::string out;
};

struct PmiOpts {
  std::string vocab;
  std::string input;
  uint32_t window = 2;
  double shift_k = 1.0;
  bool keep_positions = false;
  std::string cooc_out;  // optional
  std::string out;
};

struct SpectrumOpts {
  std::string pmi;
  int bins = 101;
  std::string out;
};

struct TrainOpts {
  std::string input;
  std::string vocab;
  uint32_t dim = 100;
  uint32_t window = 5;
  uint32_t negatives = 5;
  uint32_t epochs = 5;
  double lr = 0.025;
  double lr_decay_multiplier = 0.0;  // 0 = pick by mode (1.0 / 0.8)
  double neg_smoothing = 0.75;
  double subsample = 1e-3;
  bool tied = false;
  bool balanced_mask = false;
  bool uniform_init = false;
  bool no_shrink_window = false;
  bool binary = false;
  uint64_t seed = 1;
  std::string out;
  std::string context_out;  // untied only: persist context vectors
  uint64_t log_every = 1000000;
};

struct EvalOpts {
  std::string embeddings;
  bool binary = false;
  std::vector<std::string> similarity;
  std::vector<std::string> analogy;
  std::string out;
};

struct VerifyOpts {
  std::string claim;  // lemma1|corollary1|lemma2|pmi-ensemble|dependence|reflection
  bool all = false;
  uint32_t d = 100;
  uint32_t n = 10000;
  double alpha = 0.25;
  uint64_t trials = 100000;
  uint64_t seed = 1;
  std::string embeddings;  // reflection on a real run (word vectors)
  std::string contexts;    // reflection on a real run (context vectors)
  bool binary = false;
  std::string out;
};

struct ReproFig2Opts {
  std::string input;
  uint64_t min_count = 100;
  uint32_t window = 2;
  double shift_k = 1.0;
  int bins = 101;
  uint64_t seed = 1;
  std::string out;
};

struct ReproTable2Opts {
  std::string input;
  uint64_t min_count = 5;
  uint32_t dim = 200;
  uint32_t window = 5;
  uint32_t negatives = 5;
  uint32_t epochs = 5;
  double lr = 0.025;
  uint64_t seed = 1;
  std::vector<std::string> similarity;
  std::vector<std::string> analogy;
  std::string out;
};

int run_vocab(const GlobalOpts& g, const VocabOpts& o);
int run_pmi(const GlobalOpts& g, const PmiOpts& o);
int run_spectrum(const GlobalOpts& g, const SpectrumOpts& o);
int run_train(const GlobalOpts& g, const TrainOpts& o);
int run_eval(const GlobalOpts& g, const EvalOpts& o);
int run_verify(const GlobalOpts& g, const VerifyOpts& o);
int run_repro_fig2(const GlobalOpts& g, const ReproFig2Opts& o);
int run_repro_table2(const GlobalOpts& g, const ReproTable2Opts& o);
int run_rerun(const std::string& manifest_path, const std::string& out_dir);

// Shared by main and rerun: dispatches a parsed argv.
int dispatch(const std::vector<std::string>& args);

}  // namespace reflex::cli
