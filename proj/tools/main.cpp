#include <cstdio>
#include <cstdlib>
#include <exception>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "commands.hpp"

namespace cli = reflex::cli;

namespace {

int run(std::vector<std::string> args) {
  CLI::App app{"corpus-to-embeddings toolkit: PMI spectra, weight-tied SGNS, "
               "and probabilistic claim verification"};
  app.require_subcommand(1);

  cli::GlobalOpts g;
  if (const char* env = std::getenv("REFLEX_OUT_DIR")) g.out_dir = env;
  app.add_option("--threads", g.threads, "worker threads")
      ->capture_default_str();
  app.add_flag("--force", g.force, "overwrite existing outputs");
  app.add_option("--out-dir", g.out_dir,
                 "default output directory (env REFLEX_OUT_DIR)");

  cli::VocabOpts vo;
  auto* vocab = app.add_subcommand("vocab", "build a frequency vocabulary");
  vocab->add_option("--input", vo.input, "corpus file")->required();
  vocab->add_option("--min-count", vo.min_count, "frequency threshold")
      ->capture_default_str();
  vocab->add_option("--out", vo.out, "vocabulary file")->required();

  cli::PmiOpts po;
  auto* pmi = app.add_subcommand("pmi", "co-occurrence counts and PMI matrix");
  pmi->add_option("--vocab", po.vocab, "vocabulary file")->required();
  pmi->add_option("--input", po.input, "corpus file")->required();
  pmi->add_option("--window", po.window, "symmetric window L")
      ->capture_default_str();
  pmi->add_option("--shift-k", po.shift_k, "shift constant k (>= 1)")
      ->capture_default_str();
  pmi->add_flag("--keep-positions", po.keep_positions,
                "OOV tokens keep their positions instead of closing up");
  pmi->add_option("--cooc-out", po.cooc_out, "also write binary counts");
  pmi->add_option("--out", po.out, "PMI payload path (sidecar adds .json)")
      ->required();

  cli::SpectrumOpts so;
  auto* spectrum =
      app.add_subcommand("spectrum", "eigenvalue spectrum of a PMI matrix");
  spectrum->add_option("--pmi", so.pmi, "PMI payload path")->required();
  spectrum->add_option("--bins", so.bins, "histogram bins")
      ->capture_default_str();
  spectrum->add_option("--out", so.out, "report JSON path (adds .csv)")
      ->required();

  cli::TrainOpts to;
  auto* train = app.add_subcommand("train", "skip-gram negative sampling");
  train->add_option("--input", to.input, "corpus file")->required();
  train->add_option("--vocab", to.vocab, "vocabulary file")->required();
  train->add_option("--dim", to.dim, "embedding dimension")
      ->capture_default_str();
  train->add_option("--window", to.window, "window L")->capture_default_str();
  train->add_option("--negatives", to.negatives, "negative samples per pair")
      ->capture_default_str();
  train->add_option("--epochs", to.epochs, "epochs")->capture_default_str();
  train->add_option("--lr", to.lr, "base learning rate")
      ->capture_default_str();
  train->add_option("--lr-decay-mult", to.lr_decay_multiplier,
                    "decay horizon multiplier (default 1.0, tied 0.8)");
  train->add_option("--neg-smoothing", to.neg_smoothing,
                    "negative sampling exponent")
      ->capture_default_str();
  train->add_option("--subsample", to.subsample,
                    "frequent-word threshold (0 disables)")
      ->capture_default_str();
  train->add_flag("--tied", to.tied, "tie contexts via a Rademacher mask");
  train->add_flag("--balanced-mask", to.balanced_mask,
                  "force exactly d/2 positive mask entries");
  train->add_flag("--uniform-init", to.uniform_init,
                  "uniform init instead of Gaussian");
  train->add_flag("--no-shrink-window", to.no_shrink_window,
                  "disable random window shrinking");
  train->add_flag("--binary", to.binary, "write f32 binary embeddings");
  train->add_option("--seed", to.seed, "RNG seed")->capture_default_str();
  train->add_option("--log-every", to.log_every, "pairs between loss logs")
      ->capture_default_str();
  train->add_option("--context-out", to.context_out,
                    "also write context vectors (untied only)");
  train->add_option("--out", to.out, "embeddings file")->required();

  cli::EvalOpts eo;
  auto* eval = app.add_subcommand("eval", "similarity and analogy evaluation");
  eval->add_option("--embeddings", eo.embeddings, "embeddings file")
      ->required();
  eval->add_flag("--binary", eo.binary, "embeddings are f32 binary");
  eval->add_option("--similarity", eo.similarity,
                   "similarity dataset(s): word word score");
  eval->add_option("--analogy", eo.analogy,
                   "analogy dataset(s): 4 words per line, ':' sections");
  eval->add_option("--out", eo.out, "results JSON")->required();

  cli::VerifyOpts ro;
  auto* verify =
      app.add_subcommand("verify", "Monte Carlo checks of the paper claims");
  verify->add_option(
      "--claim", ro.claim,
      "lemma1|corollary1|lemma2|pmi-ensemble|dependence|reflection");
  verify->add_flag("--all", ro.all, "run every claim");
  verify->add_option("--d", ro.d, "dimension")->capture_default_str();
  verify->add_option("--n", ro.n, "vocabulary size")->capture_default_str();
  verify->add_option("--alpha", ro.alpha, "unigram smoothing")
      ->capture_default_str();
  verify->add_option("--trials", ro.trials, "Monte Carlo trials")
      ->capture_default_str();
  verify->add_option("--seed", ro.seed, "RNG seed")->capture_default_str();
  verify->add_option("--embeddings", ro.embeddings,
                     "fitted reflection: word vectors of an untied run");
  verify->add_option("--contexts", ro.contexts,
                     "fitted reflection: context vectors of the same run");
  verify->add_flag("--binary", ro.binary, "embedding files are binary");
  verify->add_option("--out", ro.out, "report directory");

  auto* repro = app.add_subcommand("repro", "paper-style pipelines");
  repro->require_subcommand(1);
  cli::ReproFig2Opts f2;
  auto* fig2 = repro->add_subcommand("fig2", "corpus PMI spectrum pipeline");
  fig2->add_option("--input", f2.input, "corpus file")->required();
  fig2->add_option("--min-count", f2.min_count)->capture_default_str();
  fig2->add_option("--window", f2.window)->capture_default_str();
  fig2->add_option("--shift-k", f2.shift_k)->capture_default_str();
  fig2->add_option("--bins", f2.bins)->capture_default_str();
  fig2->add_option("--seed", f2.seed)->capture_default_str();
  fig2->add_option("--out", f2.out, "output directory");

  cli::ReproTable2Opts t2;
  auto* table2 =
      repro->add_subcommand("table2", "tied vs untied training + evaluation");
  table2->add_option("--input", t2.input, "corpus file")->required();
  table2->add_option("--min-count", t2.min_count)->capture_default_str();
  table2->add_option("--dim", t2.dim)->capture_default_str();
  table2->add_option("--window", t2.window)->capture_default_str();
  table2->add_option("--negatives", t2.negatives)->capture_default_str();
  table2->add_option("--epochs", t2.epochs)->capture_default_str();
  table2->add_option("--lr", t2.lr)->capture_default_str();
  table2->add_option("--seed", t2.seed)->capture_default_str();
  table2->add_option("--similarity", t2.similarity, "similarity dataset(s)");
  table2->add_option("--analogy", t2.analogy, "analogy dataset(s)");
  table2->add_option("--out", t2.out, "output directory");

  std::string rerun_manifest;
  std::string rerun_out;
  auto* rerun = app.add_subcommand("rerun", "re-execute a recorded manifest");
  rerun->add_option("manifest", rerun_manifest, "manifest JSON path")
      ->required();
  rerun->add_option("--out-dir", rerun_out,
                    "redirect outputs into this directory");

  // CLI11 wants argv-style reversed input for parse(vector).
  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  if (vocab->parsed()) return cli::run_vocab(g, vo);
  if (pmi->parsed()) return cli::run_pmi(g, po);
  if (spectrum->parsed()) return cli::run_spectrum(g, so);
  if (train->parsed()) return cli::run_train(g, to);
  if (eval->parsed()) return cli::run_eval(g, eo);
  if (verify->parsed()) {
    if (!ro.all && ro.claim.empty()) {
      throw CLI::ValidationError("verify", "pass --claim or --all");
    }
    return cli::run_verify(g, ro);
  }
  if (repro->parsed()) {
    if (fig2->parsed()) return cli::run_repro_fig2(g, f2);
    if (table2->parsed()) return cli::run_repro_table2(g, t2);
  }
  if (rerun->parsed()) return cli::run_rerun(rerun_manifest, rerun_out);
  return 1;
}

}  // namespace

namespace reflex::cli {

int dispatch(const std::vector<std::string>& args) { return ::run(args); }

}  // namespace reflex::cli

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  try {
    return run(std::move(args));
  } catch (const std::exception& e) {
    std::fprintf(stderr, "reflex: %s\n", e.what());
    return 1;
  }
}
