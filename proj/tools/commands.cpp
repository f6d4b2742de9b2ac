#include "commands.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "reflex/cooc.hpp"
#include "reflex/corpus.hpp"
#include "reflex/eval.hpp"
#include "reflex/manifest.hpp"
#include "reflex/pmi.hpp"
#include "reflex/sgns.hpp"
#include "reflex/spectra.hpp"
#include "reflex/theory.hpp"

namespace fs = std::filesystem;

namespace reflex::cli {
namespace {

void ensure_writable(const std::string& path, bool force) {
  if (!force && fs::exists(path)) {
    throw std::runtime_error("refusing to overwrite existing output " + path +
                             " (pass --force to allow)");
  }
  const auto parent = fs::path(path).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
}

std::string out_path(const GlobalOpts& g, const std::string& name) {
  if (g.out_dir.empty()) return name;
  fs::create_directories(g.out_dir);
  return (fs::path(g.out_dir) / name).string();
}

std::string dir_of(const std::string& path) {
  const auto parent = fs::path(path).parent_path();
  return parent.empty() ? std::string(".") : parent.string();
}

Manifest base_manifest(const GlobalOpts& g, const std::string& subcommand,
                       uint64_t seed) {
  Manifest m;
  m.subcommand = subcommand;
  m.seed = seed;
  m.threads = g.threads;
  return m;
}

std::vector<uint32_t> load_ids(const Vocabulary& vocab,
                               const std::string& input,
                               bool keep_positions) {
  std::ifstream in(input, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open corpus: " + input);
  return ids_from_stream(vocab, in, keep_positions);
}

constexpr double kAnalogyEpsilon = 1e-3;

}  // namespace

int run_vocab(const GlobalOpts& g, const VocabOpts& o) {
  Manifest m = base_manifest(g, "vocab", 0);
  m.params = {{"input", o.input},
              {"min-count", std::to_string(o.min_count)},
              {"out", o.out}};
  m.inputs[o.input] = hex64(fnv1a64_file(o.input));

  std::ifstream in(o.input, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open corpus: " + o.input);
  const auto vocab = build_vocabulary(in, o.min_count, g.threads);

  ensure_writable(o.out, g.force);
  save_vocabulary(vocab, o.out);
  write_manifest(m, dir_of(o.out));
  std::printf("vocab: %zu words, %llu tokens -> %s\n", vocab.size(),
              static_cast<unsigned long long>(vocab.total_tokens),
              o.out.c_str());
  return 0;
}

int run_pmi(const GlobalOpts& g, const PmiOpts& o) {
  Manifest m = base_manifest(g, "pmi", 0);
  m.params = {{"vocab", o.vocab},
              {"input", o.input},
              {"window", std::to_string(o.window)},
              {"shift-k", std::to_string(o.shift_k)},
              {"keep-positions", o.keep_positions ? "true" : "false"},
              {"cooc-out", o.cooc_out},
              {"out", o.out}};
  m.inputs[o.input] = hex64(fnv1a64_file(o.input));
  m.inputs[o.vocab] = hex64(fnv1a64_file(o.vocab));

  const auto vocab = load_vocabulary(o.vocab);
  const auto ids = load_ids(vocab, o.input, o.keep_positions);
  const auto cooc = count_cooccurrences(
      ids, o.window, static_cast<uint32_t>(vocab.size()), g.threads);
  if (!o.cooc_out.empty()) {
    ensure_writable(o.cooc_out, g.force);
    save_cooc(cooc, o.cooc_out);
  }
  const auto pmi = pmi_matrix(cooc, o.shift_k);
  ensure_writable(o.out, g.force);
  save_pmi(pmi, o.out);
  write_manifest(m, dir_of(o.out));
  std::printf("pmi: %u x %u matrix, %llu pair events -> %s\n", pmi.n, pmi.n,
              static_cast<unsigned long long>(cooc.pair_total),
              o.out.c_str());
  return 0;
}

int run_spectrum(const GlobalOpts& g, const SpectrumOpts& o) {
  Manifest m = base_manifest(g, "spectrum", 0);
  m.params = {{"pmi", o.pmi},
              {"bins", std::to_string(o.bins)},
              {"out", o.out}};
  m.inputs[o.pmi] = hex64(fnv1a64_file(o.pmi));

  auto pmi = load_pmi(o.pmi);
  const uint32_t n = pmi.n;
  const auto eigs = eigenvalues_symmetric(std::move(pmi.values), n);
  const auto report = spectrum_stats(eigs, o.bins);

  ensure_writable(o.out, g.force);
  save_spectrum_report(report, o.out);
  const std::string csv = o.out + ".csv";
  ensure_writable(csv, g.force);
  save_histogram_csv(report, csv);
  write_manifest(m, dir_of(o.out));
  std::printf(
      "spectrum: n=%zu trace=%.4f skew=%.4f |tr|/(n*sd)=%.5f l1(semicircle)=%.4f -> %s\n",
      report.n, report.trace, report.skewness, report.trace_scale_ratio,
      semicircle_l1(report), o.out.c_str());
  return 0;
}

namespace {

TrainConfig config_from(const GlobalOpts& g, const TrainOpts& o) {
  TrainConfig cfg;
  cfg.dim = o.dim;
  cfg.window = o.window;
  cfg.negatives = o.negatives;
  cfg.epochs = o.epochs;
  cfg.base_lr = o.lr;
  cfg.lr_decay_multiplier =
      o.lr_decay_multiplier > 0.0 ? o.lr_decay_multiplier
                                  : (o.tied ? 0.8 : 1.0);
  cfg.neg_smoothing = o.neg_smoothing;
  cfg.subsample_threshold = o.subsample;
  cfg.tied = o.tied;
  cfg.balanced_mask = o.balanced_mask;
  cfg.gaussian_init = !o.uniform_init;
  cfg.shrink_window = !o.no_shrink_window;
  cfg.seed = o.seed;
  cfg.threads = g.threads;
  cfg.log_every = o.log_every;
  return cfg;
}

}  // namespace

int run_train(const GlobalOpts& g, const TrainOpts& o) {
  const TrainConfig cfg = config_from(g, o);
  Manifest m = base_manifest(g, "train", o.seed);
  m.params = {{"input", o.input},
              {"vocab", o.vocab},
              {"dim", std::to_string(cfg.dim)},
              {"window", std::to_string(cfg.window)},
              {"negatives", std::to_string(cfg.negatives)},
              {"epochs", std::to_string(cfg.epochs)},
              {"lr", std::to_string(cfg.base_lr)},
              {"lr-decay-mult", std::to_string(cfg.lr_decay_multiplier)},
              {"neg-smoothing", std::to_string(cfg.neg_smoothing)},
              {"subsample", std::to_string(cfg.subsample_threshold)},
              {"tied", cfg.tied ? "true" : "false"},
              {"balanced-mask", cfg.balanced_mask ? "true" : "false"},
              {"uniform-init", o.uniform_init ? "true" : "false"},
              {"no-shrink-window", o.no_shrink_window ? "true" : "false"},
              {"binary", o.binary ? "true" : "false"},
              {"context-out", o.context_out},
              {"out", o.out}};
  m.inputs[o.input] = hex64(fnv1a64_file(o.input));
  m.inputs[o.vocab] = hex64(fnv1a64_file(o.vocab));

  const auto vocab = load_vocabulary(o.vocab);
  const auto ids = load_ids(vocab, o.input, false);
  auto result = train(ids, vocab, cfg);

  ensure_writable(o.out, g.force);
  if (o.binary) {
    save_embeddings_binary(result.store, vocab.words, o.out);
  } else {
    save_embeddings_text(result.store, vocab.words, o.out);
  }
  if (!o.context_out.empty()) {
    if (cfg.tied) {
      throw std::runtime_error(
          "--context-out applies to untied models only (tied context is the "
          "masked word matrix)");
    }
    EmbeddingStore ctx;
    ctx.n = result.store.n;
    ctx.dim = result.store.dim;
    ctx.tied = false;
    ctx.w = result.store.c;
    ensure_writable(o.context_out, g.force);
    if (o.binary) {
      save_embeddings_binary(ctx, vocab.words, o.context_out);
    } else {
      save_embeddings_text(ctx, vocab.words, o.context_out);
    }
  }

  // Training log: schedule formula plus the loss curve.
  const std::string log_path = o.out + ".log.json";
  ensure_writable(log_path, g.force);
  {
    std::ofstream log(log_path);
    log << "{\n  \"lr_schedule\": \"" << result.log.lr_schedule
        << "\",\n  \"pairs_trained\": " << result.log.pairs_trained
        << ",\n  \"trainable_parameters\": "
        << trainable_parameters(result.store) << ",\n  \"loss\": [";
    for (size_t i = 0; i < result.log.entries.size(); ++i) {
      if (i) log << ", ";
      log << "[" << result.log.entries[i].pairs << ", "
          << result.log.entries[i].lr << ", " << result.log.entries[i].loss
          << "]";
    }
    log << "]\n}\n";
  }
  write_manifest(m, dir_of(o.out));
  std::printf("train: %s model, %llu parameters, %llu pairs -> %s\n",
              cfg.tied ? "tied" : "untied",
              static_cast<unsigned long long>(
                  trainable_parameters(result.store)),
              static_cast<unsigned long long>(result.log.pairs_trained),
              o.out.c_str());
  return 0;
}

int run_eval(const GlobalOpts& g, const EvalOpts& o) {
  Manifest m = base_manifest(g, "eval", 0);
  m.params = {{"embeddings", o.embeddings},
              {"binary", o.binary ? "true" : "false"},
              {"out", o.out}};
  m.inputs[o.embeddings] = hex64(fnv1a64_file(o.embeddings));
  for (const auto& p : o.similarity) {
    m.params["similarity:" + p] = p;
    m.inputs[p] = hex64(fnv1a64_file(p));
  }
  for (const auto& p : o.analogy) {
    m.params["analogy:" + p] = p;
    m.inputs[p] = hex64(fnv1a64_file(p));
  }

  const auto wv = word_vectors(load_embeddings(o.embeddings, o.binary));
  std::vector<EvalResult> results;
  for (const auto& p : o.similarity) {
    results.push_back(eval_similarity(wv, load_similarity(p)));
  }
  for (const auto& p : o.analogy) {
    results.push_back(eval_analogy(wv, load_analogy(p), kAnalogyEpsilon));
  }
  if (results.empty()) {
    throw std::runtime_error("no datasets given: pass --similarity/--analogy");
  }

  ensure_writable(o.out, g.force);
  {
    std::ofstream out(o.out);
    out << results_json(results) << '\n';
  }
  write_manifest(m, dir_of(o.out));
  std::fputs(results_table(results).c_str(), stdout);
  return 0;
}

namespace {

struct ClaimOutcome {
  std::string file;
  bool pass = true;
};

ClaimOutcome verify_one(const GlobalOpts& g, const VerifyOpts& o,
                        const std::string& claim, const std::string& dir) {
  std::vector<ConcentrationReport> reports;
  std::string filename;
  if (claim == "lemma1") {
    filename = "eq05-08_lemma1.json";
    const double sigma2 = 1.0 / o.d;
    reports.push_back(quadratic_form_check(identity(o.d), sigma2,
                                           {1, 2, 4, 8}, o.trials, o.seed,
                                           g.threads, "[identity]"));
    reports.push_back(quadratic_form_check(
        rademacher_mask(o.d, o.seed).as_matrix(), sigma2, {1, 2, 4, 8},
        o.trials, o.seed, g.threads, "[signature]"));
    reports.push_back(quadratic_form_check(random_rotation(o.d, o.seed),
                                           sigma2, {1, 2, 4, 8}, o.trials,
                                           o.seed, g.threads, "[rotation]"));
  } else if (claim == "corollary1") {
    filename = "eq09_corollary1.json";
    reports.push_back(norm_concentration_check(o.d, o.trials, o.seed,
                                               g.threads));
  } else if (claim == "lemma2") {
    filename = "eq10-18_lemma2.json";
    PartitionCheckParams p;
    p.n = o.n;
    p.d = o.d;
    p.alpha = o.alpha;
    reports.push_back(partition_function_check(
        p, balanced_mask(o.d, o.seed).as_matrix(), o.seed, g.threads));
  } else if (claim == "pmi-ensemble") {
    filename = "eq24-25_pmi_ensemble.json";
    const uint32_t n = std::min<uint32_t>(o.n, 4000);
    reports.push_back(
        pmi_ensemble_check(n, o.d, o.d / 2, 5, o.seed, g.threads));
  } else if (claim == "dependence") {
    filename = "eq26-28_dependence.json";
    reports.push_back(entry_dependence_check(
        8, {25, 100, 400}, std::min<uint64_t>(o.trials, 50000), o.seed,
        g.threads));
  } else if (claim == "reflection") {
    filename = "eq20-30_reflection.json";
    reports.push_back(reflection_recovery_check({50, 100}, 0.01, o.seed));
    if (!o.embeddings.empty()) {
      if (o.contexts.empty()) {
        throw std::runtime_error(
            "reflection on a real run needs --contexts alongside "
            "--embeddings");
      }
      const auto w = load_embeddings(o.embeddings, o.binary);
      const auto c = load_embeddings(o.contexts, o.binary);
      Mat wm(w.store.n, w.store.dim);
      Mat cm(c.store.n, c.store.dim);
      wm.a = w.store.w;
      cm.a = c.store.w;
      const auto est = estimate_reflection(wm, cm);
      ConcentrationReport r;
      r.claim = "reflection/fitted[" + o.embeddings + "]";
      r.seed = o.seed;
      r.extras["d"] = est.d;
      r.extras["plus_count"] = est.plus_count;
      r.extras["plus_fraction"] =
          static_cast<double>(est.plus_count) / est.d;
      r.extras["involution_score"] = est.involution_score;
      // Weak form of the theorem: about half the directions flip.
      r.pass = r.extras["plus_fraction"] > 0.3 &&
               r.extras["plus_fraction"] < 0.7;
      reports.push_back(r);
    }
  } else {
    throw std::runtime_error("unknown claim: " + claim);
  }

  ClaimOutcome outcome;
  outcome.file = (fs::path(dir) / filename).string();
  ensure_writable(outcome.file, g.force);
  std::ofstream out(outcome.file);
  out << "[\n";
  for (size_t i = 0; i < reports.size(); ++i) {
    if (i) out << ",\n";
    out << to_json(reports[i]);
    outcome.pass = outcome.pass && reports[i].pass;
  }
  out << "\n]\n";
  for (const auto& r : reports) {
    std::printf("  %-40s %s\n", r.claim.c_str(),
                r.pass ? "PASS" : "FAIL");
  }
  return outcome;
}

}  // namespace

int run_verify(const GlobalOpts& g, const VerifyOpts& o) {
  const std::string dir = o.out.empty() ? out_path(g, "verify") : o.out;
  fs::create_directories(dir);

  Manifest m = base_manifest(g, "verify", o.seed);
  m.params = {{"claim", o.all ? "all" : o.claim},
              {"d", std::to_string(o.d)},
              {"n", std::to_string(o.n)},
              {"alpha", std::to_string(o.alpha)},
              {"trials", std::to_string(o.trials)},
              {"out", dir}};

  std::vector<std::string> claims;
  if (o.all) {
    claims = {"lemma1", "corollary1", "lemma2",
              "pmi-ensemble", "dependence", "reflection"};
  } else {
    claims = {o.claim};
  }
  bool all_pass = true;
  for (const auto& claim : claims) {
    std::printf("verify %s:\n", claim.c_str());
    const auto outcome = verify_one(g, o, claim, dir);
    all_pass = all_pass && outcome.pass;
  }
  write_manifest(m, dir);
  return all_pass ? 0 : 1;
}

int run_repro_fig2(const GlobalOpts& g, const ReproFig2Opts& o) {
  const std::string dir = o.out.empty() ? out_path(g, "fig2") : o.out;
  fs::create_directories(dir);
  Manifest m = base_manifest(g, "repro-fig2", o.seed);
  m.params = {{"input", o.input},
              {"min-count", std::to_string(o.min_count)},
              {"window", std::to_string(o.window)},
              {"shift-k", std::to_string(o.shift_k)},
              {"bins", std::to_string(o.bins)},
              {"out", dir}};
  m.inputs[o.input] = hex64(fnv1a64_file(o.input));

  VocabOpts v;
  v.input = o.input;
  v.min_count = o.min_count;
  v.out = (fs::path(dir) / "vocab.txt").string();
  run_vocab(g, v);

  PmiOpts p;
  p.vocab = v.out;
  p.input = o.input;
  p.window = o.window;
  p.shift_k = o.shift_k;
  p.out = (fs::path(dir) / "pmi.f64").string();
  run_pmi(g, p);

  SpectrumOpts s;
  s.pmi = p.out;
  s.bins = o.bins;
  s.out = (fs::path(dir) / "spectrum.json").string();
  run_spectrum(g, s);

  // Wigner negative control at matched size, for the semicircle contrast.
  const auto vocab = load_vocabulary(v.out);
  const auto n = static_cast<uint32_t>(std::min<size_t>(vocab.size(), 4000));
  const auto control = wigner_control(n, o.seed);
  const auto control_eigs = eigenvalues_symmetric(control);
  const auto control_report = spectrum_stats(control_eigs, o.bins);
  save_spectrum_report(control_report,
                       (fs::path(dir) / "wigner_control.json").string());
  std::printf("fig2: corpus spectrum written; wigner control n=%u l1=%.4f\n",
              n, semicircle_l1(control_report));
  write_manifest(m, dir);
  return 0;
}

int run_repro_table2(const GlobalOpts& g, const ReproTable2Opts& o) {
  const std::string dir = o.out.empty() ? out_path(g, "table2") : o.out;
  fs::create_directories(dir);
  Manifest m = base_manifest(g, "repro-table2", o.seed);
  m.params = {{"input", o.input},
              {"min-count", std::to_string(o.min_count)},
              {"dim", std::to_string(o.dim)},
              {"window", std::to_string(o.window)},
              {"negatives", std::to_string(o.negatives)},
              {"epochs", std::to_string(o.epochs)},
              {"lr", std::to_string(o.lr)},
              {"out", dir}};
  m.inputs[o.input] = hex64(fnv1a64_file(o.input));

  VocabOpts v;
  v.input = o.input;
  v.min_count = o.min_count;
  v.out = (fs::path(dir) / "vocab.txt").string();
  run_vocab(g, v);

  const auto train_one = [&](bool tied) {
    TrainOpts t;
    t.input = o.input;
    t.vocab = v.out;
    t.dim = o.dim;
    t.window = o.window;
    t.negatives = o.negatives;
    t.epochs = o.epochs;
    t.lr = o.lr;
    t.tied = tied;
    t.seed = o.seed;
    t.out = (fs::path(dir) / (tied ? "sgns_wt.txt" : "sgns.txt")).string();
    if (!tied) {
      t.context_out = (fs::path(dir) / "sgns_context.txt").string();
    }
    run_train(g, t);
    return t.out;
  };
  const auto untied_path = train_one(false);
  const auto tied_path = train_one(true);

  for (const bool tied : {false, true}) {
    EvalOpts e;
    e.embeddings = tied ? tied_path : untied_path;
    e.similarity = o.similarity;
    e.analogy = o.analogy;
    e.out =
        (fs::path(dir) / (tied ? "eval_sgns_wt.json" : "eval_sgns.json"))
            .string();
    if (e.similarity.empty() && e.analogy.empty()) {
      std::printf("table2: no datasets supplied, skipping evaluation\n");
      break;
    }
    std::printf("%s:\n", tied ? "SGNS+WT" : "SGNS");
    run_eval(g, e);
  }
  write_manifest(m, dir);
  return 0;
}

int run_rerun(const std::string& manifest_path, const std::string& out_dir) {
  const Manifest m = load_manifest(manifest_path);
  std::vector<std::string> args;
  if (m.subcommand.rfind("repro-", 0) == 0) {
    args.push_back("repro");
    args.push_back(m.subcommand.substr(6));
  } else {
    args.push_back(m.subcommand);
  }
  args.insert(args.begin(), "--threads=" + std::to_string(m.threads));
  for (const auto& [key, value] : m.params) {
    if (key.rfind("similarity:", 0) == 0) {
      args.push_back("--similarity=" + value);
      continue;
    }
    if (key.rfind("analogy:", 0) == 0) {
      args.push_back("--analogy=" + value);
      continue;
    }
    if (value == "true") {
      args.push_back("--" + key);
      continue;
    }
    if (value == "false" || value.empty()) continue;
    if (key == "out" && !out_dir.empty()) {
      continue;  // redirected below
    }
    args.push_back("--" + key + "=" + value);
  }
  if (!out_dir.empty()) {
    const auto original = m.params.count("out") ? m.params.at("out") : "";
    const auto name = fs::path(original).filename().string();
    args.push_back("--out=" + (fs::path(out_dir) / name).string());
  }
  if (m.subcommand == "verify" && m.params.count("claim") &&
      m.params.at("claim") == "all") {
    // `claim=all` round-trips through the --all switch.
    for (auto& a : args) {
      if (a == "--claim=all") a = "--all";
    }
  }
  if (m.subcommand == "train" || m.subcommand == "verify" ||
      m.subcommand.rfind("repro-", 0) == 0) {
    args.push_back("--seed=" + std::to_string(m.seed));
  }
  return dispatch(args);
}

}  // namespace reflex::cli
