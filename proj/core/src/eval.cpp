#include "reflex/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace reflex {
namespace {

std::string lowercase(std::string s) {
  for (auto& c : s) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c + 32);
  }
  return s;
}

std::vector<std::string> split_ws(const std::string& line) {
  std::istringstream in(line);
  std::vector<std::string> fields;
  std::string f;
  while (in >> f) fields.push_back(f);
  return fields;
}

bool parse_double(const std::string& s, double* out) {
  try {
    size_t used = 0;
    *out = std::stod(s, &used);
    return used == s.size();
  } catch (...) {
    return false;
  }
}

std::string basename_of(const std::string& path) {
  const auto slash = path.find_last_of('/');
  return slash == std::string::npos ? path : path.substr(slash + 1);
}

}  // namespace

SimilarityDataset load_similarity(const std::string& path,
                                  const std::string& name) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset: " + path);
  SimilarityDataset ds;
  ds.name = name.empty() ? basename_of(path) : name;
  std::set<std::pair<std::string, std::string>> seen;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    // Some distributions use comma separation; normalize to whitespace.
    std::replace(line.begin(), line.end(), ',', ' ');
    std::replace(line.begin(), line.end(), '\t', ' ');
    const auto fields = split_ws(line);
    if (fields.size() < 3) continue;
    double score = 0.0;
    if (!parse_double(fields[2], &score)) {
      if (lineno == 1) continue;  // header
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": non-numeric similarity score");
    }
    SimilarityDataset::Pair p{lowercase(fields[0]), lowercase(fields[1]),
                              score};
    auto key = std::minmax(p.a, p.b);
    if (!seen.insert({key.first, key.second}).second) ++ds.duplicates;
    if (!std::isfinite(score)) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": non-finite similarity score");
    }
    ds.pairs.push_back(std::move(p));
  }
  if (ds.pairs.empty()) throw std::runtime_error("empty dataset: " + path);
  return ds;
}

AnalogyDataset load_analogy(const std::string& path, const std::string& name) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset: " + path);
  AnalogyDataset ds;
  ds.name = name.empty() ? basename_of(path) : name;
  std::string line;
  uint32_t section = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line[0] == ':') {
      ds.sections.push_back(line.substr(1));
      section = static_cast<uint32_t>(ds.sections.size() - 1);
      continue;
    }
    auto fields = split_ws(line);
    if (fields.size() != 4) continue;
    for (auto& f : fields) f = lowercase(f);
    if (fields[0].empty() || fields[1].empty() || fields[2].empty() ||
        fields[3].empty()) {
      continue;
    }
    ds.questions.push_back(
        {std::move(fields[0]), std::move(fields[1]), std::move(fields[2]),
         std::move(fields[3]), section});
  }
  if (ds.sections.empty()) ds.sections.push_back("all");
  if (ds.questions.empty()) throw std::runtime_error("empty dataset: " + path);
  return ds;
}

double cosine(std::span<const double> u, std::span<const double> v) {
  require(u.size() == v.size() && !u.empty(), "vectors must match in size");
  double dot = 0.0;
  double nu = 0.0;
  double nv = 0.0;
  for (size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    nu += u[i] * u[i];
    nv += v[i] * v[i];
  }
  if (nu == 0.0 || nv == 0.0) {
    throw std::invalid_argument("cosine of a zero vector");
  }
  return dot / (std::sqrt(nu) * std::sqrt(nv));
}

namespace {

std::vector<double> fractional_ranks(std::span<const double> xs) {
  const size_t n = xs.size();
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return xs[a] < xs[b]; });
  std::vector<double> ranks(n);
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j + 1 < n && xs[order[j + 1]] == xs[order[i]]) ++j;
    const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

double pearson(std::span<const double> xs, std::span<const double> ys) {
  const auto n = static_cast<double>(xs.size());
  double mx = 0.0;
  double my = 0.0;
  for (size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx;
    const double dy = ys[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace

double spearman(std::span<const double> xs, std::span<const double> ys) {
  require(xs.size() == ys.size(), "rank lists must match in length");
  if (xs.size() < 2) throw std::invalid_argument("need at least 2 pairs");
  const auto rx = fractional_ranks(xs);
  const auto ry = fractional_ranks(ys);
  return pearson(rx, ry);
}

WordVectors word_vectors(const EmbeddingStore& store,
                         const std::vector<std::string>& words) {
  require(words.size() == store.n, "word list does not match store");
  WordVectors wv;
  wv.n = store.n;
  wv.d = store.dim;
  wv.words = words;
  wv.vec = store.w;
  wv.index.reserve(words.size());
  for (uint32_t i = 0; i < store.n; ++i) wv.index.emplace(words[i], i);
  return wv;
}

WordVectors word_vectors(const LoadedEmbeddings& loaded) {
  return word_vectors(loaded.store, loaded.words);
}

EvalResult eval_similarity(const WordVectors& wv,
                           const SimilarityDataset& dataset) {
  require(!dataset.pairs.empty(), "empty dataset");
  std::vector<double> human;
  std::vector<double> model;
  size_t skipped = 0;
  for (const auto& p : dataset.pairs) {
    const auto a = wv.id_of(p.a);
    const auto b = wv.id_of(p.b);
    if (!a || !b) {
      ++skipped;
      continue;
    }
    human.push_back(p.score);
    model.push_back(cosine({wv.row(*a), wv.d}, {wv.row(*b), wv.d}));
  }
  if (human.empty()) {
    throw std::runtime_error("no in-vocabulary pairs in " + dataset.name);
  }
  EvalResult r;
  r.dataset = dataset.name;
  r.metric = "spearman_rho";
  r.value = human.size() >= 2 ? spearman(model, human) : 0.0;
  r.total = dataset.pairs.size();
  r.skipped = skipped;
  r.coverage = static_cast<double>(r.total - skipped) /
               static_cast<double>(r.total);
  return r;
}

std::vector<RankedWord> three_cos_mul(const WordVectors& wv, uint32_t a,
                                      uint32_t b, uint32_t c, double epsilon,
                                      size_t top_k) {
  require(a < wv.n && b < wv.n && c < wv.n, "query id out of range");
  require(top_k >= 1, "top_k must be >= 1");

  // Normalized rows; zero-norm rows cannot be ranked or queried.
  const auto norm_of = [&](uint32_t i) {
    double s = 0.0;
    const double* r = wv.row(i);
    for (uint32_t m = 0; m < wv.d; ++m) s += r[m] * r[m];
    return std::sqrt(s);
  };
  const double na = norm_of(a);
  const double nb = norm_of(b);
  const double nc = norm_of(c);
  if (na == 0.0 || nb == 0.0 || nc == 0.0) {
    throw std::invalid_argument("query word has a zero vector");
  }

  std::vector<RankedWord> best;
  best.reserve(top_k + 1);
  const double* ra = wv.row(a);
  const double* rb = wv.row(b);
  const double* rc = wv.row(c);
  for (uint32_t x = 0; x < wv.n; ++x) {
    if (x == a || x == b || x == c) continue;
    const double nx = norm_of(x);
    if (nx == 0.0) continue;
    const double* rx = wv.row(x);
    double da = 0.0;
    double db = 0.0;
    double dc = 0.0;
    for (uint32_t m = 0; m < wv.d; ++m) {
      da += rx[m] * ra[m];
      db += rx[m] * rb[m];
      dc += rx[m] * rc[m];
    }
    const double ca = (1.0 + da / (nx * na)) / 2.0;
    const double cb = (1.0 + db / (nx * nb)) / 2.0;
    const double cc = (1.0 + dc / (nx * nc)) / 2.0;
    const double score = cb * cc / (ca + epsilon);
    if (best.size() < top_k || score > best.back().score) {
      best.push_back({x, score});
      std::sort(best.begin(), best.end(),
                [](const RankedWord& p, const RankedWord& q) {
                  return p.score != q.score ? p.score > q.score
                                            : p.id < q.id;
                });
      if (best.size() > top_k) best.pop_back();
    }
  }
  return best;
}

EvalResult eval_analogy(const WordVectors& wv, const AnalogyDataset& dataset,
                        double epsilon) {
  require(!dataset.questions.empty(), "empty dataset");
  size_t answerable = 0;
  size_t correct = 0;
  for (const auto& q : dataset.questions) {
    const auto a = wv.id_of(q.a);
    const auto b = wv.id_of(q.b);
    const auto c = wv.id_of(q.c);
    const auto expected = wv.id_of(q.expected);
    if (!a || !b || !c || !expected) continue;
    ++answerable;
    const auto ranked = three_cos_mul(wv, *a, *b, *c, epsilon, 1);
    if (!ranked.empty() && ranked.front().id == *expected) ++correct;
  }
  if (answerable == 0) {
    throw std::runtime_error("no answerable questions in " + dataset.name);
  }
  EvalResult r;
  r.dataset = dataset.name;
  r.metric = "accuracy";
  r.value = static_cast<double>(correct) / static_cast<double>(answerable);
  r.total = dataset.questions.size();
  r.skipped = r.total - answerable;
  r.coverage = static_cast<double>(answerable) / static_cast<double>(r.total);
  return r;
}

std::string results_json(std::span<const EvalResult> results) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : results) {
    arr.push_back({{"dataset", r.dataset},
                   {"metric", r.metric},
                   {"value", r.value},
                   {"coverage", r.coverage},
                   {"skipped", r.skipped},
                   {"total", r.total}});
  }
  return arr.dump(2);
}

std::string results_table(std::span<const EvalResult> results) {
  std::string out;
  char line[160];
  std::snprintf(line, sizeof(line), "%-24s %-14s %8s %10s %8s\n", "dataset",
                "metric", "value", "coverage", "skipped");
  out += line;
  for (const auto& r : results) {
    std::snprintf(line, sizeof(line), "%-24s %-14s %8.3f %10.3f %8zu\n",
                  r.dataset.c_str(), r.metric.c_str(), r.value, r.coverage,
                  r.skipped);
    out += line;
  }
  return out;
}

}  // namespace reflex
