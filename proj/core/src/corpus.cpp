#include "reflex/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <sstream>
#include <stdexcept>

#include "reflex/threading.hpp"

namespace reflex {
namespace {

inline bool is_space(unsigned char c) {
  return c == ' ' || c == '\n' || c == '\t' || c == '\r' || c == '\v' ||
         c == '\f';
}

inline char lower_ascii(unsigned char c) {
  return (c >= 'A' && c <= 'Z') ? static_cast<char>(c + 32)
                                : static_cast<char>(c);
}

[[noreturn]] void bad_utf8(uint64_t offset) {
  throw std::runtime_error("invalid UTF-8 sequence at byte " +
                           std::to_string(offset));
}

// Continuation bytes required after a lead byte >= 0x80, or -1 if the byte
// cannot start a sequence (stray continuation, overlong lead, > U+10FFFF).
int utf8_continuations(unsigned char lead) {
  if ((lead & 0xE0u) == 0xC0u) return lead >= 0xC2u ? 1 : -1;
  if ((lead & 0xF0u) == 0xE0u) return 2;
  if ((lead & 0xF8u) == 0xF0u) return lead <= 0xF4u ? 3 : -1;
  return -1;
}

}  // namespace

bool TokenReader::next(std::string& token) {
  token.clear();
  int ci;
  // Skip leading whitespace.
  while ((ci = in_.get()) != EOF) {
    ++byte_offset_;
    const auto c = static_cast<unsigned char>(ci);
    if (!is_space(c)) break;
  }
  if (ci == EOF) return false;

  for (;;) {
    const auto c = static_cast<unsigned char>(ci);
    if (c < 0x80u) {
      token.push_back(lower_ascii(c));
    } else {
      // Multibyte sequence: validate structure, copy through unchanged.
      const uint64_t lead_offset = byte_offset_ - 1;
      const int need = utf8_continuations(c);
      if (need < 0) bad_utf8(lead_offset);
      char seq[4] = {static_cast<char>(c), 0, 0, 0};
      for (int k = 1; k <= need; ++k) {
        const int peek = in_.peek();
        if (peek == EOF || (static_cast<unsigned char>(peek) & 0xC0u) != 0x80u)
          bad_utf8(lead_offset);
        seq[k] = static_cast<char>(in_.get());
        ++byte_offset_;
      }
      token.append(seq, static_cast<size_t>(need) + 1);
    }
    ci = in_.get();
    if (ci == EOF) break;
    ++byte_offset_;
    if (is_space(static_cast<unsigned char>(ci))) break;
  }
  ++tokens_read_;
  return true;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::istringstream in{std::string(text)};
  TokenReader reader(in);
  std::vector<std::string> out;
  std::string tok;
  while (reader.next(tok)) out.push_back(tok);
  return out;
}

namespace {

Vocabulary finish_vocabulary(
    std::unordered_map<std::string, uint64_t>&& freq, uint64_t total_tokens,
    uint64_t min_count) {
  std::vector<std::pair<std::string, uint64_t>> kept;
  kept.reserve(freq.size());
  for (auto& [word, count] : freq) {
    if (count >= min_count) kept.emplace_back(word, count);
  }
  if (kept.empty()) {
    throw std::runtime_error("no word reaches min_count=" +
                             std::to_string(min_count));
  }
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });

  Vocabulary v;
  v.total_tokens = total_tokens;
  v.min_count = min_count;
  v.words.reserve(kept.size());
  v.counts.reserve(kept.size());
  v.index.reserve(kept.size());
  for (auto& [word, count] : kept) {
    v.index.emplace(word, static_cast<uint32_t>(v.words.size()));
    v.words.push_back(std::move(word));
    v.counts.push_back(count);
  }
  return v;
}

}  // namespace

Vocabulary build_vocabulary(const std::vector<std::string>& tokens,
                            uint64_t min_count) {
  if (min_count < 1) throw std::invalid_argument("min_count must be >= 1");
  std::unordered_map<std::string, uint64_t> freq;
  for (const auto& t : tokens) ++freq[t];
  return finish_vocabulary(std::move(freq), tokens.size(), min_count);
}

Vocabulary build_vocabulary(std::istream& in, uint64_t min_count,
                            int threads) {
  if (min_count < 1) throw std::invalid_argument("min_count must be >= 1");

  if (threads <= 1) {
    std::unordered_map<std::string, uint64_t> freq;
    TokenReader reader(in);
    std::string tok;
    uint64_t total = 0;
    while (reader.next(tok)) {
      ++freq[tok];
      ++total;
    }
    return finish_vocabulary(std::move(freq), total, min_count);
  }

  // Sharded counting: the token stream is read once, tokens are dealt to
  // fixed shards by position, and shard maps are merged. Integer counts make
  // the merge equal to the sequential result exactly.
  const size_t nshards = static_cast<size_t>(threads);
  std::vector<std::vector<std::string>> shards(nshards);
  {
    TokenReader reader(in);
    std::string tok;
    size_t next = 0;
    constexpr size_t kChunk = 4096;
    size_t in_chunk = 0;
    while (reader.next(tok)) {
      shards[next].push_back(std::move(tok));
      if (++in_chunk == kChunk) {
        in_chunk = 0;
        next = (next + 1) % nshards;
      }
    }
  }
  std::vector<std::unordered_map<std::string, uint64_t>> maps(nshards);
  parallel_blocks(nshards, threads, [&](size_t s) {
    auto& m = maps[s];
    for (const auto& t : shards[s]) ++m[t];
  });
  uint64_t total = 0;
  std::unordered_map<std::string, uint64_t> freq;
  for (size_t s = 0; s < nshards; ++s) {
    total += shards[s].size();
    for (auto& [word, count] : maps[s]) freq[word] += count;
  }
  return finish_vocabulary(std::move(freq), total, min_count);
}

std::string vocabulary_to_string(const Vocabulary& vocab) {
  std::string out = "#total_tokens=" + std::to_string(vocab.total_tokens) +
                    "\n";
  for (size_t i = 0; i < vocab.size(); ++i) {
    out += vocab.words[i];
    out += '\t';
    out += std::to_string(vocab.counts[i]);
    out += '\n';
  }
  return out;
}

void save_vocabulary(const Vocabulary& vocab, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << vocabulary_to_string(vocab);
  if (!out) throw std::runtime_error("write failed: " + path);
}

Vocabulary load_vocabulary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open vocabulary: " + path);
  std::string line;
  if (!std::getline(in, line) || line.rfind("#total_tokens=", 0) != 0) {
    throw std::runtime_error("missing #total_tokens header in " + path);
  }
  Vocabulary v;
  v.total_tokens = std::stoull(line.substr(std::strlen("#total_tokens=")));
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw std::runtime_error("malformed vocabulary line: " + line);
    }
    v.index.emplace(line.substr(0, tab),
                    static_cast<uint32_t>(v.words.size()));
    v.words.push_back(line.substr(0, tab));
    v.counts.push_back(std::stoull(line.substr(tab + 1)));
  }
  if (v.words.empty()) throw std::runtime_error("empty vocabulary: " + path);
  for (size_t i = 1; i < v.counts.size(); ++i) {
    if (v.counts[i] > v.counts[i - 1]) {
      throw std::runtime_error("vocabulary not sorted by count: " + path);
    }
  }
  v.min_count = v.counts.back();
  return v;
}

std::vector<uint32_t> ids_from_tokens(const Vocabulary& vocab,
                                      const std::vector<std::string>& tokens,
                                      bool keep_positions) {
  std::vector<uint32_t> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) {
    const auto id = vocab.id_of(t);
    if (id) {
      ids.push_back(*id);
    } else if (keep_positions) {
      ids.push_back(kNoWord);
    }
  }
  return ids;
}

std::vector<uint32_t> ids_from_stream(const Vocabulary& vocab,
                                      std::istream& in, bool keep_positions) {
  std::vector<uint32_t> ids;
  TokenReader reader(in);
  std::string tok;
  while (reader.next(tok)) {
    const auto id = vocab.id_of(tok);
    if (id) {
      ids.push_back(*id);
    } else if (keep_positions) {
      ids.push_back(kNoWord);
    }
  }
  return ids;
}

std::vector<double> rank_unigram_probs(size_t n, double alpha) {
  if (n == 0) throw std::invalid_argument("empty vocabulary");
  if (!(alpha > 0.0) || alpha > 1.0) {
    throw std::invalid_argument("alpha must lie in (0, 1]");
  }
  std::vector<double> probs(n);
  double norm = 0.0;
  for (size_t i = 0; i < n; ++i) {
    probs[i] = std::pow(static_cast<double>(i + 1), alpha - 1.0);
    norm += probs[i];
  }
  for (auto& p : probs) p /= norm;
  return probs;
}

UnigramModel unigram_probs(const Vocabulary& vocab, double alpha,
                           UnigramModel::Mode mode) {
  if (vocab.size() == 0) throw std::invalid_argument("empty vocabulary");
  if (!(alpha > 0.0) || alpha > 1.0) {
    throw std::invalid_argument("alpha must lie in (0, 1]");
  }
  UnigramModel m;
  m.alpha = alpha;
  m.mode = mode;
  if (mode == UnigramModel::Mode::kRank) {
    m.probs = rank_unigram_probs(vocab.size(), alpha);
    double h = 0.0;
    for (size_t i = 0; i < vocab.size(); ++i) {
      h += std::pow(static_cast<double>(i + 1), alpha - 1.0);
    }
    m.normalizer = h;
    return m;
  }
  m.probs.resize(vocab.size());
  double norm = 0.0;
  for (size_t i = 0; i < vocab.size(); ++i) {
    m.probs[i] = std::pow(static_cast<double>(vocab.counts[i]), 1.0 - alpha);
    norm += m.probs[i];
  }
  m.normalizer = norm;
  for (auto& p : m.probs) p /= norm;
  return m;
}

std::vector<double> subsample_keep_prob(const Vocabulary& vocab,
                                        double threshold) {
  if (!(threshold > 0.0)) throw std::invalid_argument("threshold must be > 0");
  std::vector<double> keep(vocab.size(), 1.0);
  const auto total = static_cast<double>(vocab.total_tokens);
  for (size_t i = 0; i < vocab.size(); ++i) {
    const double f = static_cast<double>(vocab.counts[i]) / total;
    if (f > threshold) {
      keep[i] = std::min(1.0, std::sqrt(threshold / f) + threshold / f);
    }
  }
  return keep;
}

}  // namespace reflex
