#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace reflex {

// Sentinel id for out-of-vocabulary positions when the caller asks to
// preserve token positions instead of closing the stream up.
inline constexpr uint32_t kNoWord = UINT32_MAX;

// Frequency-sorted vocabulary. Ids are dense 0..n-1, counts non-increasing,
// ties broken lexicographically; rank of id i is i+1.
struct Vocabulary {
  std::vector<std::string> words;
  std::vector<uint64_t> counts;
  uint64_t total_tokens = 0;  // length of the full token stream, T
  uint64_t min_count = 1;
  std::unordered_map<std::string, uint32_t> index;

  size_t size() const { return words.size(); }
  uint32_t rank(uint32_t id) const { return id + 1; }

  std::optional<uint32_t> id_of(std::string_view w) const {
    auto it = index.find(std::string(w));
    if (it == index.end()) return std::nullopt;
    return it->second;
  }
};

// Streaming whitespace tokenizer: yields maximal runs of non-whitespace
// bytes, ASCII-lowercased. Input must be valid UTF-8; a malformed sequence
// raises std::runtime_error naming the byte offset.
class TokenReader {
 public:
  explicit TokenReader(std::istream& in) : in_(in) {}

  // Returns false at end of stream; otherwise fills `token`.
  bool next(std::string& token);

  uint64_t tokens_read() const { return tokens_read_; }
  uint64_t bytes_read() const { return byte_offset_; }

 private:
  std::istream& in_;
  uint64_t byte_offset_ = 0;
  uint64_t tokens_read_ = 0;
};

std::vector<std::string> tokenize(std::string_view text);

// Counts tokens of the full stream, keeps words with count >= min_count,
// sorts by (count desc, word asc). Throws if nothing survives.
Vocabulary build_vocabulary(std::istream& in, uint64_t min_count,
                            int threads = 1);
Vocabulary build_vocabulary(const std::vector<std::string>& tokens,
                            uint64_t min_count);

// One `word<TAB>count` line per id, preceded by `#total_tokens=T`.
void save_vocabulary(const Vocabulary& vocab, const std::string& path);
Vocabulary load_vocabulary(const std::string& path);
std::string vocabulary_to_string(const Vocabulary& vocab);

// Maps a token stream to ids. By default out-of-vocabulary tokens are
// dropped and the stream closes up; with keep_positions they become kNoWord
// placeholders that later block co-occurrence pairing across the gap.
std::vector<uint32_t> ids_from_tokens(const Vocabulary& vocab,
                                      const std::vector<std::string>& tokens,
                                      bool keep_positions = false);
std::vector<uint32_t> ids_from_stream(const Vocabulary& vocab,
                                      std::istream& in,
                                      bool keep_positions = false);

// Smoothed unigram distribution. Rank mode is p_i = r_i^(alpha-1) / H_{n,alpha}
// with H_{n,alpha} = sum_k k^(alpha-1); count mode smooths empirical counts,
// p_i proportional to counts_i^(1-alpha), the convention negative samplers use.
struct UnigramModel {
  enum class Mode { kRank, kCount };
  double alpha = 1.0;
  Mode mode = Mode::kRank;
  std::vector<double> probs;
  double normalizer = 0.0;
};

UnigramModel unigram_probs(const Vocabulary& vocab, double alpha,
                           UnigramModel::Mode mode = UnigramModel::Mode::kRank);

// Rank-mode probabilities for ranks 1..n without a vocabulary; the theory
// checks use this directly, decoupled from corpus counts.
std::vector<double> rank_unigram_probs(size_t n, double alpha);

// Frequent-word subsampling: keep_i = min(1, sqrt(t/f_i) + t/f_i).
std::vector<double> subsample_keep_prob(const Vocabulary& vocab,
                                        double threshold);

}  // namespace reflex
