#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace reflex {

// Upper-triangular co-occurrence counts from a flat symmetric window: for
// every position t and offset 1..L the unordered pair (w_t, w_{t+o}) counts
// once. Each event also adds one to both endpoints' marginals, so the
// marginals sum to twice the event count.
struct CoocEntry {
  uint32_t i = 0;
  uint32_t j = 0;  // i <= j
  uint64_t count = 0;
};

struct SparseCooc {
  uint32_t n = 0;       // vocabulary size
  uint32_t window = 1;  // L
  std::vector<CoocEntry> entries;  // sorted by (i, j)
  uint64_t pair_total = 0;
  std::vector<uint64_t> word_context_totals;  // #(i), size n

  uint64_t count_of(uint32_t i, uint32_t j) const;
};

// `ids` may contain kNoWord placeholders; pairs never span such a position.
// Sharded counting merges to exactly the sequential result.
SparseCooc count_cooccurrences(std::span<const uint32_t> ids, uint32_t window,
                               uint32_t n, int threads = 1);

// Binary triplet file: 16-byte header (magic 'RXC1', n, window, pad), then
// (i: u32, j: u32, count: u64) little-endian, sorted by (i, j).
void save_cooc(const SparseCooc& cooc, const std::string& path);
SparseCooc load_cooc(const std::string& path);

}  // namespace reflex
