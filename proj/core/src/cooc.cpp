#include "reflex/cooc.hpp"

#include <algorithm>
#include <atomic>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <unordered_map>

#include "reflex/corpus.hpp"
#include "reflex/threading.hpp"

namespace reflex {
namespace {

constexpr char kMagic[4] = {'R', 'X', 'C', '1'};

// Index of (i, j), i <= j, in a row-major upper-triangular layout.
inline uint64_t tri_index(uint64_t i, uint64_t j, uint64_t n) {
  return i * (2 * n - i + 1) / 2 + (j - i);
}

inline uint64_t tri_size(uint64_t n) { return n * (n + 1) / 2; }

}  // namespace

uint64_t SparseCooc::count_of(uint32_t i, uint32_t j) const {
  if (i > j) std::swap(i, j);
  const CoocEntry probe{i, j, 0};
  auto it = std::lower_bound(entries.begin(), entries.end(), probe,
                             [](const CoocEntry& a, const CoocEntry& b) {
                               return a.i != b.i ? a.i < b.i : a.j < b.j;
                             });
  if (it == entries.end() || it->i != i || it->j != j) return 0;
  return it->count;
}

SparseCooc count_cooccurrences(std::span<const uint32_t> ids, uint32_t window,
                               uint32_t n, int threads) {
  if (window < 1) throw std::invalid_argument("window must be >= 1");
  if (n == 0) throw std::invalid_argument("vocabulary size must be positive");
  for (const uint32_t id : ids) {
    if (id != kNoWord && id >= n) {
      throw std::invalid_argument("token id out of range: " +
                                  std::to_string(id));
    }
  }

  SparseCooc out;
  out.n = n;
  out.window = window;
  out.word_context_totals.assign(n, 0);

  const size_t total = ids.size();
  const size_t nshards =
      std::max<size_t>(1, std::min<size_t>(threads, total / 4096 + 1));
  // Each shard owns a contiguous run of center positions t; the (t, t+o)
  // events it emits may reach into the next shard's tokens, which is why the
  // shards only partition `t`, not the pairs.
  std::vector<std::pair<size_t, size_t>> ranges;
  const size_t chunk = (total + nshards - 1) / std::max<size_t>(nshards, 1);
  for (size_t start = 0; start < total; start += chunk) {
    ranges.emplace_back(start, std::min(total, start + chunk));
  }

  std::vector<std::vector<uint64_t>> shard_marginals(
      ranges.size(), std::vector<uint64_t>(n, 0));

  // Dense accumulation (~1 GiB ceiling) when every pair count provably
  // fits u32; larger vocabularies fall back to per-shard hash maps.
  const bool dense = tri_size(n) <= (uint64_t{1} << 28) &&
                     static_cast<uint64_t>(total) * window < UINT32_MAX;

  if (dense) {
    std::vector<std::atomic<uint32_t>> grid(tri_size(n));
    parallel_blocks(ranges.size(), threads, [&](size_t s) {
      auto& marg = shard_marginals[s];
      const auto [begin, end] = ranges[s];
      for (size_t t = begin; t < end; ++t) {
        const uint32_t a = ids[t];
        if (a == kNoWord) continue;
        const size_t stop = std::min(total, t + window + 1);
        for (size_t u = t + 1; u < stop; ++u) {
          const uint32_t b = ids[u];
          if (b == kNoWord) continue;
          const auto [lo, hi] = std::minmax(a, b);
          grid[tri_index(lo, hi, n)].fetch_add(1, std::memory_order_relaxed);
          ++marg[a];
          ++marg[b];
        }
      }
    });
    for (uint32_t i = 0; i < n; ++i) {
      const uint64_t row = tri_index(i, i, n);
      for (uint32_t j = i; j < n; ++j) {
        const uint32_t c = grid[row + (j - i)].load(std::memory_order_relaxed);
        if (c) {
          out.entries.push_back({i, j, c});
          out.pair_total += c;
        }
      }
    }
  } else {
    std::vector<std::unordered_map<uint64_t, uint64_t>> maps(ranges.size());
    parallel_blocks(ranges.size(), threads, [&](size_t s) {
      auto& map = maps[s];
      auto& marg = shard_marginals[s];
      const auto [begin, end] = ranges[s];
      for (size_t t = begin; t < end; ++t) {
        const uint32_t a = ids[t];
        if (a == kNoWord) continue;
        const size_t stop = std::min(total, t + window + 1);
        for (size_t u = t + 1; u < stop; ++u) {
          const uint32_t b = ids[u];
          if (b == kNoWord) continue;
          const auto [lo, hi] = std::minmax(a, b);
          ++map[(uint64_t{lo} << 32) | hi];
          ++marg[a];
          ++marg[b];
        }
      }
    });
    std::unordered_map<uint64_t, uint64_t> merged;
    for (auto& map : maps) {
      for (const auto& [key, count] : map) merged[key] += count;
    }
    out.entries.reserve(merged.size());
    for (const auto& [key, count] : merged) {
      out.entries.push_back({static_cast<uint32_t>(key >> 32),
                             static_cast<uint32_t>(key), count});
      out.pair_total += count;
    }
    std::sort(out.entries.begin(), out.entries.end(),
              [](const CoocEntry& a, const CoocEntry& b) {
                return a.i != b.i ? a.i < b.i : a.j < b.j;
              });
  }

  for (const auto& marg : shard_marginals) {
    for (uint32_t i = 0; i < n; ++i) out.word_context_totals[i] += marg[i];
  }
  return out;
}

void save_cooc(const SparseCooc& cooc, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out.write(kMagic, 4);
  const uint32_t fields[3] = {cooc.n, cooc.window, 0};
  out.write(reinterpret_cast<const char*>(fields), sizeof(fields));
  for (const auto& e : cooc.entries) {
    out.write(reinterpret_cast<const char*>(&e.i), sizeof(e.i));
    out.write(reinterpret_cast<const char*>(&e.j), sizeof(e.j));
    out.write(reinterpret_cast<const char*>(&e.count), sizeof(e.count));
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

SparseCooc load_cooc(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open co-occurrence file: " + path);
  char magic[4];
  uint32_t fields[3];
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(fields), sizeof(fields));
  if (!in || std::memcmp(magic, kMagic, 4) != 0) {
    throw std::runtime_error("not a co-occurrence file: " + path);
  }
  SparseCooc cooc;
  cooc.n = fields[0];
  cooc.window = fields[1];
  cooc.word_context_totals.assign(cooc.n, 0);
  CoocEntry e;
  while (in.read(reinterpret_cast<char*>(&e.i), sizeof(e.i))) {
    in.read(reinterpret_cast<char*>(&e.j), sizeof(e.j));
    in.read(reinterpret_cast<char*>(&e.count), sizeof(e.count));
    if (!in) throw std::runtime_error("truncated co-occurrence file: " + path);
    if (e.i > e.j || e.j >= cooc.n) {
      throw std::runtime_error("corrupt co-occurrence entry in " + path);
    }
    cooc.entries.push_back(e);
    cooc.pair_total += e.count;
    cooc.word_context_totals[e.i] += e.count;
    cooc.word_context_totals[e.j] += e.count;
  }
  return cooc;
}

}  // namespace reflex
