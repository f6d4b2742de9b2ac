// Writes a deterministic Zipf-ish synthetic corpus for shell-level smoke
// tests: make_fixture OUT TOKENS VOCAB SEED

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <string>
#include <vector>

#include "reflex/rng.hpp"
#include "reflex/sgns.hpp"

int main(int argc, char** argv) {
  if (argc != 5) {
    std::fprintf(stderr, "usage: %s OUT TOKENS VOCAB SEED\n", argv[0]);
    return 2;
  }
  const std::string out_path = argv[1];
  const auto tokens = std::strtoull(argv[2], nullptr, 10);
  const auto vocab = std::strtoul(argv[3], nullptr, 10);
  const auto seed = std::strtoull(argv[4], nullptr, 10);

  std::vector<double> weights(vocab);
  for (size_t i = 0; i < vocab; ++i) {
    weights[i] = 1.0 / std::pow(static_cast<double>(i + 1), 0.9);
  }
  reflex::AliasTable table(weights);
  reflex::Philox4x32 rng(seed);

  std::ofstream out(out_path, std::ios::binary);
  if (!out) {
    std::fprintf(stderr, "cannot open %s\n", out_path.c_str());
    return 1;
  }
  for (uint64_t t = 0; t < tokens; ++t) {
    if (t) out << ' ';
    out << 'w' << table.sample(rng);
  }
  out << '\n';
  return 0;
}
