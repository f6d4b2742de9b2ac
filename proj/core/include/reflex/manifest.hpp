#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>

namespace reflex {

// Every CLI run writes one of these next to its outputs: the subcommand,
// all parameters, the seed, and checksums of the inputs. Re-running from a
// manifest must reproduce deterministic outputs byte for byte.
struct Manifest {
  std::string tool = "reflex";
  std::string version = "0.1.0";
  std::string subcommand;
  std::map<std::string, std::string> params;
  std::map<std::string, std::string> inputs;  // path -> fnv1a64 hex
  uint64_t seed = 0;
  int threads = 1;
};

uint64_t fnv1a64(std::string_view data);
uint64_t fnv1a64_file(const std::string& path);
std::string hex64(uint64_t value);

std::string manifest_json(const Manifest& m);
// Content hash of the canonical JSON encoding.
std::string manifest_hash(const Manifest& m);
Manifest manifest_from_json(const std::string& json_text);
Manifest load_manifest(const std::string& path);

// Writes <dir>/manifest.<hash>.json and returns the hash. Reports default
// their filenames from this hash so experiment outputs never silently
// collide.
std::string write_manifest(const Manifest& m, const std::string& dir);

}  // namespace reflex
