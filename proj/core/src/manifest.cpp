#include "reflex/manifest.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace reflex {

uint64_t fnv1a64(std::string_view data) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (const char c : data) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ull;
  }
  return h;
}

uint64_t fnv1a64_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open for checksum: " + path);
  uint64_t h = 0xcbf29ce484222325ull;
  char buf[1 << 16];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    const auto got = in.gcount();
    for (std::streamsize i = 0; i < got; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ull;
    }
    if (!in) break;
  }
  return h;
}

std::string hex64(uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(value));
  return buf;
}

namespace {

nlohmann::json to_json(const Manifest& m) {
  return nlohmann::json{
      {"tool", m.tool},         {"version", m.version},
      {"subcommand", m.subcommand}, {"params", m.params},
      {"inputs", m.inputs},     {"seed", m.seed},
      {"threads", m.threads},
  };
}

}  // namespace

std::string manifest_json(const Manifest& m) { return to_json(m).dump(2); }

std::string manifest_hash(const Manifest& m) {
  // dump() with sorted keys (std::map) is canonical enough to hash.
  return hex64(fnv1a64(to_json(m).dump()));
}

Manifest manifest_from_json(const std::string& json_text) {
  const auto j = nlohmann::json::parse(json_text);
  Manifest m;
  m.tool = j.at("tool").get<std::string>();
  m.version = j.at("version").get<std::string>();
  m.subcommand = j.at("subcommand").get<std::string>();
  m.params = j.at("params").get<std::map<std::string, std::string>>();
  m.inputs = j.at("inputs").get<std::map<std::string, std::string>>();
  m.seed = j.at("seed").get<uint64_t>();
  m.threads = j.at("threads").get<int>();
  return m;
}

Manifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open manifest: " + path);
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return manifest_from_json(text);
}

std::string write_manifest(const Manifest& m, const std::string& dir) {
  const std::string hash = manifest_hash(m);
  const std::string path = dir + "/manifest." + hash + ".json";
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << manifest_json(m) << '\n';
  if (!out) throw std::runtime_error("write failed: " + path);
  return hash;
}

}  // namespace reflex
