#include "aim/manifest.hpp"

#include <fstream>

#include "aim/errors.hpp"
#include "json.hpp"

namespace aim {

std::uint64_t fnv1a_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot hash missing file '" + path + "'");
  std::uint64_t hash = 0xcbf29ce484222325ull;
  char buf[4096];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    const std::streamsize got = in.gcount();
    for (std::streamsize i = 0; i < got; ++i) {
      hash ^= static_cast<unsigned char>(buf[i]);
      hash *= 0x100000001b3ull;
    }
  }
  return hash;
}

std::string fnv1a_file_hex(const std::string& path) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a_file(path)));
  return buf;
}

void RunManifest::write(const std::string& path) const {
  nlohmann::ordered_json j;
  j["command"] = command;
  j["seed"] = seed;
  j["config"] = config;
  j["inputs"] = inputs;
  nlohmann::ordered_json outs = nlohmann::ordered_json::object();
  for (const std::string& out : outputs) outs[out] = fnv1a_file_hex(out);
  j["outputs"] = outs;
  j["duration_seconds"] = duration_seconds;

  std::ofstream out(path);
  if (!out) throw Error("cannot write manifest '" + path + "'");
  out << j.dump(2) << '\n';
}

}  // namespace aim
