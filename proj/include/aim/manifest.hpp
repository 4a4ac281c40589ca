#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace aim {

// FNV-1a over the file's bytes; used to fingerprint run artifacts.
std::uint64_t fnv1a_file(const std::string& path);
std::string fnv1a_file_hex(const std::string& path);

// Record of one CLI run: the command, every resolved setting, the files
// read and written, output fingerprints, and wall-clock duration. The
// duration makes the manifest itself run-specific; artifact hashes are
// what reruns compare.
struct RunManifest {
  std::string command;
  std::map<std::string, std::string> config;  // resolved flag values
  std::uint64_t seed = 0;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  double duration_seconds = 0.0;

  void write(const std::string& path) const;  // JSON, hashes filled in here
};

}  // namespace aim
