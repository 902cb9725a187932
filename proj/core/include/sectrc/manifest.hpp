#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace sectrc {

// Provenance record written once per artifact directory. Contains no
// timestamps or host identifiers so reruns with equal inputs produce a
// byte-identical file.
struct RunManifest {
  std::string tool;          // "sectrc <version>"
  std::string command;       // subcommand that produced the directory
  std::string config_json;   // effective config after precedence resolution
  std::string corpus_path;
  std::string corpus_checksum;  // "fnv1a64:<hex>"
  std::vector<uint64_t> seeds;
  std::vector<std::string> outputs;  // paths relative to the directory
  int selected_k = -1;               // set when automatic k selection ran

  std::string to_json_string() const;
  static RunManifest from_json_string(const std::string& text);
  void save(const std::string& path) const;
  static RunManifest load(const std::string& path);
};

// "fnv1a64:<hex>" digest of a file's bytes.
std::string file_checksum(const std::string& path);

}  // namespace sectrc
