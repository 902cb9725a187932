#include "sectrc/manifest.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "sectrc/digest.hpp"

namespace sectrc {

using nlohmann::json;

std::string RunManifest::to_json_string() const {
  json j;
  j["tool"] = tool;
  j["command"] = command;
  j["config"] = config_json.empty() ? json::object() : json::parse(config_json);
  j["corpus_path"] = corpus_path;
  j["corpus_checksum"] = corpus_checksum;
  j["seeds"] = seeds;
  j["outputs"] = outputs;
  if (selected_k >= 0) j["selected_k"] = selected_k;
  return j.dump(2);
}

RunManifest RunManifest::from_json_string(const std::string& text) {
  const json j = json::parse(text);
  RunManifest m;
  m.tool = j.at("tool").get<std::string>();
  m.command = j.at("command").get<std::string>();
  m.config_json = j.at("config").dump();
  m.corpus_path = j.at("corpus_path").get<std::string>();
  m.corpus_checksum = j.at("corpus_checksum").get<std::string>();
  m.seeds = j.at("seeds").get<std::vector<uint64_t>>();
  m.outputs = j.at("outputs").get<std::vector<std::string>>();
  m.selected_k = j.value("selected_k", -1);
  return m;
}

void RunManifest::save(const std::string& path) const {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write manifest: " + path);
  os << to_json_string() << '\n';
}

RunManifest RunManifest::load(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open manifest: " + path);
  std::ostringstream buf;
  buf << is.rdbuf();
  return from_json_string(buf.str());
}

std::string file_checksum(const std::string& path) {
  return "fnv1a64:" + hex64(fnv1a64_file(path));
}

}  // namespace sectrc
