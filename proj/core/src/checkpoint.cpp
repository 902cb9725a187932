#include "sectrc/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace sectrc {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little,
              "checkpoint container assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'S', 'E', 'C', 'T', 'R', 'C', 'K', '1'};
constexpr uint64_t kMaxName = 1 << 20;
constexpr uint64_t kMaxRank = 8;
constexpr uint64_t kMaxElements = 1ULL << 30;

void write_u64(std::ostream& os, uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b, 8);
}

uint64_t read_u64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  if (!is) throw std::runtime_error("checkpoint: truncated file");
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
  return v;
}

json label_set_json(const LabelSet& labels) {
  return {{"name", labels.name}, {"labels", labels.labels}, {"inverse", labels.inverse_map}};
}

LabelSet label_set_from_json(const json& j) {
  LabelSet ls;
  ls.name = j.at("name").get<std::string>();
  ls.labels = j.at("labels").get<std::vector<std::string>>();
  for (const auto& [k, v] : j.at("inverse").items()) ls.inverse_map[k] = v.get<std::string>();
  ls.validate();
  return ls;
}

const ToyEncoder& lookup_encoder(const SentenceEncoder& encoder) {
  const auto* toy = dynamic_cast<const ToyEncoder*>(&encoder);
  if (toy == nullptr)
    throw std::runtime_error("checkpoint: only lookup-table encoders round-trip");
  return *toy;
}

std::vector<NamedTensor> tensors_from_params(const std::vector<ParamRef>& params,
                                             const std::string& prefix) {
  std::vector<NamedTensor> out;
  out.reserve(params.size());
  for (const ParamRef& p : params) out.push_back({prefix + p.name, p.shape, *p.value});
  return out;
}

void restore_into(const std::vector<ParamRef>& params, const std::vector<NamedTensor>& tensors,
                  const std::string& prefix, size_t& consumed) {
  std::map<std::string, const NamedTensor*> by_name;
  for (const NamedTensor& t : tensors)
    if (t.name.rfind(prefix, 0) == 0) by_name[t.name.substr(prefix.size())] = &t;
  for (const ParamRef& p : params) {
    const auto it = by_name.find(p.name);
    if (it == by_name.end())
      throw std::runtime_error("checkpoint: missing tensor " + prefix + p.name);
    if (it->second->values.size() != p.value->size())
      throw std::runtime_error("checkpoint: size mismatch for tensor " + prefix + p.name);
    *p.value = it->second->values;
    ++consumed;
  }
}

json base_manifest(const std::string& kind, int dim, const LabelSet& labels,
                   const std::vector<LinkCategory>& categories, const TrainConfig& cfg,
                   uint64_t seed) {
  json m;
  m["kind"] = kind;
  m["dim"] = dim;
  m["label_set"] = label_set_json(labels);
  json cats = json::array();
  for (LinkCategory c : categories) cats.push_back(to_string(c));
  m["categories"] = cats;
  m["config"] = json::parse(cfg.to_json_string());
  m["seed"] = seed;
  return m;
}

std::vector<LinkCategory> categories_from_json(const json& j) {
  std::vector<LinkCategory> out;
  for (const json& c : j) out.push_back(category_from_string(c.get<std::string>()));
  return out;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("checkpoint: cannot open " + path + " for writing");
  os.write(kMagic, sizeof kMagic);
  write_u64(os, ckpt.manifest_json.size());
  os.write(ckpt.manifest_json.data(), static_cast<std::streamsize>(ckpt.manifest_json.size()));
  write_u64(os, ckpt.tensors.size());
  for (const NamedTensor& t : ckpt.tensors) {
    write_u64(os, t.name.size());
    os.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    write_u64(os, t.shape.size());
    uint64_t numel = 1;
    for (int d : t.shape) {
      write_u64(os, static_cast<uint64_t>(d));
      numel *= static_cast<uint64_t>(d);
    }
    if (numel != t.values.size())
      throw std::runtime_error("checkpoint: shape/value mismatch for tensor " + t.name);
    os.write(reinterpret_cast<const char*>(t.values.data()),
             static_cast<std::streamsize>(t.values.size() * sizeof(double)));
  }
  if (!os) throw std::runtime_error("checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("checkpoint: cannot open " + path);
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kMagic, 8) != 0)
    throw std::runtime_error("checkpoint: bad magic in " + path);

  Checkpoint ckpt;
  const uint64_t manifest_len = read_u64(is);
  if (manifest_len > kMaxElements) throw std::runtime_error("checkpoint: absurd manifest size");
  ckpt.manifest_json.resize(manifest_len);
  is.read(ckpt.manifest_json.data(), static_cast<std::streamsize>(manifest_len));
  if (!is) throw std::runtime_error("checkpoint: truncated manifest");

  const uint64_t count = read_u64(is);
  for (uint64_t i = 0; i < count; ++i) {
    NamedTensor t;
    const uint64_t name_len = read_u64(is);
    if (name_len > kMaxName) throw std::runtime_error("checkpoint: absurd tensor name");
    t.name.resize(name_len);
    is.read(t.name.data(), static_cast<std::streamsize>(name_len));
    const uint64_t rank = read_u64(is);
    if (rank > kMaxRank) throw std::runtime_error("checkpoint: absurd tensor rank");
    uint64_t numel = 1;
    for (uint64_t r = 0; r < rank; ++r) {
      const uint64_t dim = read_u64(is);
      if (dim == 0 || dim > kMaxElements) throw std::runtime_error("checkpoint: bad dimension");
      t.shape.push_back(static_cast<int>(dim));
      numel *= dim;
      if (numel > kMaxElements) throw std::runtime_error("checkpoint: tensor too large");
    }
    t.values.resize(numel);
    is.read(reinterpret_cast<char*>(t.values.data()),
            static_cast<std::streamsize>(numel * sizeof(double)));
    if (!is) throw std::runtime_error("checkpoint: truncated tensor data");
    ckpt.tensors.push_back(std::move(t));
  }
  return ckpt;
}

void save_sec_checkpoint(const SecModel& model, const TrainConfig& cfg, uint64_t seed,
                         const std::string& path) {
  json manifest = base_manifest("sec", model.config().dim, model.label_set(),
                                model.config().categories, cfg, seed);
  manifest["vocab"] = lookup_encoder(model.encoder()).vocab_tokens();
  Checkpoint ckpt;
  ckpt.manifest_json = manifest.dump();
  ckpt.tensors = tensors_from_params(const_cast<SecModel&>(model).parameters(), "");
  save_checkpoint(ckpt, path);
}

void save_multi_checkpoint(const PairModel& model, const TrainConfig& cfg, uint64_t seed,
                           const std::string& path) {
  json manifest = base_manifest("multi", model.config().dim, model.label_set(),
                                model.config().categories, cfg, seed);
  manifest["vocab"] = lookup_encoder(model.encoder()).vocab_tokens();
  Checkpoint ckpt;
  ckpt.manifest_json = manifest.dump();
  ckpt.tensors = tensors_from_params(const_cast<PairModel&>(model).parameters(), "");
  save_checkpoint(ckpt, path);
}

void save_local_checkpoint(const std::map<LinkCategory, PairModel>& models,
                           const TrainConfig& cfg, uint64_t seed, const std::string& path) {
  if (models.empty()) throw std::invalid_argument("no models to save");
  const PairModel& first = models.begin()->second;
  std::vector<LinkCategory> categories;
  for (const auto& [category, model] : models) categories.push_back(category);
  json manifest =
      base_manifest("local", first.config().dim, first.label_set(), categories, cfg, seed);
  json vocabs = json::object();
  Checkpoint ckpt;
  for (const auto& [category, model] : models) {
    vocabs[to_string(category)] = lookup_encoder(model.encoder()).vocab_tokens();
    for (NamedTensor& t : tensors_from_params(const_cast<PairModel&>(model).parameters(),
                                              to_string(category) + "/"))
      ckpt.tensors.push_back(std::move(t));
  }
  manifest["vocabs"] = vocabs;
  ckpt.manifest_json = manifest.dump();
  save_checkpoint(ckpt, path);
}

LoadedModel load_model(const std::string& path) {
  const Checkpoint ckpt = load_checkpoint(path);
  json manifest;
  try {
    manifest = json::parse(ckpt.manifest_json);
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("checkpoint: bad manifest: ") + e.what());
  }

  LoadedModel out;
  out.kind = model_kind_from_string(manifest.at("kind").get<std::string>());
  out.labels = label_set_from_json(manifest.at("label_set"));
  out.config = TrainConfig::from_json_string(manifest.at("config").dump());
  out.seed = manifest.at("seed").get<uint64_t>();
  const int dim = manifest.at("dim").get<int>();
  out.config.dim = dim;
  const auto categories = categories_from_json(manifest.at("categories"));

  size_t consumed = 0;
  switch (out.kind) {
    case ModelKind::Sec: {
      auto encoder = std::make_shared<ToyEncoder>(
          dim, manifest.at("vocab").get<std::vector<std::string>>(), mix64(out.seed, 0xE1ULL));
      out.sec = std::make_unique<SecModel>(encoder, out.labels,
                                           out.config.model_config(categories),
                                           mix64(out.seed, 0x31ULL));
      restore_into(out.sec->parameters(), ckpt.tensors, "", consumed);
      break;
    }
    case ModelKind::Multi: {
      auto encoder = std::make_shared<ToyEncoder>(
          dim, manifest.at("vocab").get<std::vector<std::string>>(), mix64(out.seed, 0xE2ULL));
      out.multi = std::make_unique<PairModel>(encoder, out.labels,
                                              out.config.model_config(categories),
                                              mix64(out.seed, 0x32ULL));
      restore_into(out.multi->parameters(), ckpt.tensors, "", consumed);
      break;
    }
    case ModelKind::Local: {
      const json& vocabs = manifest.at("vocabs");
      for (LinkCategory category : categories) {
        auto encoder = std::make_shared<ToyEncoder>(
            dim, vocabs.at(to_string(category)).get<std::vector<std::string>>(),
            mix64(out.seed, 0xE300ULL + static_cast<uint64_t>(category) + 1));
        auto [it, inserted] = out.local.emplace(
            category, PairModel(encoder, out.labels, out.config.model_config({category}),
                                mix64(out.seed, 0x3300ULL + static_cast<uint64_t>(category) + 1)));
        restore_into(it->second.parameters(), ckpt.tensors, to_string(category) + "/", consumed);
      }
      break;
    }
  }
  if (consumed != ckpt.tensors.size())
    throw std::runtime_error("checkpoint: container holds unexpected extra tensors");
  return out;
}

}  // namespace sectrc
