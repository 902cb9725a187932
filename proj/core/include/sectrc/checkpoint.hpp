#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "sectrc/model.hpp"
#include "sectrc/training.hpp"

namespace sectrc {

// Single-file container: magic, a JSON manifest (model kind, dimension,
// label set, categories, training config, seed, vocabulary) and named
// double-precision tensors, stored raw in host byte order.
struct NamedTensor {
  std::string name;
  std::vector<int> shape;
  Vec values;
};

struct Checkpoint {
  std::string manifest_json;
  std::vector<NamedTensor> tensors;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

void save_sec_checkpoint(const SecModel& model, const TrainConfig& cfg, uint64_t seed,
                         const std::string& path);
void save_multi_checkpoint(const PairModel& model, const TrainConfig& cfg, uint64_t seed,
                           const std::string& path);
void save_local_checkpoint(const std::map<LinkCategory, PairModel>& models,
                           const TrainConfig& cfg, uint64_t seed, const std::string& path);

// A model rebuilt from a container; exactly one of the three slots is
// populated, matching `kind`. Only lookup-table encoders round-trip.
struct LoadedModel {
  ModelKind kind = ModelKind::Sec;
  LabelSet labels;
  TrainConfig config;
  uint64_t seed = 0;
  std::unique_ptr<SecModel> sec;
  std::unique_ptr<PairModel> multi;
  std::map<LinkCategory, PairModel> local;
};

LoadedModel load_model(const std::string& path);

}  // namespace sectrc
