#include "sectrc/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "sectrc/chains.hpp"
#include "sectrc/digest.hpp"

namespace sectrc {

using nlohmann::json;

const std::string& to_string(ModelKind k) {
  static const std::string names[] = {"sec", "local", "multi"};
  return names[static_cast<int>(k)];
}

const std::string& to_string(FreezeStrategy s) {
  static const std::string names[] = {"no-freeze", "freeze", "freeze-after-k"};
  return names[static_cast<int>(s)];
}

ModelKind model_kind_from_string(const std::string& s) {
  if (s == "sec") return ModelKind::Sec;
  if (s == "local") return ModelKind::Local;
  if (s == "multi") return ModelKind::Multi;
  throw std::invalid_argument("unknown model kind: " + s);
}

FreezeStrategy strategy_from_string(const std::string& s) {
  if (s == "no-freeze") return FreezeStrategy::NoFreeze;
  if (s == "freeze") return FreezeStrategy::Freeze;
  if (s == "freeze-after-k") return FreezeStrategy::FreezeAfterK;
  throw std::invalid_argument("unknown strategy: " + s);
}

void TrainConfig::validate() const {
  if (epochs < 1 || fine_tune_epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (chains_per_batch < 1 || pairs_per_batch < 1)
    throw std::invalid_argument("batch sizes must be >= 1");
  if (lr <= 0.0) throw std::invalid_argument("lr must be positive");
  if (weight_decay < 0.0) throw std::invalid_argument("weight_decay must be >= 0");
  if (dropout < 0.0 || dropout >= 1.0) throw std::invalid_argument("dropout must be in [0,1)");
  if (dim < 1) throw std::invalid_argument("dim must be >= 1");
  if (seeds.empty()) throw std::invalid_argument("at least one seed required");
  if (grad_clip < 0.0) throw std::invalid_argument("grad_clip must be >= 0");
  if (strategy == FreezeStrategy::FreezeAfterK) {
    if (k < 0) throw std::invalid_argument("k must be >= 0");
    if (k > effective_epochs()) throw std::invalid_argument("k must not exceed the epoch count");
  }
  if (k_auto && strategy != FreezeStrategy::FreezeAfterK)
    throw std::invalid_argument("automatic k requires the freeze-after-k strategy");
}

int TrainConfig::effective_epochs() const {
  return model_kind == ModelKind::Sec ? epochs : fine_tune_epochs;
}

ModelConfig TrainConfig::model_config(std::vector<LinkCategory> categories) const {
  ModelConfig mc;
  mc.dim = dim;
  mc.layer2_zeros = layer2_zeros;
  mc.mean_pool = mean_pool;
  mc.dropout = dropout;
  mc.per_category_mean = per_category_mean;
  mc.include_derived = include_derived;
  mc.categories = std::move(categories);
  return mc;
}

std::string TrainConfig::to_json_string() const {
  json j;
  j["model_kind"] = to_string(model_kind);
  j["strategy"] = to_string(strategy);
  j["k"] = k;
  j["k_auto"] = k_auto;
  j["epochs"] = epochs;
  j["fine_tune_epochs"] = fine_tune_epochs;
  j["chains_per_batch"] = chains_per_batch;
  j["pairs_per_batch"] = pairs_per_batch;
  j["lr"] = lr;
  j["weight_decay"] = weight_decay;
  j["dropout"] = dropout;
  j["dim"] = dim;
  j["seeds"] = seeds;
  j["invert_links"] = invert_links;
  j["include_derived"] = include_derived;
  j["mean_pool"] = mean_pool;
  j["layer2_zeros"] = layer2_zeros;
  j["per_category_mean"] = per_category_mean;
  j["grad_clip"] = grad_clip;
  return j.dump(2);
}

TrainConfig TrainConfig::from_json_string(const std::string& text) {
  const json j = json::parse(text);
  TrainConfig c;
  if (j.contains("model_kind")) c.model_kind = model_kind_from_string(j.at("model_kind"));
  if (j.contains("strategy")) c.strategy = strategy_from_string(j.at("strategy"));
  c.k = j.value("k", c.k);
  c.k_auto = j.value("k_auto", c.k_auto);
  c.epochs = j.value("epochs", c.epochs);
  c.fine_tune_epochs = j.value("fine_tune_epochs", c.fine_tune_epochs);
  c.chains_per_batch = j.value("chains_per_batch", c.chains_per_batch);
  c.pairs_per_batch = j.value("pairs_per_batch", c.pairs_per_batch);
  c.lr = j.value("lr", c.lr);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.dropout = j.value("dropout", c.dropout);
  c.dim = j.value("dim", c.dim);
  if (j.contains("seeds")) c.seeds = j.at("seeds").get<std::vector<uint64_t>>();
  c.invert_links = j.value("invert_links", c.invert_links);
  c.include_derived = j.value("include_derived", c.include_derived);
  c.mean_pool = j.value("mean_pool", c.mean_pool);
  c.layer2_zeros = j.value("layer2_zeros", c.layer2_zeros);
  c.per_category_mean = j.value("per_category_mean", c.per_category_mean);
  c.grad_clip = j.value("grad_clip", c.grad_clip);
  return c;
}

TrainConfig TrainConfig::from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_json_string(buf.str());
}

std::string records_to_json(const std::vector<TrainRecord>& records) {
  json arr = json::array();
  for (const TrainRecord& r : records) {
    json j;
    j["epoch"] = r.epoch;
    j["strategy"] = r.strategy;
    j["dev_micro_f1_overall"] = r.dev_micro_f1_overall;
    json per = json::object();
    for (const auto& [category, value] : r.dev_micro_f1) per[to_string(category)] = value;
    j["dev_micro_f1"] = per;
    j["encoder_frozen"] = r.encoder_frozen;
    arr.push_back(std::move(j));
  }
  return arr.dump(2);
}

std::vector<TrainRecord> records_from_json_string(const std::string& text) {
  const json arr = json::parse(text);
  std::vector<TrainRecord> out;
  for (const json& j : arr) {
    TrainRecord r;
    r.epoch = j.at("epoch").get<int>();
    r.strategy = j.at("strategy").get<std::string>();
    r.dev_micro_f1_overall = j.at("dev_micro_f1_overall").get<double>();
    for (const auto& [name, value] : j.at("dev_micro_f1").items())
      r.dev_micro_f1[category_from_string(name)] = value.get<double>();
    r.encoder_frozen = j.at("encoder_frozen").get<bool>();
    out.push_back(std::move(r));
  }
  return out;
}

std::string curves_csv(const std::vector<TrainRecord>& records) {
  bool has_mat = false;
  for (const TrainRecord& r : records)
    if (r.dev_micro_f1.count(LinkCategory::MAT)) has_mat = true;

  std::vector<LinkCategory> columns = {LinkCategory::E2D, LinkCategory::E2T, LinkCategory::E2E};
  if (has_mat) columns.push_back(LinkCategory::MAT);

  std::ostringstream os;
  os << "strategy,epoch,dev_micro_f1_overall";
  for (LinkCategory c : columns) os << ",dev_micro_f1_" << to_string(c);
  os << ",encoder_frozen\n";

  char buf[32];
  for (const TrainRecord& r : records) {
    std::snprintf(buf, sizeof buf, "%.6f", r.dev_micro_f1_overall);
    os << r.strategy << ',' << r.epoch << ',' << buf;
    for (LinkCategory c : columns) {
      os << ',';
      const auto it = r.dev_micro_f1.find(c);
      if (it != r.dev_micro_f1.end()) {
        std::snprintf(buf, sizeof buf, "%.6f", it->second);
        os << buf;
      }
    }
    os << ',' << (r.encoder_frozen ? "true" : "false") << '\n';
  }
  return os.str();
}

AdamW::AdamW(double lr, double weight_decay) : lr_(lr), weight_decay_(weight_decay) {}

void AdamW::step(const std::vector<ParamRef>& params) {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (const ParamRef& p : params) {
    if (p.is_frozen()) continue;
    auto& [m, v] = moments_[p.name];
    if (m.empty()) {
      m.assign(p.value->size(), 0.0);
      v.assign(p.value->size(), 0.0);
    }
    for (size_t i = 0; i < p.value->size(); ++i) {
      const double g = (*p.grad)[i];
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g;
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g * g;
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      (*p.value)[i] -=
          lr_ * (m_hat / (std::sqrt(v_hat) + eps_) + weight_decay_ * (*p.value)[i]);
    }
  }
}

double clip_gradients(const std::vector<ParamRef>& params, double max_norm) {
  double sq = 0.0;
  for (const ParamRef& p : params)
    for (double g : *p.grad) sq += g * g;
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double scale = max_norm / norm;
    for (const ParamRef& p : params)
      for (double& g : *p.grad) g *= scale;
  }
  return norm;
}

uint64_t parameters_hash(std::vector<ParamRef> params) {
  uint64_t h = kFnvOffset;
  for (const ParamRef& p : params) {
    h = fnv1a64(p.name.data(), p.name.size(), h);
    h = fnv1a64(p.value->data(), p.value->size() * sizeof(double), h);
  }
  return h;
}

std::map<std::string, Vec> snapshot_parameters(const std::vector<ParamRef>& params) {
  std::map<std::string, Vec> out;
  for (const ParamRef& p : params) out[p.name] = *p.value;
  return out;
}

void restore_parameters(const std::vector<ParamRef>& params,
                        const std::map<std::string, Vec>& snapshot) {
  for (const ParamRef& p : params) {
    const auto it = snapshot.find(p.name);
    if (it == snapshot.end())
      throw std::invalid_argument("snapshot is missing parameter " + p.name);
    if (it->second.size() != p.value->size())
      throw std::invalid_argument("snapshot shape mismatch for " + p.name);
    *p.value = it->second;
  }
}

std::vector<PairBatch> multi_category_batches(const PairBatch& pairs, int batch_size, Rng& rng) {
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  std::map<LinkCategory, PairBatch> buckets;
  for (const auto& pr : pairs) buckets[pr.second->category].push_back(pr);

  std::vector<PairBatch> batches;
  for (auto& [category, bucket] : buckets) {
    Rng bucket_rng = rng.fork(static_cast<uint64_t>(category) + 1);
    bucket_rng.shuffle(bucket);
    for (size_t i = 0; i < bucket.size(); i += batch_size) {
      const size_t end = std::min(i + static_cast<size_t>(batch_size), bucket.size());
      batches.emplace_back(bucket.begin() + i, bucket.begin() + end);
    }
  }
  Rng order_rng = rng.fork(0xBA7C4ULL);
  order_rng.shuffle(batches);
  return batches;
}

int select_k(const std::map<int, double>& best_dev_by_k) {
  for (int k : {3, 4, 5})
    if (!best_dev_by_k.count(k))
      throw std::invalid_argument("missing dev curve for k=" + std::to_string(k));
  int best_k = -1;
  double best = -1.0;
  for (const auto& [k, score] : best_dev_by_k) {
    if (score > best) {
      best = score;
      best_k = k;
    }
  }
  return best_k;
}

namespace {

void apply_freeze(SentenceEncoder& encoder, const TrainConfig& cfg, int epoch) {
  if (cfg.strategy == FreezeStrategy::Freeze && epoch == 1) encoder.set_frozen(true);
  if (cfg.strategy == FreezeStrategy::FreezeAfterK && epoch == cfg.k + 1)
    encoder.set_frozen(true);
}

void check_finite(const LossBreakdown& loss, int epoch, size_t batch_start) {
  if (!std::isfinite(loss.total))
    throw std::runtime_error("non-finite loss (" + std::to_string(loss.total) + ") at epoch " +
                             std::to_string(epoch) + ", batch offset " +
                             std::to_string(batch_start));
}

}  // namespace

TrainResult train_sec(SecModel& model, const Split& split, const TrainConfig& cfg,
                      uint64_t seed) {
  cfg.validate();
  if (split.train.empty()) throw std::invalid_argument("empty train split");
  std::vector<std::pair<const Document*, SectChain>> chains;
  for (const Document& doc : split.train)
    for (SectChain& chain : build_sect_chains(doc, cfg.invert_links, model.label_set()))
      chains.emplace_back(&doc, std::move(chain));
  if (chains.empty()) throw std::invalid_argument("train split has no links");

  const auto params = model.parameters();
  AdamW opt(cfg.lr, cfg.weight_decay);
  model.encoder().set_frozen(false);

  TrainResult result;
  double best = -1.0;
  std::map<std::string, Vec> best_snapshot;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    apply_freeze(model.encoder(), cfg, epoch);
    std::vector<size_t> order(chains.size());
    std::iota(order.begin(), order.end(), size_t{0});
    Rng shuffle_rng(mix64(seed, 0xE70000ULL + static_cast<uint64_t>(epoch)));
    shuffle_rng.shuffle(order);
    Rng dropout_rng(mix64(seed, 0xD40000ULL + static_cast<uint64_t>(epoch)));

    for (size_t start = 0; start < order.size();
         start += static_cast<size_t>(cfg.chains_per_batch)) {
      const size_t end =
          std::min(start + static_cast<size_t>(cfg.chains_per_batch), order.size());
      ChainBatch batch;
      for (size_t i = start; i < end; ++i)
        batch.emplace_back(chains[order[i]].first, &chains[order[i]].second);
      zero_grads(params);
      const LossBreakdown loss = model.train_batch(batch, &dropout_rng);
      check_finite(loss, epoch, start);
      clip_gradients(params, cfg.grad_clip);
      opt.step(params);
    }

    EvalReport dev;
    if (!split.dev.empty()) dev = evaluate_chain_model(model, split.dev, cfg.invert_links);
    result.records.push_back({epoch, to_string(cfg.strategy), dev.overall, dev.per_category,
                              model.encoder().frozen()});
    if (dev.overall > best) {
      best = dev.overall;
      result.best_epoch = epoch;
      result.best_dev_report = dev;
      best_snapshot = snapshot_parameters(params);
    }
  }
  restore_parameters(params, best_snapshot);
  result.best_dev = best;
  return result;
}

TrainResult train_multi(PairModel& model, const Split& split, const TrainConfig& cfg,
                        uint64_t seed) {
  cfg.validate();
  if (split.train.empty()) throw std::invalid_argument("empty train split");
  PairBatch pairs;
  for (const Document& doc : split.train)
    for (const TLink& link : doc.tlinks) pairs.emplace_back(&doc, &link);
  if (pairs.empty()) throw std::invalid_argument("train split has no links");

  const auto params = model.parameters();
  AdamW opt(cfg.lr, cfg.weight_decay);
  model.encoder().set_frozen(false);

  TrainResult result;
  double best = -1.0;
  std::map<std::string, Vec> best_snapshot;
  for (int epoch = 1; epoch <= cfg.fine_tune_epochs; ++epoch) {
    apply_freeze(model.encoder(), cfg, epoch);
    Rng batch_rng(mix64(seed, 0xB00000ULL + static_cast<uint64_t>(epoch)));
    Rng dropout_rng(mix64(seed, 0xD40000ULL + static_cast<uint64_t>(epoch)));
    size_t offset = 0;
    for (const PairBatch& batch : multi_category_batches(pairs, cfg.pairs_per_batch, batch_rng)) {
      zero_grads(params);
      const LossBreakdown loss = model.train_batch(batch, &dropout_rng);
      check_finite(loss, epoch, offset++);
      clip_gradients(params, cfg.grad_clip);
      opt.step(params);
    }

    EvalReport dev;
    if (!split.dev.empty()) dev = evaluate_pair_model(model, split.dev);
    result.records.push_back({epoch, to_string(cfg.strategy), dev.overall, dev.per_category,
                              model.encoder().frozen()});
    if (dev.overall > best) {
      best = dev.overall;
      result.best_epoch = epoch;
      result.best_dev_report = dev;
      best_snapshot = snapshot_parameters(params);
    }
  }
  restore_parameters(params, best_snapshot);
  result.best_dev = best;
  return result;
}

TrainResult train_local(std::map<LinkCategory, PairModel>& models, const Split& split,
                        const TrainConfig& cfg, uint64_t seed) {
  cfg.validate();
  if (split.train.empty()) throw std::invalid_argument("empty train split");
  if (models.empty()) throw std::invalid_argument("no category models");
  std::map<LinkCategory, PairBatch> pairs;
  for (const Document& doc : split.train)
    for (const TLink& link : doc.tlinks) pairs[link.category].emplace_back(&doc, &link);
  for (const auto& [category, bucket] : pairs)
    if (!models.count(category))
      throw std::invalid_argument("no model for category " + to_string(category));

  std::map<LinkCategory, std::vector<ParamRef>> params;
  std::map<LinkCategory, AdamW> opts;
  for (auto& [category, model] : models) {
    params[category] = model.parameters();
    opts.emplace(category, AdamW(cfg.lr, cfg.weight_decay));
    model.encoder().set_frozen(false);
  }

  TrainResult result;
  double best = -1.0;
  std::map<LinkCategory, std::map<std::string, Vec>> best_snapshot;
  for (int epoch = 1; epoch <= cfg.fine_tune_epochs; ++epoch) {
    for (auto& [category, model] : models) apply_freeze(model.encoder(), cfg, epoch);

    for (auto& [category, bucket] : pairs) {
      PairModel& model = models.at(category);
      const auto& model_params = params.at(category);
      std::vector<size_t> order(bucket.size());
      std::iota(order.begin(), order.end(), size_t{0});
      const uint64_t tag =
          mix64(static_cast<uint64_t>(category) + 1, static_cast<uint64_t>(epoch));
      Rng shuffle_rng(mix64(seed, mix64(0x10CA1ULL, tag)));
      shuffle_rng.shuffle(order);
      Rng dropout_rng(mix64(seed, mix64(0xD40000ULL, tag)));

      for (size_t start = 0; start < order.size();
           start += static_cast<size_t>(cfg.pairs_per_batch)) {
        const size_t end =
            std::min(start + static_cast<size_t>(cfg.pairs_per_batch), order.size());
        PairBatch batch;
        for (size_t i = start; i < end; ++i) batch.push_back(bucket[order[i]]);
        zero_grads(model_params);
        const LossBreakdown loss = model.train_batch(batch, &dropout_rng);
        check_finite(loss, epoch, start);
        clip_gradients(model_params, cfg.grad_clip);
        opts.at(category).step(model_params);
      }
    }

    EvalReport dev;
    if (!split.dev.empty()) dev = evaluate_local_models(models, split.dev);
    result.records.push_back({epoch, to_string(cfg.strategy), dev.overall, dev.per_category,
                              models.begin()->second.encoder().frozen()});
    if (dev.overall > best) {
      best = dev.overall;
      result.best_epoch = epoch;
      result.best_dev_report = dev;
      best_snapshot.clear();
      for (const auto& [category, model_params] : params)
        best_snapshot[category] = snapshot_parameters(model_params);
    }
  }
  for (const auto& [category, model_params] : params)
    restore_parameters(model_params, best_snapshot.at(category));
  result.best_dev = best;
  return result;
}

std::shared_ptr<ToyEncoder> make_encoder(const std::vector<Document>& train_docs, int dim,
                                         uint64_t seed) {
  return std::make_shared<ToyEncoder>(dim, ToyEncoder::build_vocab(train_docs), seed);
}

std::vector<LinkCategory> categories_present(const std::vector<Document>& docs) {
  std::set<LinkCategory> seen;
  for (const Document& doc : docs)
    for (const TLink& link : doc.tlinks) seen.insert(link.category);
  return {seen.begin(), seen.end()};
}

SecModel make_sec_model(const std::vector<Document>& train_docs, const LabelSet& labels,
                        const TrainConfig& cfg, uint64_t seed) {
  return SecModel(make_encoder(train_docs, cfg.dim, mix64(seed, 0xE1ULL)), labels,
                  cfg.model_config(categories_present(train_docs)), mix64(seed, 0x31ULL));
}

PairModel make_multi_model(const std::vector<Document>& train_docs, const LabelSet& labels,
                           const TrainConfig& cfg, uint64_t seed) {
  return PairModel(make_encoder(train_docs, cfg.dim, mix64(seed, 0xE2ULL)), labels,
                   cfg.model_config(categories_present(train_docs)), mix64(seed, 0x32ULL));
}

std::map<LinkCategory, PairModel> make_local_models(const std::vector<Document>& train_docs,
                                                    const LabelSet& labels,
                                                    const TrainConfig& cfg, uint64_t seed) {
  std::map<LinkCategory, PairModel> models;
  for (LinkCategory category : categories_present(train_docs)) {
    const uint64_t tag = static_cast<uint64_t>(category) + 1;
    models.emplace(category,
                   PairModel(make_encoder(train_docs, cfg.dim, mix64(seed, 0xE300ULL + tag)),
                             labels, cfg.model_config({category}),
                             mix64(seed, 0x3300ULL + tag)));
  }
  return models;
}

SingleRun run_training(const Split& split, const LabelSet& labels, const TrainConfig& cfg,
                       uint64_t seed) {
  cfg.validate();
  if (split.train.empty()) throw std::invalid_argument("empty train split");
  SingleRun run;
  run.seed = seed;
  switch (cfg.model_kind) {
    case ModelKind::Sec:
      run.sec = std::make_unique<SecModel>(make_sec_model(split.train, labels, cfg, seed));
      run.result = train_sec(*run.sec, split, cfg, seed);
      if (!split.test.empty())
        run.test_report = evaluate_chain_model(*run.sec, split.test, cfg.invert_links);
      break;
    case ModelKind::Multi:
      run.multi = std::make_unique<PairModel>(make_multi_model(split.train, labels, cfg, seed));
      run.result = train_multi(*run.multi, split, cfg, seed);
      if (!split.test.empty()) run.test_report = evaluate_pair_model(*run.multi, split.test);
      break;
    case ModelKind::Local:
      run.local = make_local_models(split.train, labels, cfg, seed);
      run.result = train_local(run.local, split, cfg, seed);
      if (!split.test.empty()) run.test_report = evaluate_local_models(run.local, split.test);
      break;
  }
  run.dev_report = run.result.best_dev_report;
  run.dev_report.model_kind = to_string(cfg.model_kind);
  run.dev_report.seeds = {seed};
  run.test_report.model_kind = to_string(cfg.model_kind);
  run.test_report.seeds = {seed};
  return run;
}

}  // namespace sectrc
