#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "sectrc/corpus.hpp"
#include "sectrc/evaluation.hpp"
#include "sectrc/model.hpp"
#include "sectrc/rng.hpp"

namespace sectrc {

enum class ModelKind { Sec, Local, Multi };
enum class FreezeStrategy { NoFreeze, Freeze, FreezeAfterK };

const std::string& to_string(ModelKind k);
const std::string& to_string(FreezeStrategy s);
ModelKind model_kind_from_string(const std::string& s);
FreezeStrategy strategy_from_string(const std::string& s);

struct TrainConfig {
  ModelKind model_kind = ModelKind::Sec;
  FreezeStrategy strategy = FreezeStrategy::NoFreeze;
  int k = 3;          // freeze boundary for FreezeAfterK
  bool k_auto = false;  // pick k from {3,4,5} by dev score
  int epochs = 20;           // chain model schedule
  int fine_tune_epochs = 5;  // pair baseline schedule
  int chains_per_batch = 4;
  int pairs_per_batch = 16;
  double lr = 5e-5;
  double weight_decay = 0.01;
  double dropout = 0.1;
  int dim = 64;
  std::vector<uint64_t> seeds = {1, 2, 3, 4, 5};
  bool invert_links = false;
  bool include_derived = false;
  bool mean_pool = false;
  bool layer2_zeros = false;
  bool per_category_mean = false;
  double grad_clip = 0.0;  // global-norm clip; 0 disables

  void validate() const;
  int effective_epochs() const;  // schedule for this model kind
  ModelConfig model_config(std::vector<LinkCategory> categories) const;

  // JSON mirrors the field names; missing fields keep their defaults, which
  // is what gives config files override-only semantics.
  std::string to_json_string() const;
  static TrainConfig from_json_string(const std::string& text);
  static TrainConfig from_json_file(const std::string& path);
};

struct TrainRecord {
  int epoch = 0;  // 1-based
  std::string strategy;
  double dev_micro_f1_overall = 0.0;
  std::map<LinkCategory, double> dev_micro_f1;
  bool encoder_frozen = false;
};

std::string records_to_json(const std::vector<TrainRecord>& records);
std::vector<TrainRecord> records_from_json_string(const std::string& text);

// One row per record:
// strategy,epoch,dev_micro_f1_overall,dev_micro_f1_E2D,dev_micro_f1_E2T,
// dev_micro_f1_E2E[,dev_micro_f1_MAT],encoder_frozen
// The MAT column appears only when some record carries a MAT score.
std::string curves_csv(const std::vector<TrainRecord>& records);

// Adam with decoupled weight decay. Frozen parameters are skipped entirely:
// no moment update and no decay.
class AdamW {
 public:
  AdamW(double lr, double weight_decay);
  void step(const std::vector<ParamRef>& params);

 private:
  double lr_, weight_decay_;
  double beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
  long t_ = 0;
  std::map<std::string, std::pair<Vec, Vec>> moments_;  // name -> (m, v)
};

// Scales all gradients so their global L2 norm is at most max_norm; returns
// the pre-clip norm. No-op when max_norm <= 0.
double clip_gradients(const std::vector<ParamRef>& params, double max_norm);

// Order-sensitive digest over parameter names and raw values.
uint64_t parameters_hash(std::vector<ParamRef> params);

std::map<std::string, Vec> snapshot_parameters(const std::vector<ParamRef>& params);
void restore_parameters(const std::vector<ParamRef>& params,
                        const std::map<std::string, Vec>& snapshot);

struct TrainResult {
  std::vector<TrainRecord> records;
  int best_epoch = 0;
  double best_dev = 0.0;
  EvalReport best_dev_report;  // dev evaluation at the retained epoch
};

// Category-pure batches: pairs shuffled within each category, then the batch
// order shuffled across categories; every pair appears exactly once.
std::vector<PairBatch> multi_category_batches(const PairBatch& pairs, int batch_size, Rng& rng);

// Highest dev score wins; ties go to the smaller k. All of {3,4,5} required.
int select_k(const std::map<int, double>& best_dev_by_k);

// Epoch loops. Each shuffles its instances, steps the optimizer per batch,
// evaluates dev and keeps the best-scoring parameters (earliest epoch on
// ties), restoring them before returning. Empty train split and non-finite
// losses raise.
TrainResult train_sec(SecModel& model, const Split& split, const TrainConfig& cfg,
                      uint64_t seed);
TrainResult train_multi(PairModel& model, const Split& split, const TrainConfig& cfg,
                        uint64_t seed);
TrainResult train_local(std::map<LinkCategory, PairModel>& models, const Split& split,
                        const TrainConfig& cfg, uint64_t seed);

std::shared_ptr<ToyEncoder> make_encoder(const std::vector<Document>& train_docs, int dim,
                                         uint64_t seed);
// Categories with at least one link, in fixed enum order.
std::vector<LinkCategory> categories_present(const std::vector<Document>& docs);

SecModel make_sec_model(const std::vector<Document>& train_docs, const LabelSet& labels,
                        const TrainConfig& cfg, uint64_t seed);
PairModel make_multi_model(const std::vector<Document>& train_docs, const LabelSet& labels,
                           const TrainConfig& cfg, uint64_t seed);
std::map<LinkCategory, PairModel> make_local_models(const std::vector<Document>& train_docs,
                                                    const LabelSet& labels,
                                                    const TrainConfig& cfg, uint64_t seed);

// Everything one seed produces: the trained model (restored to its best
// epoch), the per-epoch records and the dev/test reports.
struct SingleRun {
  uint64_t seed = 0;
  TrainResult result;
  EvalReport dev_report;
  EvalReport test_report;  // total_support == 0 when the split has no test set
  std::unique_ptr<SecModel> sec;
  std::unique_ptr<PairModel> multi;
  std::map<LinkCategory, PairModel> local;
};

SingleRun run_training(const Split& split, const LabelSet& labels, const TrainConfig& cfg,
                       uint64_t seed);

}  // namespace sectrc
