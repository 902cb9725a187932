#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "sectrc/corpus.hpp"
#include "sectrc/model.hpp"

namespace sectrc {

// Micro-averaged F1 under the single-label-per-instance regime used
// throughout: every instance receives exactly one predicted label drawn from
// the full label set, so micro precision = micro recall = accuracy, and this
// function computes correct/total and documents itself as such.
double micro_f1(const std::vector<std::string>& predictions,
                const std::vector<std::string>& golds);

// Convention variant: instances whose gold label is excluded are dropped;
// the rest are scored as above (predicting an excluded label is just wrong).
double micro_f1_excluding(const std::vector<std::string>& predictions,
                          const std::vector<std::string>& golds,
                          const std::set<std::string>& excluded_gold_labels);

struct EvalReport {
  std::string model_kind;
  std::vector<uint64_t> seeds;
  std::map<LinkCategory, double> per_category;   // micro-F1, reported only when support > 0
  std::map<LinkCategory, long> support;
  double overall = 0.0;  // micro-F1 pooled over every scored instance
  long total_support = 0;

  // Filled by run_average.
  std::map<LinkCategory, double> per_category_stddev;
  double overall_stddev = 0.0;
  std::vector<EvalReport> per_seed;
};

EvalReport report_from_predictions(const std::vector<LinkPrediction>& predictions,
                                   std::string model_kind, std::vector<uint64_t> seeds);

// Chain-model evaluation: chains are rebuilt exactly as during training
// (same invert flag) and only non-derived steps are scored, so every stored
// link is scored once.
EvalReport evaluate_chain_model(const SecModel& model, const std::vector<Document>& docs,
                                bool invert_links);

EvalReport evaluate_pair_model(const PairModel& model, const std::vector<Document>& docs);

// One independent pair model per category, each scoring only its own links.
EvalReport evaluate_local_models(const std::map<LinkCategory, PairModel>& models,
                                 const std::vector<Document>& docs);

// Per category, predicts the most frequent training label for every test
// item (ties resolve to the earlier label in the label set).
EvalReport majority_vote(const std::vector<Document>& train_docs,
                         const std::vector<Document>& test_docs, const LabelSet& labels);

// Arithmetic mean over per-seed reports plus standard deviation; inputs must
// agree on category sets.
EvalReport run_average(const std::vector<EvalReport>& reports);

std::string eval_report_to_json(const EvalReport& report);
std::string eval_report_to_text(const EvalReport& report);

// Three-way comparison over the same split: pair-local models, the shared
// encoder with per-category heads, and the chain model, with per-category
// deltas against the first.
struct AblationReport {
  EvalReport local, multi, sec;
  std::map<LinkCategory, double> delta_multi, delta_sec;
  double delta_multi_overall = 0.0;
  double delta_sec_overall = 0.0;

  std::string to_text() const;
  std::string to_json() const;
};

AblationReport ablation_report(const EvalReport& local, const EvalReport& multi,
                               const EvalReport& sec);

}  // namespace sectrc
