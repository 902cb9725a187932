#include "sectrc/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "sectrc/chains.hpp"

namespace sectrc {

using nlohmann::json;

double micro_f1(const std::vector<std::string>& predictions,
                const std::vector<std::string>& golds) {
  if (predictions.size() != golds.size())
    throw std::invalid_argument("prediction/gold length mismatch");
  if (predictions.empty()) throw std::invalid_argument("empty prediction list");
  long correct = 0;
  for (size_t i = 0; i < predictions.size(); ++i)
    if (predictions[i] == golds[i]) ++correct;
  return static_cast<double>(correct) / static_cast<double>(predictions.size());
}

double micro_f1_excluding(const std::vector<std::string>& predictions,
                          const std::vector<std::string>& golds,
                          const std::set<std::string>& excluded_gold_labels) {
  if (predictions.size() != golds.size())
    throw std::invalid_argument("prediction/gold length mismatch");
  std::vector<std::string> p, g;
  for (size_t i = 0; i < golds.size(); ++i) {
    if (excluded_gold_labels.count(golds[i])) continue;
    p.push_back(predictions[i]);
    g.push_back(golds[i]);
  }
  return micro_f1(p, g);
}

EvalReport report_from_predictions(const std::vector<LinkPrediction>& predictions,
                                   std::string model_kind, std::vector<uint64_t> seeds) {
  EvalReport report;
  report.model_kind = std::move(model_kind);
  report.seeds = std::move(seeds);
  std::map<LinkCategory, long> correct;
  for (const LinkPrediction& p : predictions) {
    ++report.support[p.category];
    if (p.predicted == p.gold) ++correct[p.category];
    ++report.total_support;
  }
  long correct_total = 0;
  for (const auto& [category, support] : report.support) {
    report.per_category[category] =
        static_cast<double>(correct[category]) / static_cast<double>(support);
    correct_total += correct[category];
  }
  report.overall = report.total_support == 0
                       ? 0.0
                       : static_cast<double>(correct_total) /
                             static_cast<double>(report.total_support);
  return report;
}

EvalReport evaluate_chain_model(const SecModel& model, const std::vector<Document>& docs,
                                bool invert_links) {
  std::vector<LinkPrediction> predictions;
  for (const Document& doc : docs) {
    for (const SectChain& chain : build_sect_chains(doc, invert_links, model.label_set())) {
      for (LinkPrediction& p : model.predict_chain(doc, chain))
        if (!p.derived) predictions.push_back(std::move(p));
    }
  }
  return report_from_predictions(predictions, "sec", {});
}

EvalReport evaluate_pair_model(const PairModel& model, const std::vector<Document>& docs) {
  std::vector<LinkPrediction> predictions;
  for (const Document& doc : docs)
    for (const TLink& link : doc.tlinks) predictions.push_back(model.predict_pair(doc, link));
  return report_from_predictions(predictions, "multi", {});
}

EvalReport evaluate_local_models(const std::map<LinkCategory, PairModel>& models,
                                 const std::vector<Document>& docs) {
  std::vector<LinkPrediction> predictions;
  for (const Document& doc : docs) {
    for (const TLink& link : doc.tlinks) {
      const auto it = models.find(link.category);
      if (it == models.end())
        throw std::invalid_argument("no model for category " + to_string(link.category));
      predictions.push_back(it->second.predict_pair(doc, link));
    }
  }
  return report_from_predictions(predictions, "local", {});
}

EvalReport majority_vote(const std::vector<Document>& train_docs,
                         const std::vector<Document>& test_docs, const LabelSet& labels) {
  std::map<LinkCategory, std::map<std::string, long>> counts;
  for (const Document& doc : train_docs)
    for (const TLink& link : doc.tlinks) ++counts[link.category][link.relation];

  std::map<LinkCategory, std::string> majority;
  for (const auto& [category, by_label] : counts) {
    std::string best;
    long best_count = -1;
    int best_index = 0;
    for (const auto& [label, count] : by_label) {
      const int index = labels.index_of(label);
      if (count > best_count || (count == best_count && index < best_index)) {
        best = label;
        best_count = count;
        best_index = index;
      }
    }
    majority[category] = best;
  }

  std::vector<LinkPrediction> predictions;
  for (const Document& doc : test_docs) {
    for (const TLink& link : doc.tlinks) {
      const auto it = majority.find(link.category);
      if (it == majority.end())
        throw std::invalid_argument("category " + to_string(link.category) +
                                    " absent from training data");
      LinkPrediction p;
      p.category = link.category;
      p.gold = link.relation;
      p.predicted = it->second;
      predictions.push_back(std::move(p));
    }
  }
  return report_from_predictions(predictions, "majority", {});
}

EvalReport run_average(const std::vector<EvalReport>& reports) {
  if (reports.empty()) throw std::invalid_argument("no reports to average");
  const auto categories_of = [](const EvalReport& r) {
    std::set<LinkCategory> cs;
    for (const auto& [category, value] : r.per_category) cs.insert(category);
    return cs;
  };
  const std::set<LinkCategory> categories = categories_of(reports.front());
  for (const EvalReport& r : reports)
    if (categories_of(r) != categories)
      throw std::invalid_argument("reports disagree on category sets");

  EvalReport out;
  out.model_kind = reports.front().model_kind;
  out.support = reports.front().support;
  out.total_support = reports.front().total_support;
  for (const EvalReport& r : reports)
    out.seeds.insert(out.seeds.end(), r.seeds.begin(), r.seeds.end());

  const double n = static_cast<double>(reports.size());
  for (LinkCategory c : categories) {
    double mean = 0.0;
    for (const EvalReport& r : reports) mean += r.per_category.at(c);
    mean /= n;
    double var = 0.0;
    for (const EvalReport& r : reports) {
      const double d = r.per_category.at(c) - mean;
      var += d * d;
    }
    out.per_category[c] = mean;
    out.per_category_stddev[c] = std::sqrt(var / n);
  }
  double mean = 0.0;
  for (const EvalReport& r : reports) mean += r.overall;
  mean /= n;
  double var = 0.0;
  for (const EvalReport& r : reports) {
    const double d = r.overall - mean;
    var += d * d;
  }
  out.overall = mean;
  out.overall_stddev = std::sqrt(var / n);
  out.per_seed = reports;
  return out;
}

namespace {

json report_to_json_value(const EvalReport& r, bool with_per_seed) {
  json j;
  j["model_kind"] = r.model_kind;
  j["seeds"] = r.seeds;
  json per_category = json::object();
  json support = json::object();
  for (const auto& [category, value] : r.per_category) per_category[to_string(category)] = value;
  for (const auto& [category, value] : r.support) support[to_string(category)] = value;
  j["per_category"] = per_category;
  j["support"] = support;
  j["overall"] = r.overall;
  j["total_support"] = r.total_support;
  if (!r.per_category_stddev.empty()) {
    json sd = json::object();
    for (const auto& [category, value] : r.per_category_stddev) sd[to_string(category)] = value;
    j["per_category_stddev"] = sd;
    j["overall_stddev"] = r.overall_stddev;
  }
  if (with_per_seed && !r.per_seed.empty()) {
    json per_seed = json::array();
    for (const EvalReport& s : r.per_seed) per_seed.push_back(report_to_json_value(s, false));
    j["per_seed"] = per_seed;
  }
  return j;
}

std::vector<LinkCategory> category_columns(const EvalReport& r) {
  std::vector<LinkCategory> out;
  for (const auto& [category, value] : r.per_category) out.push_back(category);
  return out;
}

void append_row(std::ostringstream& os, const std::string& name,
                const std::vector<LinkCategory>& columns,
                const std::map<LinkCategory, double>& values, double overall, bool delta) {
  os << name;
  for (size_t pad = name.size(); pad < 22; ++pad) os << ' ';
  char buf[32];
  for (LinkCategory c : columns) {
    const auto it = values.find(c);
    if (it == values.end()) {
      os << "        -";
      continue;
    }
    std::snprintf(buf, sizeof buf, delta ? "%+9.4f" : "%9.4f", it->second);
    os << buf;
  }
  std::snprintf(buf, sizeof buf, delta ? "%+9.4f" : "%9.4f", overall);
  os << buf << '\n';
}

}  // namespace

std::string eval_report_to_json(const EvalReport& report) {
  return report_to_json_value(report, true).dump(2);
}

std::string eval_report_to_text(const EvalReport& report) {
  std::ostringstream os;
  os << "model: " << report.model_kind << '\n';
  const auto columns = category_columns(report);
  os << "                      ";
  for (LinkCategory c : columns) {
    const std::string& name = to_string(c);
    for (size_t pad = name.size(); pad < 9; ++pad) os << ' ';
    os << name;
  }
  os << "  overall\n";
  append_row(os, "micro-F1", columns, report.per_category, report.overall, false);
  if (!report.per_category_stddev.empty())
    append_row(os, "stddev", columns, report.per_category_stddev, report.overall_stddev, false);
  os << "support               ";
  char buf[32];
  for (LinkCategory c : columns) {
    std::snprintf(buf, sizeof buf, "%9ld", report.support.at(c));
    os << buf;
  }
  std::snprintf(buf, sizeof buf, "%9ld", report.total_support);
  os << buf << '\n';
  return os.str();
}

AblationReport ablation_report(const EvalReport& local, const EvalReport& multi,
                               const EvalReport& sec) {
  if (local.support != multi.support || local.support != sec.support)
    throw std::invalid_argument("reports cover different splits");
  AblationReport out;
  out.local = local;
  out.multi = multi;
  out.sec = sec;
  for (const auto& [category, value] : local.per_category) {
    out.delta_multi[category] = multi.per_category.at(category) - value;
    out.delta_sec[category] = sec.per_category.at(category) - value;
  }
  out.delta_multi_overall = multi.overall - local.overall;
  out.delta_sec_overall = sec.overall - local.overall;
  return out;
}

std::string AblationReport::to_text() const {
  std::ostringstream os;
  const auto columns = category_columns(local);
  os << "                      ";
  for (LinkCategory c : columns) {
    const std::string& name = to_string(c);
    for (size_t pad = name.size(); pad < 9; ++pad) os << ' ';
    os << name;
  }
  os << "  overall\n";
  append_row(os, "local", columns, local.per_category, local.overall, false);
  append_row(os, "local+multi-category", columns, multi.per_category, multi.overall, false);
  append_row(os, "  delta vs local", columns, delta_multi, delta_multi_overall, true);
  append_row(os, "global+multi-category", columns, sec.per_category, sec.overall, false);
  append_row(os, "  delta vs local", columns, delta_sec, delta_sec_overall, true);
  return os.str();
}

std::string AblationReport::to_json() const {
  json j;
  j["local"] = json::parse(eval_report_to_json(local));
  j["multi"] = json::parse(eval_report_to_json(multi));
  j["sec"] = json::parse(eval_report_to_json(sec));
  json dm = json::object(), ds = json::object();
  for (const auto& [category, value] : delta_multi) dm[to_string(category)] = value;
  for (const auto& [category, value] : delta_sec) ds[to_string(category)] = value;
  j["delta_multi"] = dm;
  j["delta_sec"] = ds;
  j["delta_multi_overall"] = delta_multi_overall;
  j["delta_sec_overall"] = delta_sec_overall;
  return j.dump(2);
}

}  // namespace sectrc
