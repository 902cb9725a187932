#include "sectrc/chains.hpp"

#include <algorithm>
#include <map>

#include "json.hpp"

namespace sectrc {

OrderKey order_key(const Mention& m) { return OrderKey{m.sent_index, m.token_start, m.id}; }

std::string invert_relation(const std::string& label, const LabelSet& labels) {
  return labels.inverse(label);
}

namespace {

struct StepSortKey {
  bool is_dct;  // DCT steps sort before everything else
  OrderKey key;

  friend bool operator<(const StepSortKey& a, const StepSortKey& b) {
    if (a.is_dct != b.is_dct) return a.is_dct;
    return a.key < b.key;
  }
};

StepSortKey step_sort_key(const Document& doc, const TLink& link) {
  if (link.target == kDctId) return {true, {}};
  const Mention* m = doc.find_mention(link.target);
  if (m == nullptr) throw std::runtime_error("unknown mention " + link.target);
  return {false, order_key(*m)};
}

}  // namespace

std::vector<SectChain> build_sect_chains(const Document& doc, bool invert_links,
                                         const LabelSet& labels) {
  std::map<std::string, std::vector<ChainStep>> grouped;
  for (const auto& link : doc.tlinks) {
    const Mention* src = doc.find_mention(link.source);
    if (src == nullptr)
      throw ValidationError(doc.doc_id, "tlinks.source", "unknown mention " + link.source);
    if (src->kind != MentionKind::Event)
      throw ValidationError(doc.doc_id, "tlinks.source",
                            "link source " + link.source + " is not an event");
    grouped[link.source].push_back(ChainStep{link, false});

    if (invert_links) {
      const Mention* tgt = doc.find_mention(link.target);
      if (tgt == nullptr)
        throw ValidationError(doc.doc_id, "tlinks.target", "unknown mention " + link.target);
      // Only event targets can head a chain of their own.
      if (tgt->kind == MentionKind::Event) {
        TLink inv;
        inv.source = link.target;
        inv.target = link.source;
        inv.category = link.category;
        inv.relation = invert_relation(link.relation, labels);
        grouped[inv.source].push_back(ChainStep{inv, true});
      }
    }
  }

  std::vector<SectChain> chains;
  for (auto& [source, steps] : grouped) {
    std::stable_sort(steps.begin(), steps.end(), [&](const ChainStep& a, const ChainStep& b) {
      return step_sort_key(doc, a.link) < step_sort_key(doc, b.link);
    });
    chains.push_back(SectChain{doc.doc_id, source, std::move(steps)});
  }

  // Order chains by the source event's position so output is stable and
  // follows the document.
  std::sort(chains.begin(), chains.end(), [&](const SectChain& a, const SectChain& b) {
    return order_key(*doc.find_mention(a.source)) < order_key(*doc.find_mention(b.source));
  });
  return chains;
}

std::string chain_to_json_line(const SectChain& chain) {
  nlohmann::json j;
  j["doc_id"] = chain.doc_id;
  j["source"] = chain.source;
  j["steps"] = nlohmann::json::array();
  for (const auto& s : chain.steps) {
    nlohmann::json js;
    js["target"] = s.link.target;
    js["category"] = to_string(s.link.category);
    js["relation"] = s.link.relation;
    if (s.derived) js["derived"] = true;
    j["steps"].push_back(js);
  }
  return j.dump();
}

}  // namespace sectrc
