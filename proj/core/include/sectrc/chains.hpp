#pragma once

#include <string>
#include <vector>

#include "sectrc/corpus.hpp"

namespace sectrc {

// Total order over positioned mentions in one document: sentence index,
// then token start, then mention id as the final tiebreak.
struct OrderKey {
  int sent_index = 0;
  int token_start = 0;
  std::string mention_id;

  friend bool operator<(const OrderKey& a, const OrderKey& b) {
    if (a.sent_index != b.sent_index) return a.sent_index < b.sent_index;
    if (a.token_start != b.token_start) return a.token_start < b.token_start;
    return a.mention_id < b.mention_id;
  }
};

OrderKey order_key(const Mention& m);

// One step of a source-event-centric chain. `derived` marks duplicates
// introduced by link inversion so loss and evaluation can exclude them.
struct ChainStep {
  TLink link;
  bool derived = false;
};

// All links sharing one source event, DCT step first, remaining steps in
// ascending target order.
struct SectChain {
  std::string doc_id;
  std::string source;  // event mention id
  std::vector<ChainStep> steps;
};

// Groups the document's links by source event and orders each group: the
// DCT link first when present, then targets by chronological appearance.
// With invert_links, every link whose target is an event additionally
// appears in that event's chain with the inverted relation, marked derived.
// Chains are returned ordered by their source event's document position.
std::vector<SectChain> build_sect_chains(const Document& doc, bool invert_links,
                                         const LabelSet& labels);

// inverse_map lookup; throws on labels outside the set.
std::string invert_relation(const std::string& label, const LabelSet& labels);

// Chain serialization used by the `chains` CLI subcommand.
std::string chain_to_json_line(const SectChain& chain);

}  // namespace sectrc
