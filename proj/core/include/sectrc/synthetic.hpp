#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sectrc/corpus.hpp"

namespace sectrc {

// Synthetic dense-TLINK corpus generator.
//
// Documents hold a sequence of single-token mentions whose surface encodes
// an identity ("ev07", "tx03") but nothing about surrounding mentions. The
// identity class of a mention is its identity index modulo the label count,
// and the DCT sentinel has class 0.
//
// ChainContext mode plants a rule that needs chain history: every event
// mention sources a chain over all later mentions (DCT link first), and the
// gold label of chain step i is the class of the target at step
// max(1, i - context_depth + 1), i.e. the oldest target inside a window of
// the last context_depth steps. With context_depth 1 the label depends only
// on the current target, so pair-local classifiers are information-
// sufficient; with larger depths they can at best predict the label
// marginal, while a chain model that remembers recent targets can reach
// 100%.
//
// SharedFeature mode plants pair-local rules that reuse one feature across
// categories: E2E labels are the class of the target event while E2D and
// E2T labels are the class of the source event. The dct_link_fraction and
// timex_link_fraction knobs starve E2D/E2T so only models that share the
// event representations across categories can classify the starved
// categories on identities they never saw there.
struct SynthSpec {
  enum class Mode { ChainContext, SharedFeature };

  int n_docs = 0;
  int events_per_doc = 0;
  int timex_per_doc = 0;
  int context_depth = 1;
  LabelSet label_set = LabelSet::english_td();
  uint64_t seed = 0;

  Mode mode = Mode::ChainContext;
  int event_identities = 24;
  int timex_identities = 12;
  double dct_link_fraction = 1.0;
  double timex_link_fraction = 1.0;
  int sentences_per_doc = 3;

  void validate() const;

  static SynthSpec from_json_file(const std::string& path);
  static SynthSpec from_json_string(const std::string& text);
  std::string to_json_string() const;
};

std::vector<Document> generate_synthetic_corpus(const SynthSpec& spec);

// Identity index encoded in a synthetic mention surface token, e.g. 7 for
// "ev07". Returns -1 for non-mention tokens.
int synthetic_identity(const std::string& token);

}  // namespace sectrc
