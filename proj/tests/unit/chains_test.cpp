#include <algorithm>
#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "doctest.h"
#include "sectrc/chains.hpp"
#include "sectrc/corpus.hpp"
#include "sectrc/rng.hpp"
#include "sectrc/synthetic.hpp"

using namespace sectrc;

namespace {

// Source event e1 linked to DCT, e2, t1 and e3, where document order of the
// targets is e2 < t1 < e3 and t1/e3 share sentence 2.
Document four_link_doc() {
  Document d;
  d.doc_id = "c1";
  d.dct_value = "2023-05-05";
  d.sentences = {{"w0", "w1", "w2"}, {"w3", "w4"}, {"w5", "w6", "w7"}};
  d.mentions = {{"e1", MentionKind::Event, 0, 1, 2},
                {"e2", MentionKind::Event, 1, 0, 1},
                {"t1", MentionKind::Timex, 2, 0, 1},
                {"e3", MentionKind::Event, 2, 2, 3}};
  d.tlinks = {{"e1", "e3", LinkCategory::E2E, "before"},
              {"e1", "DCT", LinkCategory::E2D, "after"},
              {"e1", "t1", LinkCategory::E2T, "is_included"},
              {"e1", "e2", LinkCategory::E2E, "includes"}};
  return d;
}

bool chains_equal(const std::vector<SectChain>& a, const std::vector<SectChain>& b) {
  if (a.size() != b.size()) return false;
  for (size_t i = 0; i < a.size(); ++i) {
    if (a[i].doc_id != b[i].doc_id || a[i].source != b[i].source) return false;
    if (a[i].steps.size() != b[i].steps.size()) return false;
    for (size_t j = 0; j < a[i].steps.size(); ++j)
      if (!(a[i].steps[j].link == b[i].steps[j].link) ||
          a[i].steps[j].derived != b[i].steps[j].derived)
        return false;
  }
  return true;
}

// Independent construction: group by source in a sorted map, order steps by
// (not-DCT, sentence, start, id), order chains by source position.
std::vector<SectChain> oracle_chains(const Document& doc) {
  auto key = [&](const TLink& l) {
    if (l.target == kDctId) return std::tuple<int, int, int, std::string>{0, -1, -1, ""};
    const Mention* m = doc.find_mention(l.target);
    return std::tuple<int, int, int, std::string>{1, m->sent_index, m->token_start, m->id};
  };
  std::map<std::string, std::vector<ChainStep>> grouped;
  for (const auto& l : doc.tlinks) grouped[l.source].push_back(ChainStep{l, false});
  std::vector<SectChain> out;
  for (auto& [source, steps] : grouped) {
    std::sort(steps.begin(), steps.end(),
              [&](const ChainStep& x, const ChainStep& y) { return key(x.link) < key(y.link); });
    out.push_back(SectChain{doc.doc_id, source, steps});
  }
  auto pos = [&](const SectChain& c) {
    const Mention* m = doc.find_mention(c.source);
    return std::tuple<int, int, std::string>{m->sent_index, m->token_start, m->id};
  };
  std::sort(out.begin(), out.end(),
            [&](const SectChain& x, const SectChain& y) { return pos(x) < pos(y); });
  return out;
}

}  // namespace

TEST_CASE("four-link chain orders DCT first then targets by appearance") {
  auto labels = LabelSet::english_td();
  Document d = four_link_doc();
  auto chains = build_sect_chains(d, false, labels);
  REQUIRE(chains.size() == 1);
  const auto& steps = chains[0].steps;
  REQUIRE(steps.size() == 4);
  CHECK(steps[0].link.target == "DCT");
  CHECK(steps[1].link.target == "e2");
  CHECK(steps[2].link.target == "t1");
  CHECK(steps[3].link.target == "e3");
  CHECK(chains[0].source == "e1");
  for (const auto& s : steps) CHECK(!s.derived);
}

TEST_CASE("single-link document yields one singleton chain") {
  auto labels = LabelSet::english_td();
  Document d = four_link_doc();
  d.tlinks = {{"e1", "DCT", LinkCategory::E2D, "before"}};
  auto chains = build_sect_chains(d, false, labels);
  REQUIRE(chains.size() == 1);
  CHECK(chains[0].steps.size() == 1);
  CHECK(chains[0].steps[0].link.target == "DCT");
}

TEST_CASE("position ties break by mention id") {
  auto labels = LabelSet::english_td();
  Document d;
  d.doc_id = "tie";
  d.sentences = {{"w0", "w1", "w2", "w3"}};
  d.mentions = {{"e1", MentionKind::Event, 0, 0, 1},
                {"ma", MentionKind::Event, 0, 2, 3},
                {"mb", MentionKind::Event, 0, 2, 4}};
  d.tlinks = {{"e1", "mb", LinkCategory::E2E, "before"},
              {"e1", "ma", LinkCategory::E2E, "after"}};
  auto chains = build_sect_chains(d, false, labels);
  REQUIRE(chains.size() == 1);
  REQUIRE(chains[0].steps.size() == 2);
  CHECK(chains[0].steps[0].link.target == "ma");
  CHECK(chains[0].steps[1].link.target == "mb");
}

TEST_CASE("chains match the brute-force oracle on random synthetic documents") {
  for (uint64_t seed : {1u, 2u, 3u}) {
    SynthSpec spec;
    spec.n_docs = 50;
    spec.events_per_doc = 6;
    spec.timex_per_doc = 3;
    spec.seed = seed;
    auto docs = generate_synthetic_corpus(spec);
    auto labels = spec.label_set;
    for (const auto& doc : docs)
      CHECK(chains_equal(build_sect_chains(doc, false, labels), oracle_chains(doc)));
  }
}

TEST_CASE("partition property: chain steps cover every link exactly once") {
  SynthSpec spec;
  spec.n_docs = 20;
  spec.events_per_doc = 5;
  spec.timex_per_doc = 2;
  spec.seed = 14;
  auto docs = generate_synthetic_corpus(spec);
  for (const auto& doc : docs) {
    auto chains = build_sect_chains(doc, false, spec.label_set);
    size_t total = 0;
    for (const auto& c : chains) {
      CHECK(!c.steps.empty());
      total += c.steps.size();
    }
    CHECK(total == doc.tlinks.size());
  }
}

TEST_CASE("chain construction is invariant under link permutation") {
  auto labels = LabelSet::english_td();
  SynthSpec spec;
  spec.n_docs = 1;
  spec.events_per_doc = 6;
  spec.timex_per_doc = 3;
  spec.seed = 31;
  Document doc = generate_synthetic_corpus(spec)[0];
  auto baseline = build_sect_chains(doc, false, spec.label_set);
  Rng rng(77);
  for (int trial = 0; trial < 100; ++trial) {
    rng.shuffle(doc.tlinks);
    CHECK(chains_equal(build_sect_chains(doc, false, spec.label_set), baseline));
  }
}

TEST_CASE("at most one DCT step per chain and it is first") {
  SynthSpec spec;
  spec.n_docs = 25;
  spec.events_per_doc = 4;
  spec.timex_per_doc = 2;
  spec.seed = 8;
  spec.dct_link_fraction = 0.6;
  auto docs = generate_synthetic_corpus(spec);
  for (const auto& doc : docs) {
    for (const auto& chain : build_sect_chains(doc, false, spec.label_set)) {
      int dct_steps = 0;
      for (size_t i = 0; i < chain.steps.size(); ++i) {
        if (chain.steps[i].link.target == kDctId) {
          ++dct_steps;
          CHECK(i == 0);
        }
      }
      CHECK(dct_steps <= 1);
    }
  }
}

TEST_CASE("relation inversion follows the label set involution") {
  auto labels = LabelSet::english_td();
  CHECK(invert_relation("before", labels) == "after");
  CHECK(invert_relation("after", labels) == "before");
  CHECK(invert_relation("vague", labels) == "vague");
  CHECK(invert_relation("includes", labels) == "is_included");
  CHECK(invert_relation("is_included", labels) == "includes");
  CHECK_THROWS(invert_relation("overlaps", labels));
}

TEST_CASE("link inversion adds derived steps to target-event chains only") {
  auto labels = LabelSet::english_td();
  Document d = four_link_doc();
  auto plain = build_sect_chains(d, false, labels);
  auto inverted = build_sect_chains(d, true, labels);

  // e2 and e3 now head derived singleton chains; t1 and DCT never do.
  REQUIRE(inverted.size() == 3);
  CHECK(inverted[0].source == "e1");
  CHECK(chains_equal({inverted[0]}, {plain[0]}));

  CHECK(inverted[1].source == "e2");
  REQUIRE(inverted[1].steps.size() == 1);
  CHECK(inverted[1].steps[0].derived);
  CHECK(inverted[1].steps[0].link.target == "e1");
  CHECK(inverted[1].steps[0].link.relation == "is_included");  // inverse of includes
  CHECK(inverted[1].steps[0].link.category == LinkCategory::E2E);

  CHECK(inverted[2].source == "e3");
  REQUIRE(inverted[2].steps.size() == 1);
  CHECK(inverted[2].steps[0].derived);
  CHECK(inverted[2].steps[0].link.relation == "after");  // inverse of before

  // Step count grows by exactly the number of event-target links.
  size_t plain_steps = 0, inv_steps = 0;
  for (const auto& c : plain) plain_steps += c.steps.size();
  for (const auto& c : inverted) inv_steps += c.steps.size();
  CHECK(inv_steps == plain_steps + 2);
}

TEST_CASE("chain JSON line carries doc, source and ordered steps") {
  auto labels = LabelSet::english_td();
  Document d = four_link_doc();
  auto chains = build_sect_chains(d, false, labels);
  std::string line = chain_to_json_line(chains[0]);
  CHECK(line.find("\"doc_id\":\"c1\"") != std::string::npos);
  CHECK(line.find("\"source\":\"e1\"") != std::string::npos);
  CHECK(line.find("\"target\":\"DCT\"") != std::string::npos);
  CHECK(line.find('\n') == std::string::npos);
}
