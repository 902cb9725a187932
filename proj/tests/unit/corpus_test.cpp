#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "sectrc/corpus.hpp"
#include "sectrc/synthetic.hpp"
#include "test_util.hpp"

using namespace sectrc;

namespace {

Document small_doc() {
  Document d;
  d.doc_id = "d1";
  d.dct_value = "2022-01-01";
  d.sentences = {{"a", "b", "c"}, {"x", "y"}};
  d.mentions = {{"e1", MentionKind::Event, 0, 1, 2},
                {"t1", MentionKind::Timex, 1, 0, 1},
                {"e2", MentionKind::Event, 1, 1, 2}};
  d.tlinks = {{"e1", "DCT", LinkCategory::E2D, "before"},
              {"e1", "t1", LinkCategory::E2T, "is_included"},
              {"e1", "e2", LinkCategory::E2E, "after"}};
  return d;
}

}  // namespace

TEST_CASE("fixture counts match the hand tally") {
  auto docs = load_corpus((testutil::data_dir() / "fixture_small.jsonl").string(),
                          LabelSet::english_td());
  REQUIRE(docs.size() == 2);
  StatsReport s = corpus_stats(docs);
  CHECK(s.documents == 2);
  CHECK(s.tlinks == 6);
  CHECK(s.category_count(LinkCategory::E2D) == 2);
  CHECK(s.category_count(LinkCategory::E2T) == 3);
  CHECK(s.category_count(LinkCategory::E2E) == 1);
  CHECK(s.category_count(LinkCategory::MAT) == 0);
  CHECK(s.chains == 3);
  CHECK(s.mean_chain_length_display() == doctest::Approx(2.0));
}

TEST_CASE("save and load round-trip the corpus exactly") {
  auto labels = LabelSet::english_td();
  auto docs = load_corpus((testutil::data_dir() / "fixture_small.jsonl").string(), labels);
  auto dir = testutil::temp_dir();
  save_corpus(docs, (dir / "copy.jsonl").string());
  auto again = load_corpus((dir / "copy.jsonl").string(), labels);
  CHECK(docs == again);
}

TEST_CASE("document JSON line is canonical and stable") {
  Document d = small_doc();
  std::string line1 = document_to_json_line(d);
  std::string line2 = document_to_json_line(d);
  CHECK(line1 == line2);
  CHECK(line1.find('\n') == std::string::npos);
  Document back = document_from_json_line(line1, 1);
  CHECK(back == d);
}

TEST_CASE("parse errors carry the line number") {
  auto dir = testutil::temp_dir();
  testutil::write_text(dir / "bad.jsonl",
                       document_to_json_line(small_doc()) + "\n{not json}\n");
  try {
    load_corpus((dir / "bad.jsonl").string(), LabelSet::english_td());
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
}

TEST_CASE("validation rejects structural violations") {
  auto labels = LabelSet::english_td();

  SUBCASE("span outside its sentence") {
    Document d = small_doc();
    d.mentions[0].token_end = 9;
    CHECK_THROWS_AS(validate_document(d, labels), ValidationError);
  }
  SUBCASE("empty span") {
    Document d = small_doc();
    d.mentions[0].token_end = d.mentions[0].token_start;
    CHECK_THROWS_AS(validate_document(d, labels), ValidationError);
  }
  SUBCASE("duplicate mention id") {
    Document d = small_doc();
    d.mentions.push_back(d.mentions[0]);
    CHECK_THROWS_AS(validate_document(d, labels), ValidationError);
  }
  SUBCASE("reserved DCT id on a real mention") {
    Document d = small_doc();
    d.mentions[1].id = "DCT";
    d.tlinks = {};
    CHECK_THROWS_AS(validate_document(d, labels), ValidationError);
  }
  SUBCASE("unknown link endpoint") {
    Document d = small_doc();
    d.tlinks[1].target = "t99";
    CHECK_THROWS_AS(validate_document(d, labels), ValidationError);
  }
  SUBCASE("timex as link source") {
    Document d = small_doc();
    d.tlinks[0].source = "t1";
    CHECK_THROWS_AS(validate_document(d, labels), ValidationError);
  }
  SUBCASE("category and target kind must agree") {
    Document d = small_doc();
    d.tlinks[1].category = LinkCategory::E2E;  // target t1 is a timex
    CHECK_THROWS_AS(validate_document(d, labels), ValidationError);
    d = small_doc();
    d.tlinks[0].category = LinkCategory::E2E;  // target DCT
    CHECK_THROWS_AS(validate_document(d, labels), ValidationError);
    d = small_doc();
    d.tlinks[2].category = LinkCategory::E2T;  // target e2 is an event
    CHECK_THROWS_AS(validate_document(d, labels), ValidationError);
  }
  SUBCASE("relation outside the label set") {
    Document d = small_doc();
    d.tlinks[0].relation = "overlaps";
    CHECK_THROWS_AS(validate_document(d, labels), ValidationError);
  }
  SUBCASE("error exposes document and field") {
    Document d = small_doc();
    d.tlinks[0].relation = "overlaps";
    try {
      validate_document(d, labels);
      FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
      CHECK(e.doc_id() == "d1");
      CHECK(std::string(e.what()).find("d1") != std::string::npos);
    }
  }
}

TEST_CASE("validation is idempotent on valid documents") {
  Document d = small_doc();
  auto labels = LabelSet::english_td();
  validate_document(d, labels);
  validate_document(d, labels);
  CHECK(d == small_doc());
}

TEST_CASE("label set invariants") {
  LabelSet td = LabelSet::english_td();
  CHECK(td.labels.size() == 6);
  for (const auto& l : {"after", "before", "simultaneous", "includes", "is_included", "vague"})
    CHECK(td.contains(l));
  td.validate();

  SUBCASE("inverse map is an involution") {
    for (const auto& l : td.labels) CHECK(td.inverse(td.inverse(l)) == l);
    CHECK(td.inverse("before") == "after");
    CHECK(td.inverse("includes") == "is_included");
    CHECK(td.inverse("vague") == "vague");
    CHECK(td.inverse("simultaneous") == "simultaneous");
  }
  SUBCASE("index_of") {
    CHECK(td.index_of(td.labels[0]) == 0);
    CHECK(td.index_of("no-such-label") == -1);
  }
  SUBCASE("validate rejects broken inverse maps") {
    LabelSet bad = td;
    bad.inverse_map["before"] = "vague";  // not an involution
    CHECK_THROWS(bad.validate());
    bad = td;
    bad.inverse_map.erase("after");
    CHECK_THROWS(bad.validate());
    bad = td;
    bad.labels.push_back(bad.labels[0]);
    CHECK_THROWS(bad.validate());
  }
  SUBCASE("file round trip") {
    auto dir = testutil::temp_dir();
    td.save((dir / "labels.json").string());
    LabelSet back = LabelSet::load((dir / "labels.json").string());
    CHECK(back == td);
  }
}

TEST_CASE("corpus_stats equals a brute-force recount") {
  SynthSpec spec;
  spec.n_docs = 30;
  spec.events_per_doc = 4;
  spec.timex_per_doc = 2;
  spec.seed = 99;
  auto docs = generate_synthetic_corpus(spec);
  StatsReport s = corpus_stats(docs);

  long tlinks = 0;
  std::map<LinkCategory, long> per_cat;
  std::set<std::pair<std::string, std::string>> chain_keys;
  for (const auto& d : docs) {
    tlinks += static_cast<long>(d.tlinks.size());
    for (const auto& t : d.tlinks) {
      per_cat[t.category]++;
      chain_keys.insert({d.doc_id, t.source});
    }
  }
  CHECK(s.documents == 30);
  CHECK(s.tlinks == tlinks);
  for (auto cat : {LinkCategory::E2D, LinkCategory::E2T, LinkCategory::E2E, LinkCategory::MAT})
    CHECK(s.category_count(cat) == (per_cat.count(cat) ? per_cat[cat] : 0));
  CHECK(s.chains == static_cast<long>(chain_keys.size()));
  CHECK(s.mean_chain_length ==
        doctest::Approx(static_cast<double>(tlinks) / static_cast<double>(chain_keys.size())));
}

TEST_CASE("cross-validation splits partition the corpus") {
  SynthSpec spec;
  spec.n_docs = 23;
  spec.events_per_doc = 2;
  spec.timex_per_doc = 1;
  spec.seed = 5;
  auto docs = generate_synthetic_corpus(spec);

  SplitSpec ss;
  ss.mode = SplitMode::CrossValidation;
  ss.folds = 5;
  ss.dev_fraction = 0.2;
  ss.seed = 42;
  auto splits = split_corpus(docs, ss);
  REQUIRE(splits.size() == 5);

  std::multiset<std::string> test_ids;
  for (const auto& split : splits) {
    std::set<std::string> seen;
    for (const auto* part : {&split.train, &split.dev, &split.test})
      for (const auto& d : *part) CHECK(seen.insert(d.doc_id).second);
    CHECK(seen.size() == docs.size());  // each fold sees every document exactly once
    CHECK(!split.train.empty());
    CHECK(!split.dev.empty());
    CHECK(!split.test.empty());
    for (const auto& d : split.test) test_ids.insert(d.doc_id);
  }
  CHECK(test_ids.size() == docs.size());  // test folds partition the corpus
  for (const auto& d : docs) CHECK(test_ids.count(d.doc_id) == 1);
}

TEST_CASE("cross-validation is seed-deterministic") {
  SynthSpec spec;
  spec.n_docs = 12;
  spec.events_per_doc = 2;
  spec.timex_per_doc = 1;
  spec.seed = 6;
  auto docs = generate_synthetic_corpus(spec);
  SplitSpec ss;
  ss.folds = 3;
  ss.seed = 7;
  auto a = split_corpus(docs, ss);
  auto b = split_corpus(docs, ss);
  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].train == b[i].train);
    CHECK(a[i].dev == b[i].dev);
    CHECK(a[i].test == b[i].test);
  }
  ss.seed = 8;
  auto c = split_corpus(docs, ss);
  bool any_diff = false;
  for (size_t i = 0; i < a.size(); ++i)
    if (!(a[i].test == c[i].test)) any_diff = true;
  CHECK(any_diff);
}

TEST_CASE("fixed manifest split honours the listed membership") {
  auto labels = LabelSet::english_td();
  auto docs = load_corpus((testutil::data_dir() / "fixture_small.jsonl").string(), labels);
  auto dir = testutil::temp_dir();
  testutil::write_text(dir / "split.json",
                       R"({"train": ["fx-1"], "dev": [], "test": ["fx-2"]})");
  SplitSpec ss;
  ss.mode = SplitMode::FixedManifest;
  ss.manifest_path = (dir / "split.json").string();
  auto splits = split_corpus(docs, ss);
  REQUIRE(splits.size() == 1);
  REQUIRE(splits[0].train.size() == 1);
  CHECK(splits[0].train[0].doc_id == "fx-1");
  CHECK(splits[0].dev.empty());
  REQUIRE(splits[0].test.size() == 1);
  CHECK(splits[0].test[0].doc_id == "fx-2");

  testutil::write_text(dir / "bad.json", R"({"train": ["nope"], "dev": [], "test": []})");
  ss.manifest_path = (dir / "bad.json").string();
  CHECK_THROWS(split_corpus(docs, ss));
}
