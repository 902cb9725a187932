#include "sectrc/synthetic.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "sectrc/rng.hpp"

namespace sectrc {

using nlohmann::json;

void SynthSpec::validate() const {
  if (n_docs < 1) throw std::invalid_argument("n_docs must be >= 1");
  if (events_per_doc < 1) throw std::invalid_argument("events_per_doc must be >= 1");
  if (timex_per_doc < 0) throw std::invalid_argument("timex_per_doc must be >= 0");
  if (context_depth < 1) throw std::invalid_argument("context_depth must be >= 1");
  if (event_identities < 1 || timex_identities < 1)
    throw std::invalid_argument("identity pools must be non-empty");
  if (dct_link_fraction < 0.0 || dct_link_fraction > 1.0 || timex_link_fraction < 0.0 ||
      timex_link_fraction > 1.0)
    throw std::invalid_argument("link fractions must lie in [0,1]");
  if (sentences_per_doc < 1) throw std::invalid_argument("sentences_per_doc must be >= 1");
  label_set.validate();
}

namespace {

SynthSpec::Mode mode_from_string(const std::string& s) {
  if (s == "chain-context") return SynthSpec::Mode::ChainContext;
  if (s == "shared-feature") return SynthSpec::Mode::SharedFeature;
  throw std::invalid_argument("unknown synthetic mode: " + s);
}

std::string mode_to_string(SynthSpec::Mode m) {
  return m == SynthSpec::Mode::ChainContext ? "chain-context" : "shared-feature";
}

SynthSpec spec_from_json(const json& j) {
  static const std::set<std::string> known = {
      "n_docs",           "events_per_doc",    "timex_per_doc",
      "context_depth",    "seed",              "label_set",
      "mode",             "event_identities",  "timex_identities",
      "dct_link_fraction", "timex_link_fraction", "sentences_per_doc"};
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (!known.count(key)) throw std::invalid_argument("unknown generator spec key: " + key);
  }
  SynthSpec s;
  s.n_docs = j.at("n_docs").get<int>();
  s.events_per_doc = j.at("events_per_doc").get<int>();
  s.timex_per_doc = j.at("timex_per_doc").get<int>();
  s.context_depth = j.value("context_depth", s.context_depth);
  s.seed = j.at("seed").get<uint64_t>();
  if (j.contains("label_set")) {
    const auto& ls = j.at("label_set");
    if (ls.is_string()) {
      const auto name = ls.get<std::string>();
      if (name == "english-td")
        s.label_set = LabelSet::english_td();
      else
        s.label_set = LabelSet::load(name);  // treated as a path
    } else {
      s.label_set.name = ls.value("name", "inline");
      s.label_set.labels = ls.at("labels").get<std::vector<std::string>>();
      for (const auto& [k, v] : ls.at("inverse").items())
        s.label_set.inverse_map[k] = v.get<std::string>();
    }
  }
  if (j.contains("mode")) s.mode = mode_from_string(j.at("mode").get<std::string>());
  s.event_identities = j.value("event_identities", s.event_identities);
  s.timex_identities = j.value("timex_identities", s.timex_identities);
  s.dct_link_fraction = j.value("dct_link_fraction", s.dct_link_fraction);
  s.timex_link_fraction = j.value("timex_link_fraction", s.timex_link_fraction);
  s.sentences_per_doc = j.value("sentences_per_doc", s.sentences_per_doc);
  s.validate();
  return s;
}

}  // namespace

SynthSpec SynthSpec::from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open synthetic spec file: " + path);
  json j;
  in >> j;
  return spec_from_json(j);
}

SynthSpec SynthSpec::from_json_string(const std::string& text) {
  return spec_from_json(json::parse(text));
}

std::string SynthSpec::to_json_string() const {
  json j;
  j["n_docs"] = n_docs;
  j["events_per_doc"] = events_per_doc;
  j["timex_per_doc"] = timex_per_doc;
  j["context_depth"] = context_depth;
  j["seed"] = seed;
  j["label_set"] = {{"name", label_set.name},
                    {"labels", label_set.labels},
                    {"inverse", label_set.inverse_map}};
  j["mode"] = mode_to_string(mode);
  j["event_identities"] = event_identities;
  j["timex_identities"] = timex_identities;
  j["dct_link_fraction"] = dct_link_fraction;
  j["timex_link_fraction"] = timex_link_fraction;
  j["sentences_per_doc"] = sentences_per_doc;
  return j.dump(2);
}

int synthetic_identity(const std::string& token) {
  if (token.size() < 3) return -1;
  if (token.compare(0, 2, "ev") != 0 && token.compare(0, 2, "tx") != 0) return -1;
  int value = 0;
  for (size_t i = 2; i < token.size(); ++i) {
    if (token[i] < '0' || token[i] > '9') return -1;
    value = value * 10 + (token[i] - '0');
  }
  return value;
}

namespace {

std::string two_digits(int v) {
  std::ostringstream os;
  if (v < 10) os << '0';
  os << v;
  return os.str();
}

struct PlacedMention {
  int rank = 0;       // position among the document's mentions
  bool is_event = false;
  int identity = 0;   // index into the identity pool
  int sent = 0;
  int start = 0;
};

}  // namespace

std::vector<Document> generate_synthetic_corpus(const SynthSpec& spec) {
  spec.validate();
  const int label_count = static_cast<int>(spec.label_set.labels.size());
  const auto label_of_class = [&](int cls) { return spec.label_set.labels[cls % label_count]; };

  std::vector<Document> docs;
  docs.reserve(spec.n_docs);
  for (int di = 0; di < spec.n_docs; ++di) {
    Rng rng(mix64(mix64(spec.seed, 0x53594e5448ULL), static_cast<uint64_t>(di)));

    const int m = spec.events_per_doc + spec.timex_per_doc;
    // Kind layout: a shuffled multiset of event/timex slots.
    std::vector<char> kinds;
    kinds.insert(kinds.end(), spec.events_per_doc, 'e');
    kinds.insert(kinds.end(), spec.timex_per_doc, 't');
    rng.shuffle(kinds);

    Document doc;
    doc.doc_id = "synth-" + std::to_string(di);
    doc.dct_value = "2026-01-" + two_digits(1 + di % 28);
    doc.sentences.assign(spec.sentences_per_doc, {});

    std::vector<PlacedMention> placed(m);
    for (int r = 0; r < m; ++r) {
      PlacedMention& pm = placed[r];
      pm.rank = r;
      pm.is_event = kinds[r] == 'e';
      pm.identity = pm.is_event ? rng.below_int(spec.event_identities)
                                : rng.below_int(spec.timex_identities);
      pm.sent = r * spec.sentences_per_doc / m;
      auto& sent = doc.sentences[pm.sent];
      sent.push_back("w" + std::to_string(rng.below_int(10)));
      pm.start = static_cast<int>(sent.size());
      sent.push_back((pm.is_event ? "ev" : "tx") + two_digits(pm.identity));

      Mention mention;
      mention.id = (pm.is_event ? "e" : "t") + std::to_string(r);
      mention.kind = pm.is_event ? MentionKind::Event : MentionKind::Timex;
      mention.sent_index = pm.sent;
      mention.token_start = pm.start;
      mention.token_end = pm.start + 1;
      doc.mentions.push_back(mention);
    }
    for (auto& sent : doc.sentences)
      if (sent.empty()) sent.push_back("w0");

    const auto class_of_rank = [&](int rank) { return placed[rank].identity % label_count; };

    for (int r = 0; r < m; ++r) {
      if (!placed[r].is_event) continue;
      const std::string source_id = "e" + std::to_string(r);
      const int source_class = class_of_rank(r);

      // Step targets in chronological (rank) order; the DCT link precedes
      // them when present. Step numbering counts the DCT link as step 1.
      const bool has_dct = rng.uniform01() < spec.dct_link_fraction;
      std::vector<int> target_ranks;
      for (int q = r + 1; q < m; ++q) {
        if (!placed[q].is_event && spec.timex_link_fraction < 1.0 &&
            rng.uniform01() >= spec.timex_link_fraction)
          continue;
        target_ranks.push_back(q);
      }

      // Target class per chain step; the DCT sentinel has class 0.
      std::vector<int> step_class;
      if (has_dct) step_class.push_back(0);
      for (int q : target_ranks) step_class.push_back(class_of_rank(q));

      int step = 0;
      const auto planted_class = [&](int step_index) {
        // Oldest target inside a window covering the last context_depth
        // steps of the chain.
        const int oldest = std::max(1, step_index - spec.context_depth + 1);
        return step_class[oldest - 1];
      };

      if (has_dct) {
        ++step;
        TLink link;
        link.source = source_id;
        link.target = kDctId;
        link.category = LinkCategory::E2D;
        link.relation = spec.mode == SynthSpec::Mode::SharedFeature
                            ? label_of_class(source_class)
                            : label_of_class(planted_class(step));
        doc.tlinks.push_back(link);
      }
      for (int q : target_ranks) {
        ++step;
        TLink link;
        link.source = source_id;
        link.target = (placed[q].is_event ? "e" : "t") + std::to_string(q);
        link.category = placed[q].is_event ? LinkCategory::E2E : LinkCategory::E2T;
        if (spec.mode == SynthSpec::Mode::SharedFeature)
          link.relation = placed[q].is_event ? label_of_class(class_of_rank(q))
                                             : label_of_class(source_class);
        else
          link.relation = label_of_class(planted_class(step));
        doc.tlinks.push_back(link);
      }
    }

    validate_document(doc, spec.label_set);
    docs.push_back(std::move(doc));
  }
  return docs;
}

}  // namespace sectrc
