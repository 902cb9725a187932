#include "sectrc/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "sectrc/rng.hpp"

namespace sectrc {

using nlohmann::json;

const std::string& to_string(MentionKind k) {
  static const std::string kEvent = "event", kTimex = "timex", kDct = "dct";
  switch (k) {
    case MentionKind::Event: return kEvent;
    case MentionKind::Timex: return kTimex;
    case MentionKind::Dct: return kDct;
  }
  throw std::logic_error("bad MentionKind");
}

const std::string& to_string(LinkCategory c) {
  static const std::string e2d = "E2D", e2t = "E2T", e2e = "E2E", mat = "MAT";
  switch (c) {
    case LinkCategory::E2D: return e2d;
    case LinkCategory::E2T: return e2t;
    case LinkCategory::E2E: return e2e;
    case LinkCategory::MAT: return mat;
  }
  throw std::logic_error("bad LinkCategory");
}

MentionKind mention_kind_from_string(const std::string& s) {
  if (s == "event") return MentionKind::Event;
  if (s == "timex") return MentionKind::Timex;
  if (s == "dct") return MentionKind::Dct;
  throw std::invalid_argument("unknown mention kind: " + s);
}

LinkCategory category_from_string(const std::string& s) {
  if (s == "E2D") return LinkCategory::E2D;
  if (s == "E2T") return LinkCategory::E2T;
  if (s == "E2E") return LinkCategory::E2E;
  if (s == "MAT") return LinkCategory::MAT;
  throw std::invalid_argument("unknown link category: " + s);
}

bool LabelSet::contains(const std::string& label) const {
  return std::find(labels.begin(), labels.end(), label) != labels.end();
}

int LabelSet::index_of(const std::string& label) const {
  const auto it = std::find(labels.begin(), labels.end(), label);
  return it == labels.end() ? -1 : static_cast<int>(it - labels.begin());
}

const std::string& LabelSet::inverse(const std::string& label) const {
  const auto it = inverse_map.find(label);
  if (it == inverse_map.end()) throw std::invalid_argument("label not in set: " + label);
  return it->second;
}

void LabelSet::validate() const {
  if (labels.empty()) throw std::invalid_argument("label set " + name + " is empty");
  std::set<std::string> seen;
  for (const auto& l : labels)
    if (!seen.insert(l).second) throw std::invalid_argument("duplicate label: " + l);
  for (const auto& l : labels) {
    const auto it = inverse_map.find(l);
    if (it == inverse_map.end()) throw std::invalid_argument("no inverse for label: " + l);
    if (!contains(it->second)) throw std::invalid_argument("inverse outside set: " + it->second);
    if (inverse(it->second) != l)
      throw std::invalid_argument("inverse map is not an involution at: " + l);
  }
}

LabelSet LabelSet::english_td() {
  LabelSet s;
  s.name = "english-td";
  s.labels = {"after", "before", "simultaneous", "includes", "is_included", "vague"};
  s.inverse_map = {
      {"after", "before"},       {"before", "after"},       {"simultaneous", "simultaneous"},
      {"includes", "is_included"}, {"is_included", "includes"}, {"vague", "vague"},
  };
  return s;
}

LabelSet LabelSet::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open label set file: " + path);
  json j;
  in >> j;
  LabelSet s;
  s.name = j.value("name", path);
  s.labels = j.at("labels").get<std::vector<std::string>>();
  for (const auto& [k, v] : j.at("inverse").items()) s.inverse_map[k] = v.get<std::string>();
  s.validate();
  return s;
}

void LabelSet::save(const std::string& path) const {
  json j;
  j["name"] = name;
  j["labels"] = labels;
  j["inverse"] = inverse_map;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write label set file: " + path);
  out << j.dump(2) << "\n";
}

const Mention* Document::find_mention(const std::string& id) const {
  static const Mention dct_sentinel{kDctId, MentionKind::Dct, 0, 0, 0};
  if (id == kDctId) return &dct_sentinel;
  for (const auto& m : mentions)
    if (m.id == id) return &m;
  return nullptr;
}

void validate_document(const Document& doc, const LabelSet& labels) {
  std::set<std::string> ids;
  for (const auto& m : doc.mentions) {
    if (m.id == kDctId)
      throw ValidationError(doc.doc_id, "mentions.id", "reserved id DCT used by a mention");
    if (!ids.insert(m.id).second)
      throw ValidationError(doc.doc_id, "mentions.id", "duplicate mention id " + m.id);
    if (m.kind == MentionKind::Dct)
      throw ValidationError(doc.doc_id, "mentions.kind",
                            "explicit dct mention not allowed (sentinel is implicit)");
    if (m.sent_index < 0 || m.sent_index >= static_cast<int>(doc.sentences.size()))
      throw ValidationError(doc.doc_id, "mentions.sent",
                            "mention " + m.id + " sentence index out of range");
    const auto& sent = doc.sentences[m.sent_index];
    if (m.token_start < 0 || m.token_end > static_cast<int>(sent.size()) ||
        m.token_end <= m.token_start)
      throw ValidationError(doc.doc_id, "mentions.span",
                            "mention " + m.id + " span outside sentence token range");
  }
  for (const auto& t : doc.tlinks) {
    const Mention* src = doc.find_mention(t.source);
    if (src == nullptr)
      throw ValidationError(doc.doc_id, "tlinks.source", "unknown mention " + t.source);
    if (src->kind != MentionKind::Event)
      throw ValidationError(doc.doc_id, "tlinks.source",
                            "link source " + t.source + " is not an event");
    const Mention* tgt = doc.find_mention(t.target);
    if (tgt == nullptr)
      throw ValidationError(doc.doc_id, "tlinks.target", "unknown mention " + t.target);
    const bool ok = (t.category == LinkCategory::E2D && tgt->kind == MentionKind::Dct) ||
                    (t.category == LinkCategory::E2T && tgt->kind == MentionKind::Timex) ||
                    ((t.category == LinkCategory::E2E || t.category == LinkCategory::MAT) &&
                     tgt->kind == MentionKind::Event);
    if (!ok)
      throw ValidationError(doc.doc_id, "tlinks.category",
                            to_string(t.category) + " link to " + to_string(tgt->kind) +
                                " target " + t.target);
    if (!labels.contains(t.relation))
      throw ValidationError(doc.doc_id, "tlinks.relation",
                            "relation " + t.relation + " not in label set " + labels.name);
  }
}

namespace {

Document document_from_json(const json& j) {
  Document d;
  d.doc_id = j.at("doc_id").get<std::string>();
  d.dct_value = j.value("dct_value", "");
  for (const auto& sent : j.at("sentences"))
    d.sentences.push_back(sent.get<std::vector<std::string>>());
  for (const auto& jm : j.at("mentions")) {
    Mention m;
    m.id = jm.at("id").get<std::string>();
    m.kind = mention_kind_from_string(jm.at("kind").get<std::string>());
    m.sent_index = jm.at("sent").get<int>();
    m.token_start = jm.at("start").get<int>();
    m.token_end = jm.at("end").get<int>();
    d.mentions.push_back(std::move(m));
  }
  for (const auto& jt : j.at("tlinks")) {
    TLink t;
    t.source = jt.at("source").get<std::string>();
    t.target = jt.at("target").get<std::string>();
    t.category = category_from_string(jt.at("category").get<std::string>());
    t.relation = jt.at("relation").get<std::string>();
    d.tlinks.push_back(std::move(t));
  }
  return d;
}

json document_to_json(const Document& d) {
  json j;
  j["doc_id"] = d.doc_id;
  j["dct_value"] = d.dct_value;
  j["sentences"] = d.sentences;
  j["mentions"] = json::array();
  for (const auto& m : d.mentions) {
    json jm;
    jm["id"] = m.id;
    jm["kind"] = to_string(m.kind);
    jm["sent"] = m.sent_index;
    jm["start"] = m.token_start;
    jm["end"] = m.token_end;
    j["mentions"].push_back(jm);
  }
  j["tlinks"] = json::array();
  for (const auto& t : d.tlinks) {
    json jt;
    jt["source"] = t.source;
    jt["target"] = t.target;
    jt["category"] = to_string(t.category);
    jt["relation"] = t.relation;
    j["tlinks"].push_back(jt);
  }
  return j;
}

}  // namespace

Document document_from_json_line(const std::string& line, int line_number) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    throw ParseError(line_number, std::string("malformed JSON: ") + e.what());
  }
  try {
    return document_from_json(j);
  } catch (const json::exception& e) {
    throw ParseError(line_number, std::string("bad record: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ParseError(line_number, std::string("bad record: ") + e.what());
  }
}

std::string document_to_json_line(const Document& doc) { return document_to_json(doc).dump(); }

std::vector<Document> load_corpus(const std::string& path, const LabelSet& labels) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open corpus file: " + path);
  std::vector<Document> docs;
  std::string line;
  int line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    Document d = document_from_json_line(line, line_number);
    validate_document(d, labels);
    docs.push_back(std::move(d));
  }
  return docs;
}

void save_corpus(const std::vector<Document>& docs, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write corpus file: " + path);
  for (const auto& d : docs) out << document_to_json_line(d) << "\n";
}

long StatsReport::category_count(LinkCategory c) const {
  const auto it = per_category.find(c);
  return it == per_category.end() ? 0 : it->second;
}

double StatsReport::mean_chain_length_display() const {
  return std::round(mean_chain_length * 10.0) / 10.0;
}

StatsReport corpus_stats(const std::vector<Document>& docs) {
  StatsReport r;
  r.documents = static_cast<long>(docs.size());
  for (const auto& d : docs) {
    std::set<std::string> sources;
    for (const auto& t : d.tlinks) {
      ++r.tlinks;
      ++r.per_category[t.category];
      sources.insert(t.source);
    }
    r.chains += static_cast<long>(sources.size());
  }
  r.mean_chain_length = r.chains == 0 ? 0.0 : static_cast<double>(r.tlinks) / r.chains;
  return r;
}

void SplitSpec::validate() const {
  if (dev_fraction <= 0.0 || dev_fraction >= 1.0)
    throw std::invalid_argument("dev_fraction must lie in (0,1)");
  if (mode == SplitMode::CrossValidation && folds < 2)
    throw std::invalid_argument("cross-validation needs folds >= 2");
  if (mode == SplitMode::FixedManifest && manifest_path.empty())
    throw std::invalid_argument("fixed split mode needs a manifest path");
}

namespace {

std::vector<Document> gather(const std::vector<Document>& docs,
                             const std::vector<std::string>& ids) {
  std::vector<Document> out;
  out.reserve(ids.size());
  for (const auto& id : ids) {
    const auto it = std::find_if(docs.begin(), docs.end(),
                                 [&](const Document& d) { return d.doc_id == id; });
    if (it == docs.end()) throw std::runtime_error("split manifest references unknown doc_id: " + id);
    out.push_back(*it);
  }
  return out;
}

}  // namespace

std::vector<Split> split_corpus(const std::vector<Document>& docs, const SplitSpec& spec) {
  spec.validate();
  if (spec.mode == SplitMode::FixedManifest) {
    std::ifstream in(spec.manifest_path);
    if (!in) throw std::runtime_error("cannot open split manifest: " + spec.manifest_path);
    json j;
    in >> j;
    Split s;
    s.train = gather(docs, j.at("train").get<std::vector<std::string>>());
    s.dev = gather(docs, j.at("dev").get<std::vector<std::string>>());
    s.test = gather(docs, j.at("test").get<std::vector<std::string>>());
    return {std::move(s)};
  }

  // Document-level cross-validation: shuffle once, carve contiguous test
  // folds, then draw the dev set from each fold's remaining documents.
  std::vector<int> order(docs.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  Rng rng(mix64(spec.seed, 0x517cc1b727220a95ULL));
  rng.shuffle(order);

  const int n = static_cast<int>(docs.size());
  if (n < spec.folds) throw std::invalid_argument("fewer documents than folds");
  std::vector<Split> splits;
  int cursor = 0;
  for (int f = 0; f < spec.folds; ++f) {
    const int fold_size = n / spec.folds + (f < n % spec.folds ? 1 : 0);
    std::vector<int> test_idx(order.begin() + cursor, order.begin() + cursor + fold_size);
    cursor += fold_size;

    std::vector<int> rest;
    for (int i : order)
      if (std::find(test_idx.begin(), test_idx.end(), i) == test_idx.end()) rest.push_back(i);

    Rng dev_rng = rng.fork(static_cast<uint64_t>(f) + 1);
    std::vector<int> rest_shuffled = rest;
    dev_rng.shuffle(rest_shuffled);
    int dev_count = static_cast<int>(std::llround(spec.dev_fraction * rest.size()));
    dev_count = std::max(1, std::min(dev_count, static_cast<int>(rest.size()) - 1));

    Split s;
    for (int i = 0; i < static_cast<int>(rest_shuffled.size()); ++i)
      (i < dev_count ? s.dev : s.train).push_back(docs[rest_shuffled[i]]);
    for (int i : test_idx) s.test.push_back(docs[i]);
    splits.push_back(std::move(s));
  }
  return splits;
}

}  // namespace sectrc
