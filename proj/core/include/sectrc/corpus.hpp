#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace sectrc {

enum class MentionKind { Event, Timex, Dct };
enum class LinkCategory { E2D, E2T, E2E, MAT };

// Reserved id of the per-document creation-time sentinel mention.
inline constexpr const char* kDctId = "DCT";

const std::string& to_string(MentionKind k);
const std::string& to_string(LinkCategory c);
MentionKind mention_kind_from_string(const std::string& s);
LinkCategory category_from_string(const std::string& s);

// An event trigger, a time expression, or the DCT sentinel. DCT mentions
// carry no position; exactly one exists per document and it is implicit in
// the serialized form.
struct Mention {
  std::string id;
  MentionKind kind = MentionKind::Event;
  int sent_index = 0;
  int token_start = 0;
  int token_end = 0;  // exclusive

  bool operator==(const Mention&) const = default;
};

// Directed typed temporal link. `source` must name an event mention;
// `target` names a mention or the DCT sentinel.
struct TLink {
  std::string source;
  std::string target;
  LinkCategory category = LinkCategory::E2E;
  std::string relation;

  bool operator==(const TLink&) const = default;
};

// Relation label inventory plus its inverse involution.
struct LabelSet {
  std::string name;
  std::vector<std::string> labels;
  std::map<std::string, std::string> inverse_map;

  bool contains(const std::string& label) const;
  // Index in `labels`, or -1 when absent.
  int index_of(const std::string& label) const;
  const std::string& inverse(const std::string& label) const;
  // Checks non-empty unique labels and that inverse_map is an involution
  // covering every label.
  void validate() const;

  // The 6-relation inventory used by the English dense corpus.
  static LabelSet english_td();
  static LabelSet load(const std::string& path);
  void save(const std::string& path) const;

  bool operator==(const LabelSet&) const = default;
};

struct Document {
  std::string doc_id;
  std::string dct_value;  // informational only
  std::vector<std::vector<std::string>> sentences;
  std::vector<Mention> mentions;  // events and timexes; DCT stays implicit
  std::vector<TLink> tlinks;

  // nullptr when absent. Returns the DCT sentinel for kDctId.
  const Mention* find_mention(const std::string& id) const;

  bool operator==(const Document&) const = default;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(int line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

class ValidationError : public std::runtime_error {
 public:
  ValidationError(const std::string& doc_id, const std::string& field, const std::string& what)
      : std::runtime_error("doc " + doc_id + ", field " + field + ": " + what),
        doc_id_(doc_id),
        field_(field) {}
  const std::string& doc_id() const { return doc_id_; }
  const std::string& field() const { return field_; }

 private:
  std::string doc_id_;
  std::string field_;
};

// Checks all document invariants: spans inside sentences, unique mention
// ids, no user mention with the reserved DCT id, resolvable link endpoints,
// event-typed link sources, category/target-kind consistency and relations
// drawn from the label set. Pure; throws ValidationError on the first
// violation.
void validate_document(const Document& doc, const LabelSet& labels);

// One JSON document per line. Documents are returned in file order and
// every one is validated.
std::vector<Document> load_corpus(const std::string& path, const LabelSet& labels);
void save_corpus(const std::vector<Document>& docs, const std::string& path);

// Canonical single-line serialization (keys sorted, no whitespace).
std::string document_to_json_line(const Document& doc);
Document document_from_json_line(const std::string& line, int line_number);

struct StatsReport {
  long documents = 0;
  long tlinks = 0;
  std::map<LinkCategory, long> per_category;
  long chains = 0;  // distinct (document, source event) pairs with >= 1 link
  double mean_chain_length = 0.0;

  long category_count(LinkCategory c) const;
  // mean_chain_length rounded to one decimal, as displayed.
  double mean_chain_length_display() const;
};

// Exact tallies over the corpus; an empty corpus yields an all-zero report.
StatsReport corpus_stats(const std::vector<Document>& docs);

enum class SplitMode { FixedManifest, CrossValidation };

struct SplitSpec {
  SplitMode mode = SplitMode::CrossValidation;
  int folds = 5;
  double dev_fraction = 0.15;
  uint64_t seed = 0;
  std::string manifest_path;  // FixedManifest mode

  void validate() const;
};

struct Split {
  std::vector<Document> train;
  std::vector<Document> dev;
  std::vector<Document> test;
};

// FixedManifest mode returns one split read from the manifest file
// ({"train":[ids],"dev":[ids],"test":[ids]}); CrossValidation returns
// `folds` splits whose test folds partition the documents, with the dev set
// drawn from each fold's training documents. Document-level and
// deterministic given the seed.
std::vector<Split> split_corpus(const std::vector<Document>& docs, const SplitSpec& spec);

}  // namespace sectrc
