#include "sectrc/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "sectrc/rng.hpp"

namespace sectrc {

Vec sinusoidal_position(int position, int dim) {
  Vec pe(dim);
  for (int i = 0; i < dim; ++i) {
    const int pair = i / 2;
    const double rate = std::pow(10000.0, -2.0 * pair / dim);
    const double angle = position * rate;
    pe[i] = (i % 2 == 0) ? std::sin(angle) : std::cos(angle);
  }
  return pe;
}

ToyEncoder::ToyEncoder(int dim, std::vector<std::string> vocab_tokens, uint64_t seed)
    : dim_(dim), vocab_tokens_(std::move(vocab_tokens)) {
  if (dim < 1) throw std::invalid_argument("encoder dim must be >= 1");
  for (size_t i = 0; i < vocab_tokens_.size(); ++i) {
    if (!vocab_.emplace(vocab_tokens_[i], static_cast<int>(i) + 1).second)
      throw std::invalid_argument("duplicate vocabulary token: " + vocab_tokens_[i]);
  }
  const size_t rows = vocab_tokens_.size() + 1;  // row 0: unknown token
  table_.assign(rows * dim_, 0.0);
  table_grad_.assign(rows * dim_, 0.0);
  w_pos_.assign(static_cast<size_t>(dim_) * dim_, 0.0);
  w_pos_grad_.assign(w_pos_.size(), 0.0);
  dct_.assign(dim_, 0.0);
  dct_grad_.assign(dim_, 0.0);

  const double scale = 1.0 / std::sqrt(static_cast<double>(dim_));
  Rng table_rng(mix64(seed, 1));
  for (double& v : table_) v = scale * table_rng.normal();
  Rng pos_rng(mix64(seed, 2));
  for (double& v : w_pos_) v = scale * pos_rng.normal();
  Rng dct_rng(mix64(seed, 3));
  for (double& v : dct_) v = scale * dct_rng.normal();
}

std::vector<std::string> ToyEncoder::build_vocab(const std::vector<Document>& docs) {
  std::set<std::string> tokens;
  for (const auto& doc : docs)
    for (const auto& sent : doc.sentences) tokens.insert(sent.begin(), sent.end());
  return {tokens.begin(), tokens.end()};
}

int ToyEncoder::vocab_id(const std::string& token) const {
  const auto it = vocab_.find(token);
  return it == vocab_.end() ? 0 : it->second;
}

Vec ToyEncoder::token_vector(const std::vector<std::string>& sentence, int position) const {
  if (position < 0 || position >= static_cast<int>(sentence.size()))
    throw std::out_of_range("token position outside sentence");
  const int row = vocab_id(sentence[position]);
  Vec out(table_.begin() + static_cast<size_t>(row) * dim_,
          table_.begin() + static_cast<size_t>(row + 1) * dim_);
  const Vec pe = sinusoidal_position(position, dim_);
  matvec_acc(w_pos_.data(), dim_, dim_, pe.data(), out.data());
  return out;
}

std::vector<ParamRef> ToyEncoder::parameters() {
  const int rows = static_cast<int>(vocab_tokens_.size()) + 1;
  return {
      {"encoder.table", &table_, &table_grad_, {rows, dim_}, &frozen_},
      {"encoder.w_pos", &w_pos_, &w_pos_grad_, {dim_, dim_}, &frozen_},
      {"encoder.dct", &dct_, &dct_grad_, {dim_}, &frozen_},
  };
}

void ToyEncoder::accumulate_token_grad(const std::vector<std::string>& sentence, int position,
                                       const Vec& d) {
  if (frozen_) return;
  const int row = vocab_id(sentence[position]);
  double* tg = table_grad_.data() + static_cast<size_t>(row) * dim_;
  for (int i = 0; i < dim_; ++i) tg[i] += d[i];
  const Vec pe = sinusoidal_position(position, dim_);
  outer_acc(w_pos_grad_.data(), dim_, dim_, d.data(), pe.data());
}

void ToyEncoder::accumulate_dct_grad(const Vec& d) {
  if (frozen_) return;
  add_inplace(dct_grad_, d);
}

namespace {

const Mention& resolve_span_mention(const Document& doc, const std::string& mention_id) {
  const Mention* m = doc.find_mention(mention_id);
  if (m == nullptr)
    throw std::invalid_argument("unknown mention id: " + mention_id + " in doc " + doc.doc_id);
  if (m->kind == MentionKind::Dct)
    throw std::logic_error("DCT mention reached span pooling");
  return *m;
}

}  // namespace

Vec mention_embedding(const SentenceEncoder& enc, const Document& doc,
                      const std::string& mention_id, Pooling pooling) {
  if (mention_id == kDctId) return enc.dct_embedding();
  const Mention& m = resolve_span_mention(doc, mention_id);
  const auto& sentence = doc.sentences.at(m.sent_index);
  Vec out(enc.dim(), 0.0);
  for (int p = m.token_start; p < m.token_end; ++p) add_inplace(out, enc.token_vector(sentence, p));
  if (pooling == Pooling::Mean) {
    const double inv = 1.0 / (m.token_end - m.token_start);
    for (double& v : out) v *= inv;
  }
  return out;
}

void accumulate_mention_grad(SentenceEncoder& enc, const Document& doc,
                             const std::string& mention_id, const Vec& d, Pooling pooling) {
  if (mention_id == kDctId) {
    enc.accumulate_dct_grad(d);
    return;
  }
  const Mention& m = resolve_span_mention(doc, mention_id);
  const auto& sentence = doc.sentences.at(m.sent_index);
  if (pooling == Pooling::Mean) {
    Vec scaled = d;
    const double inv = 1.0 / (m.token_end - m.token_start);
    for (double& v : scaled) v *= inv;
    for (int p = m.token_start; p < m.token_end; ++p)
      enc.accumulate_token_grad(sentence, p, scaled);
  } else {
    for (int p = m.token_start; p < m.token_end; ++p) enc.accumulate_token_grad(sentence, p, d);
  }
}

}  // namespace sectrc
