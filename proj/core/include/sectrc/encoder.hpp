#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "sectrc/corpus.hpp"
#include "sectrc/linalg.hpp"
#include "sectrc/param.hpp"

namespace sectrc {

// Seam between the relation model and whatever produces token vectors.
// Implementations own the document-creation-time embedding and may be
// frozen, after which gradient accumulation becomes a no-op.
class SentenceEncoder {
 public:
  virtual ~SentenceEncoder() = default;

  virtual int dim() const = 0;

  // Vector for the token at `position` within `sentence`.
  virtual Vec token_vector(const std::vector<std::string>& sentence, int position) const = 0;

  // Trainable vector standing in for the document creation time.
  virtual Vec dct_embedding() const = 0;

  virtual std::vector<ParamRef> parameters() = 0;

  virtual void set_frozen(bool frozen) { frozen_ = frozen; }
  bool frozen() const { return frozen_; }

  // Gradient hooks; defaults discard, so read-only encoders need not care.
  virtual void accumulate_token_grad(const std::vector<std::string>& sentence, int position,
                                     const Vec& d) {
    (void)sentence;
    (void)position;
    (void)d;
  }
  virtual void accumulate_dct_grad(const Vec& d) { (void)d; }

 protected:
  bool frozen_ = false;
};

// Deterministic sinusoidal position encoding of length `dim`.
Vec sinusoidal_position(int position, int dim);

// Lookup-table encoder: token vector = embedding[token] + W_pos * pe(position).
// Row 0 of the table is the unknown-token row; the position projection and
// the DCT vector are trainable alongside the table.
class ToyEncoder : public SentenceEncoder {
 public:
  ToyEncoder(int dim, std::vector<std::string> vocab_tokens, uint64_t seed);

  static std::vector<std::string> build_vocab(const std::vector<Document>& docs);

  int dim() const override { return dim_; }
  Vec token_vector(const std::vector<std::string>& sentence, int position) const override;
  Vec dct_embedding() const override { return dct_; }
  std::vector<ParamRef> parameters() override;

  void accumulate_token_grad(const std::vector<std::string>& sentence, int position,
                             const Vec& d) override;
  void accumulate_dct_grad(const Vec& d) override;

  // 0 for unknown tokens, 1-based row otherwise.
  int vocab_id(const std::string& token) const;
  const std::vector<std::string>& vocab_tokens() const { return vocab_tokens_; }

 private:
  int dim_;
  std::vector<std::string> vocab_tokens_;
  std::unordered_map<std::string, int> vocab_;
  Vec table_, table_grad_;    // (vocab+1) x dim, row-major
  Vec w_pos_, w_pos_grad_;    // dim x dim
  Vec dct_, dct_grad_;        // dim
};

enum class Pooling { Sum, Mean };

// Element-wise pool of the token vectors across a mention span. The DCT
// sentinel id resolves to the encoder's DCT vector.
Vec mention_embedding(const SentenceEncoder& enc, const Document& doc,
                      const std::string& mention_id, Pooling pooling = Pooling::Sum);

void accumulate_mention_grad(SentenceEncoder& enc, const Document& doc,
                             const std::string& mention_id, const Vec& d,
                             Pooling pooling = Pooling::Sum);

}  // namespace sectrc
