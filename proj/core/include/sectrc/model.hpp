#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "sectrc/chains.hpp"
#include "sectrc/corpus.hpp"
#include "sectrc/encoder.hpp"
#include "sectrc/linalg.hpp"
#include "sectrc/param.hpp"
#include "sectrc/rng.hpp"

namespace sectrc {

// Two stacked left-to-right GRU layers, input size = hidden size = dim.
// Gate layout inside each fused tensor is [reset; update; candidate].
class GruStack {
 public:
  struct LayerCache {
    Vec x, h_prev;
    Vec r, z, n;
    Vec hh_n;  // recurrent candidate pre-product, needed for the reset grad
  };
  struct StepCache {
    std::vector<LayerCache> layers;
  };

  GruStack(int dim, int num_layers, uint64_t seed);

  int dim() const { return dim_; }
  int num_layers() const { return static_cast<int>(layers_.size()); }

  // Advances hidden[l] in place; returns the new top-layer hidden.
  Vec step(const Vec& x, std::vector<Vec>& hidden, StepCache* cache = nullptr) const;

  // Consumes d_hidden[l] = dLoss/d(new hidden of layer l), accumulates
  // parameter gradients, rewrites d_hidden to the previous step's hiddens
  // and returns dLoss/dx.
  Vec backward_step(const StepCache& cache, std::vector<Vec>& d_hidden);

  std::vector<ParamRef> parameters();

  Vec initial_hidden(const Vec& anchor, int layer, bool layer2_zeros) const;

 private:
  struct Layer {
    Vec w_ih, w_ih_grad;  // 3*dim x dim
    Vec w_hh, w_hh_grad;  // 3*dim x dim
    Vec b_ih, b_ih_grad;  // 3*dim
    Vec b_hh, b_hh_grad;  // 3*dim
  };

  Vec layer_forward(const Layer& l, const Vec& x, const Vec& h_prev, LayerCache* cache) const;

  int dim_;
  std::vector<Layer> layers_;
};

// One classified unit of the chain forward pass: the 2*d feature vector for
// a (source, target) link, plus the routing category.
struct TlinkEmbedding {
  Vec values;
  LinkCategory category = LinkCategory::E2E;
  int step_index = 1;  // 1-based position within the chain
};

struct ClassifierHead {
  LinkCategory category = LinkCategory::E2E;
  int in_dim = 0;
  int n_labels = 0;
  Vec w, w_grad;  // n_labels x in_dim
  Vec b, b_grad;

  ClassifierHead() = default;
  ClassifierHead(LinkCategory category, int in_dim, int n_labels, uint64_t seed);

  // Raw affine scores; throws when the embedding's category is not ours.
  Vec logits(const TlinkEmbedding& t) const;
  // Accumulates w/b gradients and returns dLoss/d(values).
  Vec backward(const TlinkEmbedding& t, const Vec& d_logits);
  std::vector<ParamRef> parameters(const std::string& prefix);
};

// Replayable record of one chain forward pass.
struct SecTape {
  Vec anchor;
  std::string source_id;
  bool layer2_zeros = false;
  std::vector<std::string> target_ids;            // per step
  std::vector<GruStack::StepCache> caches;        // per step
  std::vector<std::vector<char>> from_hidden;     // per step: max picked the GRU side
};

// Chain forward pass. Both GRU layers start from the source anchor (layer 2
// from zeros when layer2_zeros), the running state starts at the anchor, and
// step i emits concat(previous state, target vector) before the GRU advances
// on the target vector; the state is then the element-wise max of the anchor
// and the top-layer hidden. Gold labels are never consulted.
std::vector<TlinkEmbedding> sec_forward(const SectChain& chain,
                                        const std::map<std::string, Vec>& mention_vectors,
                                        const Vec& dct_vector, const GruStack& gru,
                                        bool layer2_zeros = false, SecTape* tape = nullptr);

// Reverse pass for sec_forward. d_embeddings[i] = dLoss/d(step i+1 values).
// Accumulates GRU parameter gradients and returns per-mention input
// gradients (the chain source and the DCT sentinel included).
std::map<std::string, Vec> sec_backward(const SecTape& tape, GruStack& gru,
                                        const std::vector<Vec>& d_embeddings);

// Softmax distribution from the head matching t's category.
Vec classify(const TlinkEmbedding& t, const std::map<LinkCategory, ClassifierHead>& heads);

// Pairwise feature: concat(source, target); no recurrent state involved.
TlinkEmbedding local_forward(const Vec& source_vec, const Vec& target_vec,
                             LinkCategory category);

struct ScoredItem {
  TlinkEmbedding embedding;
  std::string gold;
};

struct LossBreakdown {
  double total = 0.0;
  std::map<LinkCategory, double> per_category;
  std::map<LinkCategory, long> counts;

  void add(const LossBreakdown& other);
};

// Sum over categories of the per-item cross-entropy sums (a per-category
// mean is available behind the flag). Gold labels outside the label set and
// items without a head are errors.
LossBreakdown combined_loss(const std::vector<ScoredItem>& batch,
                            const std::map<LinkCategory, ClassifierHead>& heads,
                            const LabelSet& labels, bool per_category_mean = false);

// Same value; also accumulates head gradients and writes dLoss/d(values)
// for every batch item into d_embeddings.
LossBreakdown combined_loss_backward(const std::vector<ScoredItem>& batch,
                                     std::map<LinkCategory, ClassifierHead>& heads,
                                     const LabelSet& labels, bool per_category_mean,
                                     std::vector<Vec>& d_embeddings);

struct LinkPrediction {
  LinkCategory category = LinkCategory::E2E;
  std::string gold;
  std::string predicted;
  bool derived = false;
};

struct ModelConfig {
  int dim = 64;
  bool layer2_zeros = false;
  bool mean_pool = false;
  double dropout = 0.1;
  bool per_category_mean = false;
  bool include_derived = false;  // derived chain steps join the loss when set
  std::vector<LinkCategory> categories = {LinkCategory::E2D, LinkCategory::E2T,
                                          LinkCategory::E2E};
};

using ChainBatch = std::vector<std::pair<const Document*, const SectChain*>>;
using PairBatch = std::vector<std::pair<const Document*, const TLink*>>;

// Chain model: shared encoder, the GRU stack and one head per category.
class SecModel {
 public:
  SecModel(std::shared_ptr<SentenceEncoder> encoder, LabelSet labels, ModelConfig config,
           uint64_t seed);

  const ModelConfig& config() const { return config_; }
  const LabelSet& label_set() const { return labels_; }
  SentenceEncoder& encoder() { return *encoder_; }
  const SentenceEncoder& encoder() const { return *encoder_; }
  GruStack& gru() { return gru_; }
  std::map<LinkCategory, ClassifierHead>& heads() { return heads_; }
  const std::map<LinkCategory, ClassifierHead>& heads() const { return heads_; }

  std::vector<LinkPrediction> predict_chain(const Document& doc, const SectChain& chain) const;

  // Loss only; no dropout, no gradients.
  LossBreakdown batch_loss(const ChainBatch& batch) const;
  // Accumulates gradients into every parameter; dropout active when a
  // generator is supplied. With dropout_rng == nullptr the returned loss is
  // identical to batch_loss.
  LossBreakdown train_batch(const ChainBatch& batch, Rng* dropout_rng);

  std::vector<ParamRef> parameters();

 private:
  LossBreakdown run_batch(const ChainBatch& batch, Rng* dropout_rng, bool with_grads);

  std::shared_ptr<SentenceEncoder> encoder_;
  LabelSet labels_;
  ModelConfig config_;
  GruStack gru_;
  std::map<LinkCategory, ClassifierHead> heads_;
};

// Pairwise model: one encoder plus per-category heads over concat(src, tgt).
// A single-category instance is the Local baseline; one instance with all
// categories sharing its encoder is the Multi baseline.
class PairModel {
 public:
  PairModel(std::shared_ptr<SentenceEncoder> encoder, LabelSet labels, ModelConfig config,
            uint64_t seed);

  const ModelConfig& config() const { return config_; }
  const LabelSet& label_set() const { return labels_; }
  SentenceEncoder& encoder() { return *encoder_; }
  const SentenceEncoder& encoder() const { return *encoder_; }
  std::map<LinkCategory, ClassifierHead>& heads() { return heads_; }
  const std::map<LinkCategory, ClassifierHead>& heads() const { return heads_; }

  LinkPrediction predict_pair(const Document& doc, const TLink& link) const;

  LossBreakdown batch_loss(const PairBatch& batch) const;
  LossBreakdown train_batch(const PairBatch& batch, Rng* dropout_rng);

  std::vector<ParamRef> parameters();

 private:
  LossBreakdown run_batch(const PairBatch& batch, Rng* dropout_rng, bool with_grads);

  std::shared_ptr<SentenceEncoder> encoder_;
  LabelSet labels_;
  ModelConfig config_;
  std::map<LinkCategory, ClassifierHead> heads_;
};

// Index of the largest value; ties resolve to the lowest index.
int argmax(const Vec& v);

}  // namespace sectrc
