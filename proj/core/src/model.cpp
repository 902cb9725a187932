#include "sectrc/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sectrc {

namespace {

Vec uniform_init(size_t count, double bound, Rng& rng) {
  Vec v(count);
  for (double& x : v) x = rng.uniform(-bound, bound);
  return v;
}

}  // namespace

GruStack::GruStack(int dim, int num_layers, uint64_t seed) : dim_(dim) {
  if (dim < 1) throw std::invalid_argument("gru dim must be >= 1");
  if (num_layers < 1) throw std::invalid_argument("gru needs at least one layer");
  const double bound = 1.0 / std::sqrt(static_cast<double>(dim));
  const size_t mat = static_cast<size_t>(3) * dim * dim;
  const size_t vec = static_cast<size_t>(3) * dim;
  layers_.resize(num_layers);
  for (int l = 0; l < num_layers; ++l) {
    Rng rng(mix64(seed, static_cast<uint64_t>(l) + 1));
    Layer& layer = layers_[l];
    layer.w_ih = uniform_init(mat, bound, rng);
    layer.w_hh = uniform_init(mat, bound, rng);
    layer.b_ih = uniform_init(vec, bound, rng);
    layer.b_hh = uniform_init(vec, bound, rng);
    layer.w_ih_grad.assign(mat, 0.0);
    layer.w_hh_grad.assign(mat, 0.0);
    layer.b_ih_grad.assign(vec, 0.0);
    layer.b_hh_grad.assign(vec, 0.0);
  }
}

Vec GruStack::layer_forward(const Layer& l, const Vec& x, const Vec& h_prev,
                            LayerCache* cache) const {
  const int d = dim_;
  Vec gi = l.b_ih;
  matvec_acc(l.w_ih.data(), 3 * d, d, x.data(), gi.data());
  Vec gh = l.b_hh;
  matvec_acc(l.w_hh.data(), 3 * d, d, h_prev.data(), gh.data());

  Vec r(d), z(d), n(d), hh_n(d), h_new(d);
  for (int i = 0; i < d; ++i) {
    r[i] = sigmoid(gi[i] + gh[i]);
    z[i] = sigmoid(gi[d + i] + gh[d + i]);
    hh_n[i] = gh[2 * d + i];
    n[i] = std::tanh(gi[2 * d + i] + r[i] * hh_n[i]);
    h_new[i] = (1.0 - z[i]) * n[i] + z[i] * h_prev[i];
  }
  if (cache != nullptr) {
    cache->x = x;
    cache->h_prev = h_prev;
    cache->r = std::move(r);
    cache->z = std::move(z);
    cache->n = std::move(n);
    cache->hh_n = std::move(hh_n);
  }
  return h_new;
}

Vec GruStack::step(const Vec& x, std::vector<Vec>& hidden, StepCache* cache) const {
  if (static_cast<int>(hidden.size()) != num_layers())
    throw std::invalid_argument("hidden state count != layer count");
  if (static_cast<int>(x.size()) != dim_) throw std::invalid_argument("gru input dim mismatch");
  if (cache != nullptr) cache->layers.resize(layers_.size());
  const Vec* input = &x;
  for (size_t l = 0; l < layers_.size(); ++l) {
    hidden[l] = layer_forward(layers_[l], *input, hidden[l],
                              cache != nullptr ? &cache->layers[l] : nullptr);
    input = &hidden[l];
  }
  return hidden.back();
}

Vec GruStack::backward_step(const StepCache& cache, std::vector<Vec>& d_hidden) {
  const int d = dim_;
  Vec dx_out;
  for (int l = num_layers() - 1; l >= 0; --l) {
    const LayerCache& c = cache.layers[l];
    Layer& layer = layers_[l];
    const Vec dh_new = d_hidden[l];

    Vec da_r(d), da_z(d), da_n(d), dhh(d), dh_prev(d);
    for (int i = 0; i < d; ++i) {
      const double dn = dh_new[i] * (1.0 - c.z[i]);
      const double dz = dh_new[i] * (c.h_prev[i] - c.n[i]);
      dh_prev[i] = dh_new[i] * c.z[i];
      da_n[i] = dn * (1.0 - c.n[i] * c.n[i]);
      const double dr = da_n[i] * c.hh_n[i];
      dhh[i] = da_n[i] * c.r[i];
      da_r[i] = dr * c.r[i] * (1.0 - c.r[i]);
      da_z[i] = dz * c.z[i] * (1.0 - c.z[i]);
    }

    const size_t mat = static_cast<size_t>(d) * d;
    outer_acc(layer.w_ih_grad.data(), d, d, da_r.data(), c.x.data());
    outer_acc(layer.w_ih_grad.data() + mat, d, d, da_z.data(), c.x.data());
    outer_acc(layer.w_ih_grad.data() + 2 * mat, d, d, da_n.data(), c.x.data());
    outer_acc(layer.w_hh_grad.data(), d, d, da_r.data(), c.h_prev.data());
    outer_acc(layer.w_hh_grad.data() + mat, d, d, da_z.data(), c.h_prev.data());
    outer_acc(layer.w_hh_grad.data() + 2 * mat, d, d, dhh.data(), c.h_prev.data());
    for (int i = 0; i < d; ++i) {
      layer.b_ih_grad[i] += da_r[i];
      layer.b_ih_grad[d + i] += da_z[i];
      layer.b_ih_grad[2 * d + i] += da_n[i];
      layer.b_hh_grad[i] += da_r[i];
      layer.b_hh_grad[d + i] += da_z[i];
      layer.b_hh_grad[2 * d + i] += dhh[i];
    }

    Vec dx(d, 0.0);
    matvec_t_acc(layer.w_ih.data(), d, d, da_r.data(), dx.data());
    matvec_t_acc(layer.w_ih.data() + mat, d, d, da_z.data(), dx.data());
    matvec_t_acc(layer.w_ih.data() + 2 * mat, d, d, da_n.data(), dx.data());
    matvec_t_acc(layer.w_hh.data(), d, d, da_r.data(), dh_prev.data());
    matvec_t_acc(layer.w_hh.data() + mat, d, d, da_z.data(), dh_prev.data());
    matvec_t_acc(layer.w_hh.data() + 2 * mat, d, d, dhh.data(), dh_prev.data());

    d_hidden[l] = std::move(dh_prev);
    if (l > 0)
      add_inplace(d_hidden[l - 1], dx);
    else
      dx_out = std::move(dx);
  }
  return dx_out;
}

std::vector<ParamRef> GruStack::parameters() {
  std::vector<ParamRef> out;
  for (size_t l = 0; l < layers_.size(); ++l) {
    const std::string prefix = "gru.l" + std::to_string(l) + ".";
    Layer& layer = layers_[l];
    out.push_back({prefix + "w_ih", &layer.w_ih, &layer.w_ih_grad, {3 * dim_, dim_}, nullptr});
    out.push_back({prefix + "w_hh", &layer.w_hh, &layer.w_hh_grad, {3 * dim_, dim_}, nullptr});
    out.push_back({prefix + "b_ih", &layer.b_ih, &layer.b_ih_grad, {3 * dim_}, nullptr});
    out.push_back({prefix + "b_hh", &layer.b_hh, &layer.b_hh_grad, {3 * dim_}, nullptr});
  }
  return out;
}

Vec GruStack::initial_hidden(const Vec& anchor, int layer, bool layer2_zeros) const {
  if (static_cast<int>(anchor.size()) != dim_)
    throw std::invalid_argument("anchor dim mismatch");
  if (layer > 0 && layer2_zeros) return Vec(dim_, 0.0);
  return anchor;
}

ClassifierHead::ClassifierHead(LinkCategory category, int in_dim, int n_labels, uint64_t seed)
    : category(category), in_dim(in_dim), n_labels(n_labels) {
  if (in_dim < 1 || n_labels < 1) throw std::invalid_argument("bad head dimensions");
  Rng rng(seed);
  const double bound = 1.0 / std::sqrt(static_cast<double>(in_dim));
  w = uniform_init(static_cast<size_t>(n_labels) * in_dim, bound, rng);
  w_grad.assign(w.size(), 0.0);
  b.assign(n_labels, 0.0);
  b_grad.assign(n_labels, 0.0);
}

Vec ClassifierHead::logits(const TlinkEmbedding& t) const {
  if (t.category != category)
    throw std::invalid_argument("embedding category " + to_string(t.category) +
                                " scored by " + to_string(category) + " head");
  if (static_cast<int>(t.values.size()) != in_dim)
    throw std::invalid_argument("embedding dimension != head input dimension");
  Vec out = b;
  matvec_acc(w.data(), n_labels, in_dim, t.values.data(), out.data());
  return out;
}

Vec ClassifierHead::backward(const TlinkEmbedding& t, const Vec& d_logits) {
  outer_acc(w_grad.data(), n_labels, in_dim, d_logits.data(), t.values.data());
  add_inplace(b_grad, d_logits);
  Vec dx(in_dim, 0.0);
  matvec_t_acc(w.data(), n_labels, in_dim, d_logits.data(), dx.data());
  return dx;
}

std::vector<ParamRef> ClassifierHead::parameters(const std::string& prefix) {
  return {
      {prefix + ".w", &w, &w_grad, {n_labels, in_dim}, nullptr},
      {prefix + ".b", &b, &b_grad, {n_labels}, nullptr},
  };
}

std::vector<TlinkEmbedding> sec_forward(const SectChain& chain,
                                        const std::map<std::string, Vec>& mention_vectors,
                                        const Vec& dct_vector, const GruStack& gru,
                                        bool layer2_zeros, SecTape* tape) {
  const int d = gru.dim();
  const auto vec_of = [&](const std::string& id) -> const Vec& {
    const Vec& v = [&]() -> const Vec& {
      if (id == kDctId) return dct_vector;
      const auto it = mention_vectors.find(id);
      if (it == mention_vectors.end())
        throw std::invalid_argument("no vector for mention " + id);
      return it->second;
    }();
    if (static_cast<int>(v.size()) != d)
      throw std::invalid_argument("vector for " + id + " has wrong dimension");
    return v;
  };

  const Vec& anchor = vec_of(chain.source);
  std::vector<Vec> hidden(gru.num_layers());
  for (int l = 0; l < gru.num_layers(); ++l)
    hidden[l] = gru.initial_hidden(anchor, l, layer2_zeros);
  if (tape != nullptr) {
    tape->anchor = anchor;
    tape->source_id = chain.source;
    tape->layer2_zeros = layer2_zeros;
    tape->target_ids.clear();
    tape->caches.clear();
    tape->from_hidden.clear();
  }

  std::vector<TlinkEmbedding> out;
  out.reserve(chain.steps.size());
  Vec state = anchor;  // R^0
  int step_index = 0;
  for (const ChainStep& step : chain.steps) {
    ++step_index;
    const Vec& x = vec_of(step.link.target);
    TlinkEmbedding t;
    t.values = concat(state, x);
    t.category = step.link.category;
    t.step_index = step_index;
    out.push_back(std::move(t));

    GruStack::StepCache cache;
    const Vec h_top = gru.step(x, hidden, tape != nullptr ? &cache : nullptr);
    std::vector<char> from_h(d, 0);
    for (int i = 0; i < d; ++i) {
      if (h_top[i] > anchor[i]) {
        state[i] = h_top[i];
        from_h[i] = 1;
      } else {
        state[i] = anchor[i];
      }
    }
    if (tape != nullptr) {
      tape->target_ids.push_back(step.link.target);
      tape->caches.push_back(std::move(cache));
      tape->from_hidden.push_back(std::move(from_h));
    }
  }
  return out;
}

std::map<std::string, Vec> sec_backward(const SecTape& tape, GruStack& gru,
                                        const std::vector<Vec>& d_embeddings) {
  const int d = gru.dim();
  const int n = static_cast<int>(tape.caches.size());
  if (static_cast<int>(d_embeddings.size()) != n)
    throw std::invalid_argument("gradient count != step count");

  std::map<std::string, Vec> grads;
  const auto acc = [&](const std::string& id, const double* src) {
    Vec& g = grads[id];
    if (g.empty()) g.assign(d, 0.0);
    for (int i = 0; i < d; ++i) g[i] += src[i];
  };

  Vec d_anchor(d, 0.0);
  std::vector<Vec> d_hidden(gru.num_layers(), Vec(d, 0.0));
  for (int i = n - 1; i >= 0; --i) {
    const Vec& dt = d_embeddings[i];
    if (static_cast<int>(dt.size()) != 2 * d)
      throw std::invalid_argument("step gradient has wrong dimension");

    Vec d_x(dt.begin() + d, dt.end());
    const Vec dx_gru = gru.backward_step(tape.caches[i], d_hidden);
    add_inplace(d_x, dx_gru);
    acc(tape.target_ids[i], d_x.data());

    // First half of dt is the gradient w.r.t. the pre-step running state:
    // the anchor itself at step 1, a max output otherwise.
    if (i == 0) {
      for (int j = 0; j < d; ++j) d_anchor[j] += dt[j];
    } else {
      const auto& mask = tape.from_hidden[i - 1];
      Vec& top = d_hidden[gru.num_layers() - 1];
      for (int j = 0; j < d; ++j) {
        if (mask[j])
          top[j] += dt[j];
        else
          d_anchor[j] += dt[j];
      }
    }
  }

  add_inplace(d_anchor, d_hidden[0]);
  if (!tape.layer2_zeros)
    for (int l = 1; l < gru.num_layers(); ++l) add_inplace(d_anchor, d_hidden[l]);
  acc(tape.source_id, d_anchor.data());
  return grads;
}

Vec classify(const TlinkEmbedding& t, const std::map<LinkCategory, ClassifierHead>& heads) {
  const auto it = heads.find(t.category);
  if (it == heads.end())
    throw std::invalid_argument("no head for category " + to_string(t.category));
  Vec p = it->second.logits(t);
  softmax_inplace(p);
  return p;
}

TlinkEmbedding local_forward(const Vec& source_vec, const Vec& target_vec,
                             LinkCategory category) {
  if (source_vec.size() != target_vec.size())
    throw std::invalid_argument("source/target dimension mismatch");
  TlinkEmbedding t;
  t.values = concat(source_vec, target_vec);
  t.category = category;
  t.step_index = 1;
  return t;
}

void LossBreakdown::add(const LossBreakdown& other) {
  total += other.total;
  for (const auto& [c, v] : other.per_category) per_category[c] += v;
  for (const auto& [c, v] : other.counts) counts[c] += v;
}

namespace {

LossBreakdown loss_core(const std::vector<ScoredItem>& batch,
                        const std::map<LinkCategory, ClassifierHead>& heads,
                        const LabelSet& labels, bool per_category_mean,
                        std::map<LinkCategory, ClassifierHead>* mutable_heads,
                        std::vector<Vec>* d_embeddings) {
  LossBreakdown out;
  for (const auto& [category, head] : heads) {
    out.per_category[category] = 0.0;
    out.counts[category] = 0;
  }
  for (const ScoredItem& item : batch) {
    const auto it = out.counts.find(item.embedding.category);
    if (it == out.counts.end())
      throw std::invalid_argument("no head for category " + to_string(item.embedding.category));
    ++it->second;
  }
  if (d_embeddings != nullptr) d_embeddings->assign(batch.size(), Vec());

  for (size_t i = 0; i < batch.size(); ++i) {
    const ScoredItem& item = batch[i];
    const LinkCategory category = item.embedding.category;
    const int gold = labels.index_of(item.gold);
    if (gold < 0) throw std::invalid_argument("gold label outside label set: " + item.gold);

    Vec p = heads.at(category).logits(item.embedding);
    softmax_inplace(p);
    const double scale =
        per_category_mean ? 1.0 / static_cast<double>(out.counts.at(category)) : 1.0;
    out.per_category[category] += scale * -std::log(p[gold]);

    if (mutable_heads != nullptr) {
      Vec d_logits = std::move(p);
      d_logits[gold] -= 1.0;
      for (double& v : d_logits) v *= scale;
      (*d_embeddings)[i] = mutable_heads->at(category).backward(item.embedding, d_logits);
    }
  }
  for (const auto& [category, value] : out.per_category) out.total += value;
  return out;
}

}  // namespace

LossBreakdown combined_loss(const std::vector<ScoredItem>& batch,
                            const std::map<LinkCategory, ClassifierHead>& heads,
                            const LabelSet& labels, bool per_category_mean) {
  return loss_core(batch, heads, labels, per_category_mean, nullptr, nullptr);
}

LossBreakdown combined_loss_backward(const std::vector<ScoredItem>& batch,
                                     std::map<LinkCategory, ClassifierHead>& heads,
                                     const LabelSet& labels, bool per_category_mean,
                                     std::vector<Vec>& d_embeddings) {
  return loss_core(batch, heads, labels, per_category_mean, &heads, &d_embeddings);
}

int argmax(const Vec& v) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(v.size()); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

namespace {

std::map<LinkCategory, ClassifierHead> make_heads(const std::vector<LinkCategory>& categories,
                                                  int in_dim, int n_labels, uint64_t seed) {
  std::map<LinkCategory, ClassifierHead> heads;
  for (LinkCategory c : categories)
    heads.emplace(c, ClassifierHead(c, in_dim, n_labels,
                                    mix64(seed, 100 + static_cast<uint64_t>(c))));
  return heads;
}

// Inverted-dropout mask: zero with probability p, 1/(1-p) otherwise.
Vec dropout_mask(int n, double p, Rng& rng) {
  Vec mask(n);
  const double keep = 1.0 / (1.0 - p);
  for (double& m : mask) m = rng.uniform01() < p ? 0.0 : keep;
  return mask;
}

}  // namespace

SecModel::SecModel(std::shared_ptr<SentenceEncoder> encoder, LabelSet labels, ModelConfig config,
                   uint64_t seed)
    : encoder_(std::move(encoder)),
      labels_(std::move(labels)),
      config_(std::move(config)),
      gru_(config_.dim, 2, mix64(seed, 7)),
      heads_(make_heads(config_.categories, 2 * config_.dim,
                        static_cast<int>(labels_.labels.size()), seed)) {
  if (encoder_->dim() != config_.dim)
    throw std::invalid_argument("encoder dim != model dim");
  labels_.validate();
}

std::vector<LinkPrediction> SecModel::predict_chain(const Document& doc,
                                                    const SectChain& chain) const {
  std::map<std::string, Vec> vectors;
  const Pooling pooling = config_.mean_pool ? Pooling::Mean : Pooling::Sum;
  vectors[chain.source] = mention_embedding(*encoder_, doc, chain.source, pooling);
  for (const ChainStep& step : chain.steps)
    if (step.link.target != kDctId && !vectors.count(step.link.target))
      vectors[step.link.target] = mention_embedding(*encoder_, doc, step.link.target, pooling);

  const auto embeddings =
      sec_forward(chain, vectors, encoder_->dct_embedding(), gru_, config_.layer2_zeros);
  std::vector<LinkPrediction> out;
  out.reserve(embeddings.size());
  for (size_t i = 0; i < embeddings.size(); ++i) {
    const Vec p = classify(embeddings[i], heads_);
    LinkPrediction pred;
    pred.category = chain.steps[i].link.category;
    pred.gold = chain.steps[i].link.relation;
    pred.predicted = labels_.labels[argmax(p)];
    pred.derived = chain.steps[i].derived;
    out.push_back(std::move(pred));
  }
  return out;
}

LossBreakdown SecModel::batch_loss(const ChainBatch& batch) const {
  return const_cast<SecModel*>(this)->run_batch(batch, nullptr, false);
}

LossBreakdown SecModel::train_batch(const ChainBatch& batch, Rng* dropout_rng) {
  return run_batch(batch, dropout_rng, true);
}

LossBreakdown SecModel::run_batch(const ChainBatch& batch, Rng* dropout_rng, bool with_grads) {
  const Pooling pooling = config_.mean_pool ? Pooling::Mean : Pooling::Sum;
  const int d = config_.dim;
  const bool use_dropout = dropout_rng != nullptr && config_.dropout > 0.0;

  struct ChainState {
    std::map<std::string, Vec> vectors;
    std::vector<TlinkEmbedding> embeddings;
    SecTape tape;
  };
  std::vector<ChainState> states(batch.size());
  std::vector<ScoredItem> items;
  // (chain index, step index, dropout mask index or -1) per item
  struct Locator {
    size_t chain, step;
    int mask = -1;
  };
  std::vector<Locator> locators;
  std::vector<Vec> masks;

  for (size_t ci = 0; ci < batch.size(); ++ci) {
    const Document& doc = *batch[ci].first;
    const SectChain& chain = *batch[ci].second;
    ChainState& st = states[ci];
    st.vectors[chain.source] = mention_embedding(*encoder_, doc, chain.source, pooling);
    for (const ChainStep& step : chain.steps)
      if (step.link.target != kDctId && !st.vectors.count(step.link.target))
        st.vectors[step.link.target] =
            mention_embedding(*encoder_, doc, step.link.target, pooling);
    st.embeddings = sec_forward(chain, st.vectors, encoder_->dct_embedding(), gru_,
                                config_.layer2_zeros, with_grads ? &st.tape : nullptr);

    for (size_t si = 0; si < chain.steps.size(); ++si) {
      if (chain.steps[si].derived && !config_.include_derived) continue;
      ScoredItem item;
      item.embedding = st.embeddings[si];
      item.gold = chain.steps[si].link.relation;
      Locator loc{ci, si, -1};
      if (use_dropout) {
        loc.mask = static_cast<int>(masks.size());
        masks.push_back(dropout_mask(2 * d, config_.dropout, *dropout_rng));
        for (int j = 0; j < 2 * d; ++j) item.embedding.values[j] *= masks[loc.mask][j];
      }
      items.push_back(std::move(item));
      locators.push_back(loc);
    }
  }

  if (!with_grads) return combined_loss(items, heads_, labels_, config_.per_category_mean);

  std::vector<Vec> d_items;
  const LossBreakdown loss =
      combined_loss_backward(items, heads_, labels_, config_.per_category_mean, d_items);

  for (size_t ci = 0; ci < batch.size(); ++ci) {
    const size_t n_steps = states[ci].embeddings.size();
    std::vector<Vec> d_steps(n_steps, Vec(2 * d, 0.0));
    for (size_t ii = 0; ii < locators.size(); ++ii) {
      if (locators[ii].chain != ci) continue;
      Vec g = d_items[ii];
      if (locators[ii].mask >= 0)
        for (int j = 0; j < 2 * d; ++j) g[j] *= masks[locators[ii].mask][j];
      add_inplace(d_steps[locators[ii].step], g);
    }
    const auto mention_grads = sec_backward(states[ci].tape, gru_, d_steps);
    const Document& doc = *batch[ci].first;
    for (const auto& [id, g] : mention_grads)
      accumulate_mention_grad(*encoder_, doc, id, g, pooling);
  }
  return loss;
}

std::vector<ParamRef> SecModel::parameters() {
  std::vector<ParamRef> out = encoder_->parameters();
  for (ParamRef& p : gru_.parameters()) out.push_back(std::move(p));
  for (auto& [category, head] : heads_)
    for (ParamRef& p : head.parameters("head." + to_string(category)))
      out.push_back(std::move(p));
  return out;
}

PairModel::PairModel(std::shared_ptr<SentenceEncoder> encoder, LabelSet labels,
                     ModelConfig config, uint64_t seed)
    : encoder_(std::move(encoder)),
      labels_(std::move(labels)),
      config_(std::move(config)),
      heads_(make_heads(config_.categories, 2 * config_.dim,
                        static_cast<int>(labels_.labels.size()), seed)) {
  if (encoder_->dim() != config_.dim)
    throw std::invalid_argument("encoder dim != model dim");
  labels_.validate();
}

LinkPrediction PairModel::predict_pair(const Document& doc, const TLink& link) const {
  const Pooling pooling = config_.mean_pool ? Pooling::Mean : Pooling::Sum;
  const Vec src = mention_embedding(*encoder_, doc, link.source, pooling);
  const Vec tgt = mention_embedding(*encoder_, doc, link.target, pooling);
  const Vec p = classify(local_forward(src, tgt, link.category), heads_);
  LinkPrediction pred;
  pred.category = link.category;
  pred.gold = link.relation;
  pred.predicted = labels_.labels[argmax(p)];
  return pred;
}

LossBreakdown PairModel::batch_loss(const PairBatch& batch) const {
  return const_cast<PairModel*>(this)->run_batch(batch, nullptr, false);
}

LossBreakdown PairModel::train_batch(const PairBatch& batch, Rng* dropout_rng) {
  return run_batch(batch, dropout_rng, true);
}

LossBreakdown PairModel::run_batch(const PairBatch& batch, Rng* dropout_rng, bool with_grads) {
  const Pooling pooling = config_.mean_pool ? Pooling::Mean : Pooling::Sum;
  const int d = config_.dim;
  const bool use_dropout = dropout_rng != nullptr && config_.dropout > 0.0;

  std::vector<ScoredItem> items;
  std::vector<Vec> masks;
  items.reserve(batch.size());
  for (const auto& [doc, link] : batch) {
    const Vec src = mention_embedding(*encoder_, *doc, link->source, pooling);
    const Vec tgt = mention_embedding(*encoder_, *doc, link->target, pooling);
    ScoredItem item;
    item.embedding = local_forward(src, tgt, link->category);
    item.gold = link->relation;
    if (use_dropout) {
      masks.push_back(dropout_mask(2 * d, config_.dropout, *dropout_rng));
      for (int j = 0; j < 2 * d; ++j) item.embedding.values[j] *= masks.back()[j];
    }
    items.push_back(std::move(item));
  }

  if (!with_grads) return combined_loss(items, heads_, labels_, config_.per_category_mean);

  std::vector<Vec> d_items;
  const LossBreakdown loss =
      combined_loss_backward(items, heads_, labels_, config_.per_category_mean, d_items);
  for (size_t i = 0; i < batch.size(); ++i) {
    Vec g = d_items[i];
    if (use_dropout)
      for (int j = 0; j < 2 * d; ++j) g[j] *= masks[i][j];
    const Document& doc = *batch[i].first;
    const TLink& link = *batch[i].second;
    const Vec d_src(g.begin(), g.begin() + d);
    const Vec d_tgt(g.begin() + d, g.end());
    accumulate_mention_grad(*encoder_, doc, link.source, d_src, pooling);
    accumulate_mention_grad(*encoder_, doc, link.target, d_tgt, pooling);
  }
  return loss;
}

std::vector<ParamRef> PairModel::parameters() {
  std::vector<ParamRef> out = encoder_->parameters();
  for (auto& [category, head] : heads_)
    for (ParamRef& p : head.parameters("head." + to_string(category)))
      out.push_back(std::move(p));
  return out;
}

}  // namespace sectrc
