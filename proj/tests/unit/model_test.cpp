#include <cmath>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "doctest.h"
#include "sectrc/chains.hpp"
#include "sectrc/corpus.hpp"
#include "sectrc/encoder.hpp"
#include "sectrc/model.hpp"
#include "sectrc/rng.hpp"

using namespace sectrc;

namespace {

// Standalone replay of the recurrence, built only from the public parameter
// tensors. Any drift between this and the production path is a bug in one
// of the two.
struct OracleGru {
  int d = 0;
  // per layer: w_ih, w_hh (3d x d row-major), b_ih, b_hh (3d)
  std::vector<std::map<std::string, Vec>> layers;

  static OracleGru from(GruStack& gru) {
    OracleGru o;
    o.d = gru.dim();
    o.layers.resize(gru.num_layers());
    for (const ParamRef& p : gru.parameters()) {
      // names look like gru.l0.w_ih
      const size_t dot = p.name.find('.', 4);
      const int layer = std::stoi(p.name.substr(5, dot - 5));
      o.layers[layer][p.name.substr(dot + 1)] = *p.value;
    }
    return o;
  }

  // gate g of fused tensor w applied to v, g in {0: reset, 1: update, 2: candidate}
  Vec gate(const Vec& w, const Vec& v, int g) const {
    Vec out(d, 0.0);
    for (int r = 0; r < d; ++r)
      for (int c = 0; c < d; ++c) out[r] += w[(g * d + r) * d + c] * v[c];
    return out;
  }

  Vec cell(int layer, const Vec& x, const Vec& h) const {
    const auto& L = layers[layer];
    const Vec& b_ih = L.at("b_ih");
    const Vec& b_hh = L.at("b_hh");
    const Vec xr = gate(L.at("w_ih"), x, 0), xz = gate(L.at("w_ih"), x, 1),
              xn = gate(L.at("w_ih"), x, 2);
    const Vec hr = gate(L.at("w_hh"), h, 0), hz = gate(L.at("w_hh"), h, 1),
              hn = gate(L.at("w_hh"), h, 2);
    Vec out(d);
    for (int i = 0; i < d; ++i) {
      const double r = 1.0 / (1.0 + std::exp(-(xr[i] + b_ih[i] + hr[i] + b_hh[i])));
      const double z = 1.0 / (1.0 + std::exp(-(xz[i] + b_ih[d + i] + hz[i] + b_hh[d + i])));
      const double n = std::tanh(xn[i] + b_ih[2 * d + i] + r * (hn[i] + b_hh[2 * d + i]));
      out[i] = (1.0 - z) * n + z * h[i];
    }
    return out;
  }

  // Returns the per-step 2d embeddings for the given target sequence.
  std::vector<Vec> run(const Vec& anchor, const std::vector<Vec>& targets,
                       bool layer2_zeros) const {
    std::vector<Vec> hidden(layers.size(), anchor);
    if (layer2_zeros)
      for (size_t l = 1; l < layers.size(); ++l) hidden[l].assign(d, 0.0);
    Vec state = anchor;
    std::vector<Vec> out;
    for (const Vec& x : targets) {
      Vec t = state;
      t.insert(t.end(), x.begin(), x.end());
      out.push_back(std::move(t));
      Vec in = x;
      for (size_t l = 0; l < layers.size(); ++l) {
        hidden[l] = cell(static_cast<int>(l), in, hidden[l]);
        in = hidden[l];
      }
      for (int i = 0; i < d; ++i)
        state[i] = hidden.back()[i] > anchor[i] ? hidden.back()[i] : anchor[i];
    }
    return out;
  }
};

Vec random_vec(int d, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Vec v(d);
  for (double& x : v) x = rng.uniform(lo, hi);
  return v;
}

// Chain over synthetic ids m1..mk with randomly drawn target vectors. The
// first step optionally points at the DCT sentinel.
struct ChainFixture {
  SectChain chain;
  std::map<std::string, Vec> vectors;
  Vec dct;
  std::vector<Vec> target_sequence;  // in step order, DCT resolved
};

ChainFixture make_fixture(int d, int n_steps, Rng& rng, bool first_is_dct) {
  ChainFixture f;
  f.chain.doc_id = "doc";
  f.chain.source = "src";
  f.vectors["src"] = random_vec(d, rng);
  f.dct = random_vec(d, rng);
  for (int i = 0; i < n_steps; ++i) {
    ChainStep step;
    step.derived = false;
    step.link.source = "src";
    step.link.relation = "BEFORE";
    if (i == 0 && first_is_dct) {
      step.link.target = kDctId;
      step.link.category = LinkCategory::E2D;
      f.target_sequence.push_back(f.dct);
    } else {
      const std::string id = "m" + std::to_string(i);
      step.link.target = id;
      step.link.category = i % 2 == 0 ? LinkCategory::E2E : LinkCategory::E2T;
      f.vectors[id] = random_vec(d, rng);
      f.target_sequence.push_back(f.vectors[id]);
    }
    f.chain.steps.push_back(std::move(step));
  }
  return f;
}

bool close_rel(double a, double b, double tol) {
  const double scale = std::max({1.0, std::fabs(a), std::fabs(b)});
  return std::fabs(a - b) <= tol * scale;
}

// Rewrites one fused-tensor segment of a named parameter to a constant.
void fill_param(std::vector<ParamRef>& params, const std::string& name, double value) {
  for (ParamRef& p : params)
    if (p.name == name) {
      std::fill(p.value->begin(), p.value->end(), value);
      return;
    }
  FAIL("no parameter named ", name);
}

ParamRef& find_param(std::vector<ParamRef>& params, const std::string& name) {
  for (ParamRef& p : params)
    if (p.name == name) return p;
  FAIL("no parameter named ", name);
  static ParamRef dummy;
  return dummy;
}

}  // namespace

TEST_SUITE("model") {
  TEST_CASE("recurrence matches an independent replay") {
    Rng rng(2026);
    const int d = 8;
    for (int trial = 0; trial < 25; ++trial) {
      GruStack gru(d, 2, rng.next_u64());
      const OracleGru oracle = OracleGru::from(gru);
      const bool l2z = trial % 3 == 0;
      ChainFixture f = make_fixture(d, 1 + static_cast<int>(rng.below(6)), rng, trial % 2 == 0);

      const auto got = sec_forward(f.chain, f.vectors, f.dct, gru, l2z);
      const auto want = oracle.run(f.vectors["src"], f.target_sequence, l2z);

      REQUIRE(got.size() == want.size());
      for (size_t i = 0; i < got.size(); ++i) {
        REQUIRE(got[i].values.size() == want[i].size());
        for (size_t j = 0; j < want[i].size(); ++j)
          CHECK_MESSAGE(close_rel(got[i].values[j], want[i][j], 1e-12),
                        "trial ", trial, " step ", i, " coord ", j);
      }
    }
  }

  TEST_CASE("first step pairs the untouched anchor with the first target") {
    Rng rng(7);
    const int d = 6;
    GruStack gru(d, 2, 11);
    ChainFixture f = make_fixture(d, 3, rng, true);
    const auto out = sec_forward(f.chain, f.vectors, f.dct, gru);

    const Vec& anchor = f.vectors.at("src");
    REQUIRE(out[0].values.size() == 2 * static_cast<size_t>(d));
    for (int j = 0; j < d; ++j) {
      CHECK(out[0].values[j] == anchor[j]);
      CHECK(out[0].values[d + j] == f.target_sequence[0][j]);
    }
    CHECK(out[0].step_index == 1);
    CHECK(out[0].category == LinkCategory::E2D);
  }

  TEST_CASE("running state never drops below the anchor") {
    Rng rng(31);
    const int d = 5;
    for (int trial = 0; trial < 200; ++trial) {
      GruStack gru(d, 2, rng.next_u64());
      ChainFixture f = make_fixture(d, 4, rng, false);
      const auto out = sec_forward(f.chain, f.vectors, f.dct, gru);
      const Vec& anchor = f.vectors.at("src");
      for (const TlinkEmbedding& t : out)
        for (int j = 0; j < d; ++j) CHECK(t.values[j] >= anchor[j]);
    }
  }

  TEST_CASE("a saturated stack hands every step the bare anchor") {
    // Zero second-layer weights with a large negative candidate bias push the
    // top hidden to exactly -1 while the update gate stays shut; any anchor
    // above -1 then wins the max at every coordinate, so each step reduces to
    // the pairwise feature.
    Rng rng(93);
    const int d = 6;
    GruStack gru(d, 2, 17);
    auto params = gru.parameters();
    fill_param(params, "gru.l1.w_ih", 0.0);
    fill_param(params, "gru.l1.w_hh", 0.0);
    fill_param(params, "gru.l1.b_hh", 0.0);
    ParamRef& b_ih = find_param(params, "gru.l1.b_ih");
    std::fill(b_ih.value->begin(), b_ih.value->end(), 0.0);
    for (int i = 0; i < d; ++i) {
      (*b_ih.value)[d + i] = -50.0;      // update gate -> 0
      (*b_ih.value)[2 * d + i] = -50.0;  // candidate -> tanh(-50) = -1
    }

    for (int trial = 0; trial < 20; ++trial) {
      ChainFixture f = make_fixture(d, 5, rng, trial % 2 == 0);
      for (double& x : f.vectors["src"]) x = std::fabs(x) + 0.25;  // anchor > -1

      const auto out = sec_forward(f.chain, f.vectors, f.dct, gru);
      const Vec& anchor = f.vectors.at("src");
      for (size_t i = 0; i < out.size(); ++i) {
        const TlinkEmbedding pair = local_forward(anchor, f.target_sequence[i],
                                                  f.chain.steps[i].link.category);
        REQUIRE(out[i].values.size() == pair.values.size());
        for (size_t j = 0; j < pair.values.size(); ++j)
          CHECK(out[i].values[j] == pair.values[j]);
      }
    }
  }

  TEST_CASE("earlier steps are blind to later targets") {
    Rng rng(55);
    const int d = 7;
    GruStack gru(d, 2, 23);
    ChainFixture f = make_fixture(d, 5, rng, false);
    const auto base = sec_forward(f.chain, f.vectors, f.dct, gru);

    for (int cut = 1; cut < 5; ++cut) {
      ChainFixture mutated = f;
      for (int j = cut; j < 5; ++j)
        mutated.vectors["m" + std::to_string(j)] = random_vec(d, rng);
      const auto out = sec_forward(mutated.chain, mutated.vectors, mutated.dct, gru);
      for (int i = 0; i < cut; ++i)
        for (size_t j = 0; j < base[i].values.size(); ++j)
          CHECK(out[i].values[j] == base[i].values[j]);
    }
  }

  TEST_CASE("gold relations never reach the forward pass") {
    Rng rng(61);
    const int d = 6;
    GruStack gru(d, 2, 29);
    ChainFixture f = make_fixture(d, 4, rng, true);
    const auto base = sec_forward(f.chain, f.vectors, f.dct, gru);

    SectChain relabeled = f.chain;
    for (ChainStep& step : relabeled.steps) step.link.relation = "AFTER";
    const auto out = sec_forward(relabeled, f.vectors, f.dct, gru);
    REQUIRE(out.size() == base.size());
    for (size_t i = 0; i < base.size(); ++i)
      for (size_t j = 0; j < base[i].values.size(); ++j)
        CHECK(out[i].values[j] == base[i].values[j]);
  }

  TEST_CASE("every step embedding is twice the model width") {
    Rng rng(71);
    for (int d : {3, 8, 16}) {
      GruStack gru(d, 2, rng.next_u64());
      ChainFixture f = make_fixture(d, 3, rng, true);
      const auto out = sec_forward(f.chain, f.vectors, f.dct, gru);
      REQUIRE(out.size() == 3);
      for (size_t i = 0; i < out.size(); ++i) {
        CHECK(out[i].values.size() == 2 * static_cast<size_t>(d));
        CHECK(out[i].step_index == static_cast<int>(i) + 1);
        CHECK(out[i].category == f.chain.steps[i].link.category);
      }
    }
  }

  TEST_CASE("forward rejects unknown mentions and wrong widths") {
    Rng rng(77);
    const int d = 4;
    GruStack gru(d, 2, 5);
    ChainFixture f = make_fixture(d, 2, rng, false);

    ChainFixture missing = f;
    missing.vectors.erase("m1");
    CHECK_THROWS_AS(sec_forward(missing.chain, missing.vectors, missing.dct, gru),
                    std::invalid_argument);

    ChainFixture narrow = f;
    narrow.vectors["m1"] = Vec(d - 1, 0.0);
    CHECK_THROWS_AS(sec_forward(narrow.chain, narrow.vectors, narrow.dct, gru),
                    std::invalid_argument);
  }

  TEST_CASE("pairwise feature is plain concatenation") {
    const TlinkEmbedding t = local_forward({1.0, 2.0}, {3.0, 4.0}, LinkCategory::E2T);
    REQUIRE(t.values.size() == 4);
    CHECK(t.values[0] == 1.0);
    CHECK(t.values[1] == 2.0);
    CHECK(t.values[2] == 3.0);
    CHECK(t.values[3] == 4.0);
    CHECK(t.category == LinkCategory::E2T);
    CHECK(t.step_index == 1);
    CHECK_THROWS_AS(local_forward({1.0, 2.0}, {3.0}, LinkCategory::E2E),
                    std::invalid_argument);
  }

  TEST_CASE("chain step one equals the pairwise feature for the same pair") {
    Rng rng(83);
    const int d = 9;
    GruStack gru(d, 2, 41);
    ChainFixture f = make_fixture(d, 1, rng, false);
    const auto chain_out = sec_forward(f.chain, f.vectors, f.dct, gru);
    const TlinkEmbedding pair =
        local_forward(f.vectors.at("src"), f.target_sequence[0], LinkCategory::E2E);
    for (size_t j = 0; j < pair.values.size(); ++j)
      CHECK(chain_out[0].values[j] == pair.values[j]);
  }

  TEST_CASE("classifier heads") {
    const int in_dim = 4, n_labels = 3;
    ClassifierHead head(LinkCategory::E2T, in_dim, n_labels, 9);
    std::map<LinkCategory, ClassifierHead> heads;
    heads.emplace(LinkCategory::E2T, head);

    TlinkEmbedding t;
    t.values = {0.5, -0.25, 1.0, 0.75};
    t.category = LinkCategory::E2T;

    SUBCASE("zero weights give the uniform distribution") {
      auto& h = heads.at(LinkCategory::E2T);
      std::fill(h.w.begin(), h.w.end(), 0.0);
      std::fill(h.b.begin(), h.b.end(), 0.0);
      const Vec p = classify(t, heads);
      REQUIRE(p.size() == 3);
      for (double v : p) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    }

    SUBCASE("a dominant bias owns the argmax") {
      auto& h = heads.at(LinkCategory::E2T);
      h.b[1] += 500.0;
      const Vec p = classify(t, heads);
      CHECK(argmax(p) == 1);
      CHECK(p[1] == doctest::Approx(1.0).epsilon(1e-12));
    }

    SUBCASE("missing head is an error") {
      t.category = LinkCategory::E2E;
      CHECK_THROWS_AS(classify(t, heads), std::invalid_argument);
    }

    SUBCASE("a head refuses embeddings routed to the wrong category") {
      t.category = LinkCategory::E2E;
      CHECK_THROWS_AS(heads.at(LinkCategory::E2T).logits(t), std::invalid_argument);
    }
  }

  TEST_CASE("argmax breaks ties toward the lower index") {
    CHECK(argmax({0.2, 0.5, 0.5, 0.1}) == 1);
    CHECK(argmax({0.5, 0.5}) == 0);
    CHECK(argmax({1.0}) == 0);
  }

  TEST_CASE("combined loss") {
    const LabelSet labels{"demo", {"BEFORE", "AFTER", "OVERLAP"}, {}};
    const int in_dim = 4;
    std::map<LinkCategory, ClassifierHead> heads;
    for (LinkCategory c : {LinkCategory::E2D, LinkCategory::E2T, LinkCategory::E2E})
      heads.emplace(c, ClassifierHead(c, in_dim, 3, 100 + static_cast<uint64_t>(c)));

    Rng rng(5);
    const auto make_item = [&](LinkCategory c, const std::string& gold) {
      ScoredItem item;
      item.embedding.values = random_vec(in_dim, rng);
      item.embedding.category = c;
      item.gold = gold;
      return item;
    };

    SUBCASE("absent categories report zero loss and zero count") {
      const std::vector<ScoredItem> batch = {make_item(LinkCategory::E2T, "BEFORE"),
                                             make_item(LinkCategory::E2T, "AFTER")};
      const LossBreakdown out = combined_loss(batch, heads, labels);
      CHECK(out.per_category.at(LinkCategory::E2D) == 0.0);
      CHECK(out.per_category.at(LinkCategory::E2E) == 0.0);
      CHECK(out.counts.at(LinkCategory::E2D) == 0);
      CHECK(out.counts.at(LinkCategory::E2T) == 2);
      CHECK(out.total == out.per_category.at(LinkCategory::E2T));
      CHECK(out.total > 0.0);
    }

    SUBCASE("total decomposes into per-category passes") {
      std::vector<ScoredItem> batch;
      for (int i = 0; i < 12; ++i)
        batch.push_back(make_item(static_cast<LinkCategory>(i % 3),
                                  labels.labels[rng.below(3)]));
      const LossBreakdown whole = combined_loss(batch, heads, labels);

      double reassembled = 0.0;
      for (LinkCategory c : {LinkCategory::E2D, LinkCategory::E2T, LinkCategory::E2E}) {
        std::vector<ScoredItem> only;
        for (const ScoredItem& item : batch)
          if (item.embedding.category == c) only.push_back(item);
        const LossBreakdown part = combined_loss(only, heads, labels);
        CHECK(part.per_category.at(c) == whole.per_category.at(c));
        reassembled += part.per_category.at(c);
      }
      CHECK(whole.total == doctest::Approx(reassembled).epsilon(1e-12));
    }

    SUBCASE("a certain correct answer costs nothing") {
      auto& h = heads.at(LinkCategory::E2E);
      std::fill(h.w.begin(), h.w.end(), 0.0);
      std::fill(h.b.begin(), h.b.end(), 0.0);
      h.b[labels.index_of("AFTER")] = 500.0;
      const std::vector<ScoredItem> batch = {make_item(LinkCategory::E2E, "AFTER")};
      const LossBreakdown out = combined_loss(batch, heads, labels);
      CHECK(out.per_category.at(LinkCategory::E2E) == 0.0);
      CHECK(out.total == 0.0);
    }

    SUBCASE("unknown gold label is an error") {
      const std::vector<ScoredItem> batch = {make_item(LinkCategory::E2E, "SIMULTANEOUS")};
      CHECK_THROWS_AS(combined_loss(batch, heads, labels), std::invalid_argument);
    }

    SUBCASE("item without a matching head is an error") {
      const std::vector<ScoredItem> batch = {make_item(LinkCategory::MAT, "BEFORE")};
      CHECK_THROWS_AS(combined_loss(batch, heads, labels), std::invalid_argument);
    }

    SUBCASE("per-category mean divides each component by its count") {
      std::vector<ScoredItem> batch = {make_item(LinkCategory::E2T, "BEFORE"),
                                       make_item(LinkCategory::E2T, "AFTER"),
                                       make_item(LinkCategory::E2E, "OVERLAP")};
      const LossBreakdown sum = combined_loss(batch, heads, labels, false);
      const LossBreakdown mean = combined_loss(batch, heads, labels, true);
      CHECK(mean.per_category.at(LinkCategory::E2T) ==
            doctest::Approx(sum.per_category.at(LinkCategory::E2T) / 2.0).epsilon(1e-12));
      CHECK(mean.per_category.at(LinkCategory::E2E) ==
            doctest::Approx(sum.per_category.at(LinkCategory::E2E)).epsilon(1e-12));
    }

    SUBCASE("backward reports the same value as forward") {
      std::vector<ScoredItem> batch;
      for (int i = 0; i < 6; ++i)
        batch.push_back(make_item(static_cast<LinkCategory>(i % 3),
                                  labels.labels[rng.below(3)]));
      const LossBreakdown fwd = combined_loss(batch, heads, labels);
      std::vector<Vec> d_embeddings;
      const LossBreakdown bwd =
          combined_loss_backward(batch, heads, labels, false, d_embeddings);
      CHECK(bwd.total == fwd.total);
      REQUIRE(d_embeddings.size() == batch.size());
      for (const Vec& g : d_embeddings) {
        REQUIRE(g.size() == static_cast<size_t>(in_dim));
        double norm = 0.0;
        for (double v : g) norm += v * v;
        CHECK(norm > 0.0);
      }
    }

    SUBCASE("breakdowns accumulate") {
      LossBreakdown a;
      a.total = 1.5;
      a.per_category[LinkCategory::E2T] = 1.5;
      a.counts[LinkCategory::E2T] = 2;
      LossBreakdown b;
      b.total = 0.5;
      b.per_category[LinkCategory::E2T] = 0.25;
      b.per_category[LinkCategory::E2E] = 0.25;
      b.counts[LinkCategory::E2T] = 1;
      b.counts[LinkCategory::E2E] = 1;
      a.add(b);
      CHECK(a.total == 2.0);
      CHECK(a.per_category.at(LinkCategory::E2T) == 1.75);
      CHECK(a.per_category.at(LinkCategory::E2E) == 0.25);
      CHECK(a.counts.at(LinkCategory::E2T) == 3);
      CHECK(a.counts.at(LinkCategory::E2E) == 1);
    }
  }
}
