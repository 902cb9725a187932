#include <benchmark/benchmark.h>

#include "sectrc/chains.hpp"
#include "sectrc/model.hpp"
#include "sectrc/rng.hpp"
#include "sectrc/synthetic.hpp"
#include "sectrc/training.hpp"

namespace {

using namespace sectrc;

struct Setup {
  std::vector<Document> docs;
  LabelSet labels = LabelSet::english_td();
  TrainConfig cfg;
  SecModel model;
  std::vector<std::vector<SectChain>> chains;
  ChainBatch batch;

  explicit Setup(int dim) : docs(make_docs()), cfg(make_cfg(dim)), model(make_sec_model(docs, labels, cfg, 1)) {
    chains.reserve(docs.size());
    for (const auto& doc : docs) chains.push_back(build_sect_chains(doc, false, labels));
    for (size_t i = 0; i < docs.size(); ++i)
      for (const auto& chain : chains[i]) batch.push_back({&docs[i], &chain});
  }

  static std::vector<Document> make_docs() {
    SynthSpec spec;
    spec.n_docs = 8;
    spec.events_per_doc = 8;
    spec.timex_per_doc = 4;
    spec.seed = 11;
    return generate_synthetic_corpus(spec);
  }

  static TrainConfig make_cfg(int dim) {
    TrainConfig cfg;
    cfg.dim = dim;
    return cfg;
  }
};

void BM_ChainBatchLoss(benchmark::State& state) {
  Setup setup(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    auto loss = setup.model.batch_loss(setup.batch);
    benchmark::DoNotOptimize(loss.total);
  }
}

void BM_ChainBatchTrainStep(benchmark::State& state) {
  Setup setup(static_cast<int>(state.range(0)));
  Rng dropout(99);
  for (auto _ : state) {
    auto loss = setup.model.train_batch(setup.batch, &dropout);
    benchmark::DoNotOptimize(loss.total);
  }
}

}  // namespace

BENCHMARK(BM_ChainBatchLoss)->Arg(32)->Arg(64);
BENCHMARK(BM_ChainBatchTrainStep)->Arg(32)->Arg(64);

BENCHMARK_MAIN();
