#include <benchmark/benchmark.h>

#include "sectrc/chains.hpp"
#include "sectrc/synthetic.hpp"

namespace {

std::vector<sectrc::Document> make_corpus(int docs) {
  sectrc::SynthSpec spec;
  spec.n_docs = docs;
  spec.events_per_doc = 8;
  spec.timex_per_doc = 4;
  spec.seed = 7;
  return sectrc::generate_synthetic_corpus(spec);
}

void BM_BuildChains(benchmark::State& state) {
  auto docs = make_corpus(static_cast<int>(state.range(0)));
  auto labels = sectrc::LabelSet::english_td();
  bool invert = state.range(1) != 0;
  for (auto _ : state) {
    long steps = 0;
    for (const auto& doc : docs)
      for (const auto& chain : sectrc::build_sect_chains(doc, invert, labels))
        steps += static_cast<long>(chain.steps.size());
    benchmark::DoNotOptimize(steps);
  }
}

}  // namespace

BENCHMARK(BM_BuildChains)->Args({64, 0})->Args({64, 1})->Args({256, 0});

BENCHMARK_MAIN();
