#include <benchmark/benchmark.h>

#include "neurocat/bottomup.hpp"
#include "neurocat/interleaving.hpp"
#include "neurocat/partition_source.hpp"
#include "neurocat/random.hpp"
#include "neurocat/segmentation.hpp"
#include "neurocat/stats.hpp"
#include "neurocat/synthetic.hpp"
#include "neurocat/topdown.hpp"

using namespace neurocat;

namespace {

const SynthCorpus& corpus() {
  static const SynthCorpus c = [] {
    SynthSpec spec;
    spec.n_neurons = 32;
    spec.mode = SynthMode::attentive;
    return generate(spec);
  }();
  return c;
}

void BM_KruskalWallis(benchmark::State& state) {
  Rng rng(1);
  Groups g(5);
  for (auto& grp : g)
    for (int i = 0; i < state.range(0) / 5; ++i) grp.push_back(rng.normal());
  for (auto _ : state) benchmark::DoNotOptimize(kruskal_wallis(g));
}
BENCHMARK(BM_KruskalWallis)->Arg(30)->Arg(100);

void BM_WardHclust(benchmark::State& state) {
  Rng rng(2);
  Matrix m(static_cast<std::size_t>(state.range(0)), 16);
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t d = 0; d < m.cols(); ++d) m(i, d) = rng.normal();
  for (auto _ : state) benchmark::DoNotOptimize(ward_hclust(m, 5));
}
BENCHMARK(BM_WardHclust)->Arg(50)->Arg(100);

void BM_CosineMatrix(benchmark::State& state) {
  const auto& c = corpus();
  std::vector<std::string> tokens;
  for (const auto& t : c.neurons[0].core_tokens) tokens.push_back(t.token);
  for (auto _ : state) benchmark::DoNotOptimize(CosineMatrix(tokens, c.embeddings));
}
BENCHMARK(BM_CosineMatrix);

void BM_TopDownNeuron(benchmark::State& state) {
  const auto& c = corpus();
  const EmbeddingPartitionSource source(c.embeddings);
  const RunConfig cfg;
  std::size_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(analyze_neuron_topdown(c.neurons[i++ % c.neurons.size()], source, cfg));
}
BENCHMARK(BM_TopDownNeuron);

void BM_InterleavingNeuron(benchmark::State& state) {
  const auto& c = corpus();
  const EmbeddingPartitionSource source(c.embeddings);
  const RunConfig cfg;
  std::size_t i = 0;
  for (auto _ : state)
    benchmark::DoNotOptimize(analyze_neuron_interleaving(c.neurons[i++ % c.neurons.size()], source, cfg));
}
BENCHMARK(BM_InterleavingNeuron);

void BM_BottomUpNeuron(benchmark::State& state) {
  const auto& c = corpus();
  const RunConfig cfg;
  std::size_t i = 0;
  for (auto _ : state)
    benchmark::DoNotOptimize(
        analyze_neuron_bottomup(c.neurons[i++ % c.neurons.size()], c.embeddings, ActivationSegmentation::quartile, cfg));
}
BENCHMARK(BM_BottomUpNeuron);

}  // namespace

BENCHMARK_MAIN();
