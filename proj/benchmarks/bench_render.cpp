#include <benchmark/benchmark.h>

#include "ssnf/render.hpp"
#include "ssnf/rng.hpp"

using namespace ssnf;

static void BM_CompositingWeights(benchmark::State& state) {
  const size_t n = size_t(state.range(0));
  Rng rng(3);
  std::vector<float> sig(n), del(n);
  for (size_t i = 0; i < n; ++i) {
    sig[i] = float(rng.uniform(0, 80));
    del[i] = float(rng.uniform(1e-3, 0.05));
  }
  for (auto _ : state) {
    auto w = compositing_weights(sig, del);
    benchmark::DoNotOptimize(w.opacity);
  }
}
BENCHMARK(BM_CompositingWeights)->Arg(64)->Arg(128);

static void BM_RenderSemantic(benchmark::State& state) {
  const size_t n = 64, n_cls = 5;
  Rng rng(4);
  std::vector<float> sig(n), del(n);
  std::vector<std::vector<float>> sem(n, std::vector<float>(n_cls));
  for (size_t i = 0; i < n; ++i) {
    sig[i] = float(rng.uniform(0, 80));
    del[i] = float(rng.uniform(1e-3, 0.05));
    for (auto& v : sem[i]) v = float(rng.next_double());
  }
  auto w = compositing_weights(sig, del);
  for (auto _ : state) {
    auto out = render_semantic(w, sem);
    benchmark::DoNotOptimize(out.cls);
  }
}
BENCHMARK(BM_RenderSemantic);
