#include <benchmark/benchmark.h>

#include "ssnf/field.hpp"
#include "ssnf/pipeline.hpp"
#include "ssnf/rng.hpp"

using namespace ssnf;

namespace {

// one desk-scale training chunk: fill deterministic inputs once, then time
// forward/backward
struct GraphFixture {
  FieldConfig cfg;
  Graph<float> graph;
  FieldParams<float> params;

  GraphFixture(int rays, int samples)
      : cfg([] {
          FieldConfig c = FieldConfig::desk();
          c.n_embeddings = 8;
          return c;
        }()),
        graph(build_train_graph<float>(cfg, rays, samples, LossWeights{})),
        params(FieldParams<float>::init(cfg, 1)) {
    graph.set_check_finite(false);
    Rng rng(2);
    const int64_t m = int64_t(rays) * samples;
    Tensor<float>& pe_x = graph.leaf_data(pipe::kPeX);
    Tensor<float>& pe_w = graph.leaf_data(pipe::kPeW);
    Tensor<float>& embed = graph.leaf_data(pipe::kEmbedSel);
    for (int64_t i = 0; i < m; ++i) {
      const float p[3] = {float(rng.uniform(-1, 1)), float(rng.uniform(-1, 1)),
                          float(rng.uniform(-1, 1))};
      const float w[3] = {0.2f, 0.1f, 0.97f};
      positional_encode(p, 3, cfg.pe_levels_position, pe_x.data() + i * pe_x.cols());
      positional_encode(w, 3, cfg.pe_levels_sun, pe_w.data() + i * pe_w.cols());
      embed.at(i, int64_t(rng.next_below(8))) = 1;
    }
    Tensor<float>& deltas = graph.leaf_data(pipe::kDeltas);
    Tensor<float>& tvals = graph.leaf_data(pipe::kTVals);
    for (int64_t i = 0; i < deltas.numel(); ++i) {
      deltas[size_t(i)] = float(rng.uniform(0.01, 0.03));
      tvals[size_t(i)] = float(rng.uniform(0, 1));
    }
    Tensor<float>& gt_rgb = graph.leaf_data(pipe::kGtRgb);
    for (int64_t i = 0; i < gt_rgb.numel(); ++i) gt_rgb[size_t(i)] = float(rng.next_double());
    Tensor<float>& gt_sem = graph.leaf_data(pipe::kGtSem);
    gt_sem.fill(0);
    Tensor<float>& smask = graph.leaf_data(pipe::kStaticMask);
    Tensor<float>& tmask = graph.leaf_data(pipe::kTransientMask);
    for (int64_t r = 0; r < smask.rows(); ++r) {
      gt_sem.at(r, int64_t(rng.next_below(5))) = 1;
      smask.at(r, 0) = 1;
      tmask.at(r, 0) = 0;
    }
    graph.bind(pipe::kWeightL2, Tensor<float>::scalar(0));
    graph.bind(pipe::kWeightUnc, Tensor<float>::scalar(1));
    graph.bind(pipe::kWeightSem, Tensor<float>::scalar(0.04f));
    graph.bind(pipe::kWeightTreg, Tensor<float>::scalar(0.1f));
    bind_field_params(graph, params);
  }
};

}  // namespace

static void BM_TrainGraphForward(benchmark::State& state) {
  GraphFixture fx(int(state.range(0)), 64);
  for (auto _ : state) {
    fx.graph.run_forward();
    benchmark::DoNotOptimize(fx.graph.value(pipe::kLossTotal)[0]);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0) * 64);
}
BENCHMARK(BM_TrainGraphForward)->Arg(64)->Arg(128);

static void BM_TrainGraphForwardBackward(benchmark::State& state) {
  GraphFixture fx(int(state.range(0)), 64);
  for (auto _ : state) {
    fx.graph.run_forward();
    auto grads = fx.graph.backward(pipe::kLossTotal, Tensor<float>::scalar(1));
    benchmark::DoNotOptimize(grads.size());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0) * 64);
}
BENCHMARK(BM_TrainGraphForwardBackward)->Arg(64)->Arg(128);
