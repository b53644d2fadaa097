#include <benchmark/benchmark.h>

#include "ssnf/rng.hpp"
#include "ssnf/rpc.hpp"

using namespace ssnf;

static void BM_RpcProject(benchmark::State& state) {
  RpcModel m = make_affine_rpc(Vec3{0.2, -0.1, -1}.normalized(), 64, 64);
  Rng rng(1);
  for (int i = 4; i < 20; ++i) m.line_num[size_t(i)] += rng.uniform(-0.02, 0.02);
  double lat = 0.3, lon = -0.2;
  for (auto _ : state) {
    auto px = rpc_project(m, lat, lon, 0.1);
    benchmark::DoNotOptimize(px);
  }
}
BENCHMARK(BM_RpcProject);

static void BM_RpcLocalize(benchmark::State& state) {
  RpcModel m = make_affine_rpc(Vec3{0.2, -0.1, -1}.normalized(), 64, 64);
  Rng rng(1);
  for (int i = 4; i < 20; ++i) m.line_num[size_t(i)] += rng.uniform(-0.02, 0.02);
  for (auto _ : state) {
    auto ll = rpc_localize(m, 31.5, 17.25, 0.1);
    benchmark::DoNotOptimize(ll);
  }
}
BENCHMARK(BM_RpcLocalize);
