// SPDX-License-Identifier: Apache-2.0
//
// Micro benchmarks: model forward and backward, the clustering loss, k-means.

#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "rddc/baselines.hpp"
#include "rddc/loss.hpp"
#include "rddc/nn.hpp"

using namespace rddc;

namespace {

PaddedBatch make_batch(std::size_t n, std::size_t d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> len(20, 40);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<std::vector<double>> rows(n);
  std::vector<std::size_t> lengths(n);
  for (std::size_t i = 0; i < n; ++i) {
    lengths[i] = len(rng);
    rows[i].resize(lengths[i] * d);
    for (double& v : rows[i]) v = g(rng);
  }
  return PaddedBatch::pack(rows, lengths, d);
}

ModelConfig model_config(std::size_t d) {
  ModelConfig c;
  c.input_size = d;
  c.clusters = 3;
  return c;
}

void BM_Forward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  RddcModel model = RddcModel::init(model_config(2), 1);
  PaddedBatch batch = make_batch(n, 2, 2);
  for (auto _ : state) benchmark::DoNotOptimize(model.forward(batch).alpha.data().data());
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_Forward)->Arg(16)->Arg(64)->Arg(200)->Unit(benchmark::kMillisecond);

void BM_ForwardBackward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  RddcModel model = RddcModel::init(model_config(2), 1);
  for (auto& p : model.parameters()) p.set_requires_grad(true);
  PaddedBatch batch = make_batch(n, 2, 3);
  for (auto _ : state) {
    Graph g;
    GradScope scope(g);
    ForwardResult r = model.forward(batch, Mode::train);
    g.backward(total_loss(r.h, r.alpha).total);
    for (auto& p : model.parameters()) p.zero_grad();
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_ForwardBackward)->Arg(16)->Arg(64)->Arg(200)->Unit(benchmark::kMillisecond);

void BM_TotalLoss(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> hv(n * 32), av(n * 3);
  for (double& v : hv) v = g(rng);
  for (double& v : av) v = g(rng);
  Tensor h({n, 32}, hv), a = softmax_rows(Tensor({n, 3}, av));
  for (auto _ : state) benchmark::DoNotOptimize(total_loss(h, a).l1);
}
BENCHMARK(BM_TotalLoss)->Arg(64)->Arg(200)->Arg(1000)->Unit(benchmark::kMillisecond);

void BM_KMeans(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix x{n, 16, std::vector<double>(n * 16)};
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < 16; ++j) x(i, j) = g(rng) + static_cast<double>(i % 4) * 3.0;
  for (auto _ : state) benchmark::DoNotOptimize(kmeans(x, 4, {10, 300, 6}).inertia);
}
BENCHMARK(BM_KMeans)->Arg(200)->Arg(1000)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
