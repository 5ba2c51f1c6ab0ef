#include <benchmark/benchmark.h>

#include <vector>

#include "boxseg/graph.hpp"
#include "boxseg/ops.hpp"
#include "boxseg/rng.hpp"
#include "boxseg/tensor.hpp"

#include "../core/src/gemm.hpp"

namespace {

using namespace boxseg;

Tensor rand_tensor(Rng& rng, const Shape& shape) {
  Tensor t = Tensor::zeros(shape);
  for (float& v : t.data()) v = static_cast<float>(rng.uniform(-1.0, 1.0));
  return t;
}

void BM_GemmNN(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  Rng rng(1);
  std::vector<float> a(static_cast<std::size_t>(n) * n);
  std::vector<float> b(static_cast<std::size_t>(n) * n);
  std::vector<float> c(static_cast<std::size_t>(n) * n, 0.0f);
  for (auto& v : a) v = static_cast<float>(rng.uniform(-1.0, 1.0));
  for (auto& v : b) v = static_cast<float>(rng.uniform(-1.0, 1.0));
  for (auto _ : state) {
    detail::gemm_nn_acc(n, n, n, a.data(), b.data(), c.data());
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * 2l * n * n * n);
}
BENCHMARK(BM_GemmNN)->Arg(128)->Arg(256)->Arg(512);

void BM_Conv2dForward(benchmark::State& state) {
  Rng rng(2);
  Tensor x = rand_tensor(rng, {32, 32, 32});
  Tensor k = rand_tensor(rng, {32, 32, 3, 3});
  for (auto _ : state) {
    Graph g = Graph::inference();
    Tensor y = conv2d(g, x, k, 1, 1);
    benchmark::DoNotOptimize(y.data().data());
  }
  state.SetItemsProcessed(state.iterations() * 2l * 32 * 32 * 32 * 32 * 9);
}
BENCHMARK(BM_Conv2dForward);

void BM_Conv2dTrainStep(benchmark::State& state) {
  Rng rng(3);
  Tensor x = rand_tensor(rng, {32, 32, 32});
  Tensor k = rand_tensor(rng, {32, 32, 3, 3});
  k.set_requires_grad(true);
  for (auto _ : state) {
    Graph g;
    Tensor y = conv2d(g, x, k, 1, 1);
    Tensor loss = mean_all(g, y);
    g.backward(loss);
    k.clear_grad();
    benchmark::DoNotOptimize(loss.item());
  }
  state.SetItemsProcessed(state.iterations() * 2l * 2 * 32 * 32 * 32 * 32 * 9);
}
BENCHMARK(BM_Conv2dTrainStep);

void BM_TransposedConv2dForward(benchmark::State& state) {
  Rng rng(4);
  Tensor x = rand_tensor(rng, {64, 16, 16});
  Tensor k = rand_tensor(rng, {64, 32, 4, 4});
  for (auto _ : state) {
    Graph g = Graph::inference();
    Tensor y = transposed_conv2d(g, x, k, 2, 1);
    benchmark::DoNotOptimize(y.data().data());
  }
  state.SetItemsProcessed(state.iterations() * 2l * 64 * 32 * 16 * 16 * 16);
}
BENCHMARK(BM_TransposedConv2dForward);

}  // namespace

BENCHMARK_MAIN();
