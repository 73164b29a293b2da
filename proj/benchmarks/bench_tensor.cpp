#include <benchmark/benchmark.h>

#include <random>

#include "mrolab/cql.hpp"
#include "mrolab/dt.hpp"
#include "mrolab/tensor.hpp"

using namespace mrolab;
using tensor::Tensor;

namespace {

Tensor random_tensor(tensor::Shape shape, Rng& rng, bool grad = false) {
  std::normal_distribution<double> g;
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  std::vector<double> v(n);
  for (auto& x : v) x = g(rng);
  return Tensor::from(std::move(shape), std::move(v), grad);
}

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  const auto a = random_tensor({n, n}, rng), b = random_tensor({n, n}, rng);
  for (auto _ : state) benchmark::DoNotOptimize(tensor::matmul(a, b));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(16)->Arg(64)->Arg(128);

void BM_MatmulBackward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(2);
  const auto a = random_tensor({n, n}, rng, true), b = random_tensor({n, n}, rng, true);
  for (auto _ : state) {
    auto loss = tensor::sum(tensor::relu(tensor::matmul(a, b)));
    loss.backward();
  }
}
BENCHMARK(BM_MatmulBackward)->Arg(64);

void BM_CqlStep(benchmark::State& state) {
  Rng rng(3);
  cql::CqlConfig cc;
  auto q = cql::QModel::create(kStateDim, cc, rng);
  std::normal_distribution<double> g;
  std::vector<cql::Sample> batch(64);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    batch[i].state.resize(kStateDim);
    batch[i].next_state.resize(kStateDim);
    for (auto& x : batch[i].state) x = g(rng);
    for (auto& x : batch[i].next_state) x = g(rng);
    batch[i].action = i % 3;
    batch[i].reward = 2.5;
  }
  for (auto _ : state) {
    q.online.clear_grads();
    auto parts = cql::cql_loss(q, batch, 1.0);
    parts.total.backward();
    nn::adam_step(q.online, nn::AdamConfig{});
  }
}
BENCHMARK(BM_CqlStep);

void BM_DtForward(benchmark::State& state) {
  Rng rng(4);
  dt::DtConfig dc;
  dc.context_k = static_cast<std::size_t>(state.range(0));
  const auto m = dt::DtModel::create(kStateDim, 45.0, dc, rng);
  std::normal_distribution<double> g;
  std::vector<dt::DtContext> batch(32);
  for (auto& ctx : batch) {
    for (std::size_t j = 0; j < dc.context_k; ++j) {
      dt::DtStep s;
      s.rtg = 40 + g(rng);
      s.state.resize(kStateDim);
      for (auto& x : s.state) x = g(rng);
      s.action = j % 3;
      s.timestep = j;
      ctx.push_back(s);
    }
  }
  for (auto _ : state) benchmark::DoNotOptimize(dt::dt_forward(m, batch));
}
BENCHMARK(BM_DtForward)->Arg(3)->Arg(5)->Arg(7);

}  // namespace
