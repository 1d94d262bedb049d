#include <benchmark/benchmark.h>

#include <random>

#include "icnnpd/icnn.hpp"
#include "icnnpd/radon.hpp"

using namespace icnnpd;

namespace {

Tensor uniform(const Shape& shape, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Tensor t(shape);
  for (auto& v : t.data()) v = u(rng);
  return t;
}

void BM_Conv2DApply(benchmark::State& state) {
  const auto side = static_cast<std::size_t>(state.range(0));
  const auto op = make_conv2d(uniform({8, 1, 5, 5}, 1), side, side);
  const Tensor x = uniform({1, side, side}, 2);
  for (auto _ : state) benchmark::DoNotOptimize(op->apply(x));
}
BENCHMARK(BM_Conv2DApply)->Arg(32)->Arg(64);

void BM_Conv2DAdjoint(benchmark::State& state) {
  const auto side = static_cast<std::size_t>(state.range(0));
  const auto op = make_conv2d(uniform({8, 1, 5, 5}, 1), side, side);
  const Tensor w = uniform({8, side, side}, 2);
  for (auto _ : state) benchmark::DoNotOptimize(op->adjoint(w));
}
BENCHMARK(BM_Conv2DAdjoint)->Arg(32)->Arg(64);

void BM_RadonApply(benchmark::State& state) {
  const auto side = static_cast<std::size_t>(state.range(0));
  const RadonOperator op(default_geometry(side, 60));
  const Tensor x = uniform({side, side}, 3);
  for (auto _ : state) benchmark::DoNotOptimize(op.apply(x));
}
BENCHMARK(BM_RadonApply)->Arg(32)->Arg(64);

void BM_RadonAdjoint(benchmark::State& state) {
  const auto side = static_cast<std::size_t>(state.range(0));
  const auto g = default_geometry(side, 60);
  const RadonOperator op(g);
  const Tensor s = uniform({g.n_angles, g.n_bins}, 4);
  for (auto _ : state) benchmark::DoNotOptimize(op.adjoint(s));
}
BENCHMARK(BM_RadonAdjoint)->Arg(32)->Arg(64);

void BM_IcnnForward(benchmark::State& state) {
  ConvTemplate t;
  t.image_side = static_cast<std::size_t>(state.range(0));
  t.pool = t.image_side / 8;
  const auto net = random_admissible(5, t);
  const Tensor x = uniform(net.input_shape, 6);
  for (auto _ : state) benchmark::DoNotOptimize(forward(net, x).value);
}
BENCHMARK(BM_IcnnForward)->Arg(32)->Arg(64);

void BM_IcnnSubgradient(benchmark::State& state) {
  ConvTemplate t;
  t.image_side = static_cast<std::size_t>(state.range(0));
  t.pool = t.image_side / 8;
  const auto net = random_admissible(5, t);
  const Tensor x = uniform(net.input_shape, 6);
  for (auto _ : state) benchmark::DoNotOptimize(subgradient(net, x));
}
BENCHMARK(BM_IcnnSubgradient)->Arg(32)->Arg(64);

}  // namespace
