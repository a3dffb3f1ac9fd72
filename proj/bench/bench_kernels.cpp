// Parallel kernels against their serial references on network-sized layers.

#include <benchmark/benchmark.h>

#include <random>

#include "pmri/kernels.hpp"

using namespace pmri;

namespace {

struct Layer {
  Tensor in;
  Tensor grad_out;
  std::vector<float> weight;
  std::vector<float> bias;
  ConvShape shape;
};

Layer make_layer(const benchmark::State& state) {
  const int size = static_cast<int>(state.range(0));
  const int channels = static_cast<int>(state.range(1));
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n;
  Layer l;
  l.shape = {channels, channels, 3, 1};
  l.in = Tensor(channels, size, size);
  for (auto& v : l.in.data) v = n(rng);
  l.grad_out = Tensor(channels, size, size);
  for (auto& v : l.grad_out.data) v = n(rng);
  l.weight.resize(l.shape.weight_count());
  for (auto& v : l.weight) v = static_cast<float>(0.1 * n(rng));
  l.bias.assign(channels, 0.01f);
  return l;
}

void forward_parallel(benchmark::State& state) {
  const Layer l = make_layer(state);
  for (auto _ : state) benchmark::DoNotOptimize(kernels::conv2d_forward(l.in, l.weight, l.bias, l.shape));
}

void forward_reference(benchmark::State& state) {
  const Layer l = make_layer(state);
  for (auto _ : state) benchmark::DoNotOptimize(kernels::reference::conv2d_forward(l.in, l.weight, l.bias, l.shape));
}

void backward_parallel(benchmark::State& state) {
  const Layer l = make_layer(state);
  std::vector<double> gw(l.weight.size()), gb(l.bias.size());
  for (auto _ : state) {
    benchmark::DoNotOptimize(kernels::conv2d_backward_input(l.grad_out, l.weight, l.shape, l.in.height, l.in.width));
    kernels::conv2d_backward_params(l.in, l.grad_out, l.shape, gw, gb);
  }
}

void backward_reference(benchmark::State& state) {
  const Layer l = make_layer(state);
  std::vector<double> gw(l.weight.size()), gb(l.bias.size());
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        kernels::reference::conv2d_backward_input(l.grad_out, l.weight, l.shape, l.in.height, l.in.width));
    kernels::reference::conv2d_backward_params(l.in, l.grad_out, l.shape, gw, gb);
  }
}

void layers(benchmark::internal::Benchmark* b) {
  b->Args({32, 8})->Args({64, 8})->Args({64, 16})->Args({128, 16})->Unit(benchmark::kMicrosecond);
}

}  // namespace

BENCHMARK(forward_parallel)->Apply(layers);
BENCHMARK(forward_reference)->Apply(layers);
BENCHMARK(backward_parallel)->Apply(layers);
BENCHMARK(backward_reference)->Apply(layers);

BENCHMARK_MAIN();
