#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "spectralprior/kernels.hpp"

namespace k = spectralprior::kernels;

namespace {

// Geometries taken from the default generator on a 64x64 image.
const k::ConvGeometry shapes[] = {
    {36, 16, 64, 64, 3, 1, 1},   // decoder, full resolution
    {68, 32, 32, 32, 3, 1, 1},   // decoder, half resolution
    {32, 16, 64, 64, 3, 2, 1},   // first downsampling conv
    {128, 128, 8, 8, 1, 1, 0},   // pointwise
};

struct Buffers {
  std::vector<double> in, w, out;
  explicit Buffers(const k::ConvGeometry& g)
      : in(g.in_channels * g.in_h * g.in_w),
        w(g.out_channels * g.in_channels * g.kernel * g.kernel),
        out(g.out_channels * g.out_h() * g.out_w()) {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> n;
    for (auto* v : {&in, &w, &out})
      for (auto& x : *v) x = n(rng);
  }
};

double macs(const k::ConvGeometry& g) {
  return static_cast<double>(g.out_channels * g.in_channels * g.kernel * g.kernel * g.out_h() * g.out_w());
}

enum Op { forward, backward_input, backward_weight };

template <Op op, bool Parallel>
void conv(benchmark::State& state) {
  const auto& g = shapes[state.range(0)];
  Buffers b(g);
  for (auto _ : state) {
    if constexpr (op == forward) {
      Parallel ? k::parallel::conv2d_forward(g, b.in, b.w, b.out) : k::serial::conv2d_forward(g, b.in, b.w, b.out);
    } else if constexpr (op == backward_input) {
      Parallel ? k::parallel::conv2d_backward_input(g, b.out, b.w, b.in)
               : k::serial::conv2d_backward_input(g, b.out, b.w, b.in);
    } else {
      Parallel ? k::parallel::conv2d_backward_weight(g, b.out, b.in, b.w)
               : k::serial::conv2d_backward_weight(g, b.out, b.in, b.w);
    }
    benchmark::ClobberMemory();
  }
  state.counters["MAC/s"] = benchmark::Counter(macs(g), benchmark::Counter::kIsIterationInvariantRate);
  state.counters["threads"] = Parallel ? k::max_threads() : 1;
}

void shapes_args(benchmark::internal::Benchmark* b) {
  for (int i = 0; i < static_cast<int>(std::size(shapes)); ++i) b->Arg(i);
  b->Unit(benchmark::kMicrosecond);
}

}  // namespace

BENCHMARK(conv<forward, false>)->Name("forward/serial")->Apply(shapes_args);
BENCHMARK(conv<forward, true>)->Name("forward/parallel")->Apply(shapes_args);
BENCHMARK(conv<backward_input, false>)->Name("backward_input/serial")->Apply(shapes_args);
BENCHMARK(conv<backward_input, true>)->Name("backward_input/parallel")->Apply(shapes_args);
BENCHMARK(conv<backward_weight, false>)->Name("backward_weight/serial")->Apply(shapes_args);
BENCHMARK(conv<backward_weight, true>)->Name("backward_weight/parallel")->Apply(shapes_args);

BENCHMARK_MAIN();
