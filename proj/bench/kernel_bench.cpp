// Parallel kernels against the serial reference on the shapes the estimator
// sees (stacked source atoms x target atoms).

#include "otprop/kernels.hpp"

#include <benchmark/benchmark.h>

#include <cmath>
#include <random>
#include <vector>

namespace {

using otprop::RowMatrix;

RowMatrix random_points(int n, int d, unsigned seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> normal(0.0, 2.0);
  RowMatrix m(n, d);
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < d; ++c) m(i, c) = normal(gen);
  return m;
}

struct Fixture {
  RowMatrix x, y, cost;
  std::vector<double> log_w, pot, out;

  Fixture(int rows, int cols) : x(random_points(rows, 6, 1)), y(random_points(cols, 6, 2)) {
    otprop::kernels::reference::squared_distances(x, y, cost);
    log_w.assign(static_cast<std::size_t>(cols), -std::log(static_cast<double>(cols)));
    pot.assign(static_cast<std::size_t>(cols), 0.0);
    out.assign(static_cast<std::size_t>(rows), 0.0);
  }
};

template <bool Reference>
void BM_softmin(benchmark::State& state) {
  Fixture f(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)));
  for (auto _ : state) {
    if constexpr (Reference) {
      otprop::kernels::reference::softmin_rows(f.cost, f.log_w, f.pot, 0.05, f.out);
    } else {
      otprop::kernels::softmin_rows(f.cost, f.log_w, f.pot, 0.05, f.out);
    }
    benchmark::DoNotOptimize(f.out.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0) * state.range(1));
}

template <bool Reference>
void BM_squared_distances(benchmark::State& state) {
  Fixture f(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)));
  RowMatrix out;
  for (auto _ : state) {
    if constexpr (Reference) {
      otprop::kernels::reference::squared_distances(f.x, f.y, out);
    } else {
      otprop::kernels::squared_distances(f.x, f.y, out);
    }
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0) * state.range(1));
}

}  // namespace

BENCHMARK(BM_softmin<false>)->Args({250, 50})->Args({2500, 500});
BENCHMARK(BM_softmin<true>)->Args({250, 50})->Args({2500, 500});
BENCHMARK(BM_squared_distances<false>)->Args({250, 50})->Args({2500, 2500});
BENCHMARK(BM_squared_distances<true>)->Args({250, 50})->Args({2500, 2500});

BENCHMARK_MAIN();
