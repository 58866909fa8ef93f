// Serial reference vs OpenMP kernels, plus evaluation fan-out over videos.

#include <benchmark/benchmark.h>
#include <omp.h>

#include <random>
#include <vector>

#include "tpt/harness.hpp"
#include "tpt/kernels.hpp"

namespace {

std::vector<double> random_vec(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

template <auto Kernel>
void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_vec(n * n, 1), b = random_vec(n * n, 2);
  std::vector<double> c(n * n);
  for (auto _ : state) {
    Kernel(a, b, c, n, n, n);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(n * n * n));
}

template <auto Kernel>
void BM_Softmax(benchmark::State& state) {
  const auto rows = static_cast<std::size_t>(state.range(0)), cols = std::size_t{256};
  const auto x = random_vec(rows * cols, 3);
  std::vector<double> y(x.size());
  for (auto _ : state) {
    Kernel(x, y, rows, cols);
    benchmark::DoNotOptimize(y.data());
  }
}

// One untrained model, evaluated on the test split with 1 thread vs all threads.
void BM_Evaluate(benchmark::State& state) {
  tpt::RunConfig c;
  c.data.num_train = 100;
  c.data.num_val = 10;
  c.data.num_test = 64;
  c.model.tpt.model_dim = 64;
  c.finalize();
  const auto ds = tpt::data::generate_dataset(c.data);
  const auto tm = tpt::init_model(c, ds);
  const int threads = state.range(0) == 0 ? 1 : omp_get_max_threads();
  const int keep = omp_get_max_threads();
  omp_set_num_threads(threads);
  for (auto _ : state) {
    auto r = tpt::evaluate(tm, ds.train, ds.test, "test");
    benchmark::DoNotOptimize(r.predictions.data());
  }
  omp_set_num_threads(keep);
  state.counters["threads"] = threads;
}

}  // namespace

BENCHMARK(BM_Matmul<tpt::kernels::matmul_serial>)->Name("matmul/serial")->Arg(64)->Arg(128)->Arg(256);
BENCHMARK(BM_Matmul<tpt::kernels::matmul_parallel>)->Name("matmul/parallel")->Arg(64)->Arg(128)->Arg(256);
BENCHMARK(BM_Softmax<tpt::kernels::softmax_rows_serial>)->Name("softmax/serial")->Arg(64)->Arg(1024);
BENCHMARK(BM_Softmax<tpt::kernels::softmax_rows_parallel>)->Name("softmax/parallel")->Arg(64)->Arg(1024);
BENCHMARK(BM_Evaluate)->Name("evaluate/serial")->Arg(0)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Evaluate)->Name("evaluate/parallel")->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
