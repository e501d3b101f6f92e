// Serial reference loops against the OpenMP kernels at several ensemble sizes.
//
//   ./bench_kernels --benchmark_filter=column_means
//   OMP_NUM_THREADS=4 ./bench_kernels
//
// Each kernel is registered twice, as <name>/serial and <name>/omp, with the
// ensemble size M as the benchmark argument. K (restraint count) is fixed at 10.

#include <benchmark/benchmark.h>
#include <omp.h>

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

#include "maxent/kernels.hpp"
#include "maxent/matrix.hpp"

namespace {

constexpr std::size_t kRestraints = 10;

struct Inputs {
  maxent::Matrix g;
  std::vector<double> lambda, base, log_w, w, h, means, r;

  explicit Inputs(std::size_t m) : g(m, kRestraints), base(m), log_w(m), w(m), h(m) {
    std::mt19937_64 rng(1234 + m);
    std::normal_distribution<double> normal;
    for (double& v : g.data()) v = normal(rng);
    for (double& v : base) v = 0.1 * normal(rng);
    for (std::size_t k = 0; k < kRestraints; ++k) {
      lambda.push_back(0.2 * normal(rng));
      r.push_back(normal(rng));
    }
    maxent::kernels::serial::tilt_log_weights(g, lambda, base, log_w);
    maxent::kernels::serial::normalize_log_weights(log_w);
    maxent::kernels::serial::exponentiate(log_w, w);
    means = maxent::kernels::serial::weighted_column_means(g, w);
    maxent::kernels::serial::row_combination(g, r, h);
  }
};

void set_counters(benchmark::State& state, std::size_t m) {
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * m));
  state.counters["threads"] = omp_get_max_threads();
}

template <bool Serial>
void tilt(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  Inputs in(m);
  std::vector<double> out(m);
  for (auto _ : state) {
    if constexpr (Serial)
      maxent::kernels::serial::tilt_log_weights(in.g, in.lambda, in.base, out);
    else
      maxent::kernels::tilt_log_weights(in.g, in.lambda, in.base, out);
    benchmark::DoNotOptimize(out.data());
  }
  set_counters(state, m);
}

template <bool Serial>
void log_sum_exp(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  Inputs in(m);
  for (auto _ : state) {
    double v = Serial ? maxent::kernels::serial::log_sum_exp(in.log_w) : maxent::kernels::log_sum_exp(in.log_w);
    benchmark::DoNotOptimize(v);
  }
  set_counters(state, m);
}

template <bool Serial>
void exponentiate(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  Inputs in(m);
  std::vector<double> out(m);
  for (auto _ : state) {
    if constexpr (Serial)
      maxent::kernels::serial::exponentiate(in.log_w, out);
    else
      maxent::kernels::exponentiate(in.log_w, out);
    benchmark::DoNotOptimize(out.data());
  }
  set_counters(state, m);
}

template <bool Serial>
void column_means(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  Inputs in(m);
  for (auto _ : state) {
    auto v = Serial ? maxent::kernels::serial::weighted_column_means(in.g, in.w)
                    : maxent::kernels::weighted_column_means(in.g, in.w);
    benchmark::DoNotOptimize(v.data());
  }
  set_counters(state, m);
}

template <bool Serial>
void cross_covariance(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  Inputs in(m);
  for (auto _ : state) {
    auto v = Serial ? maxent::kernels::serial::weighted_cross_covariance(in.g, in.h, in.w, in.means)
                    : maxent::kernels::weighted_cross_covariance(in.g, in.h, in.w, in.means);
    benchmark::DoNotOptimize(v.data());
  }
  set_counters(state, m);
}

template <bool Serial>
void covariance(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  Inputs in(m);
  for (auto _ : state) {
    auto v = Serial ? maxent::kernels::serial::weighted_covariance(in.g, in.w, in.means)
                    : maxent::kernels::weighted_covariance(in.g, in.w, in.means);
    benchmark::DoNotOptimize(v.data().data());
  }
  set_counters(state, m);
}

// One loss-and-gradient evaluation as the solver runs it: tilt, normalize,
// exponentiate, column means, residual combination, cross covariance.
template <bool Serial>
void gradient_step(benchmark::State& state) {
  namespace k = maxent::kernels;
  namespace s = maxent::kernels::serial;
  const auto m = static_cast<std::size_t>(state.range(0));
  Inputs in(m);
  std::vector<double> log_w(m), w(m), h(m);
  for (auto _ : state) {
    if constexpr (Serial) {
      s::tilt_log_weights(in.g, in.lambda, in.base, log_w);
      s::normalize_log_weights(log_w);
      s::exponentiate(log_w, w);
      const auto means = s::weighted_column_means(in.g, w);
      s::row_combination(in.g, in.r, h);
      auto grad = s::weighted_cross_covariance(in.g, h, w, means);
      benchmark::DoNotOptimize(grad.data());
    } else {
      k::tilt_log_weights(in.g, in.lambda, in.base, log_w);
      k::normalize_log_weights(log_w);
      k::exponentiate(log_w, w);
      const auto means = k::weighted_column_means(in.g, w);
      k::row_combination(in.g, in.r, h);
      auto grad = k::weighted_cross_covariance(in.g, h, w, means);
      benchmark::DoNotOptimize(grad.data());
    }
  }
  set_counters(state, m);
}

#define MAXENT_BENCH_PAIR(fn)                                                                            \
  BENCHMARK(fn<true>)->Name(#fn "/serial")->RangeMultiplier(10)->Range(1000, 1000000)->UseRealTime(); \
  BENCHMARK(fn<false>)->Name(#fn "/omp")->RangeMultiplier(10)->Range(1000, 1000000)->UseRealTime()

MAXENT_BENCH_PAIR(tilt);
MAXENT_BENCH_PAIR(log_sum_exp);
MAXENT_BENCH_PAIR(exponentiate);
MAXENT_BENCH_PAIR(column_means);
MAXENT_BENCH_PAIR(cross_covariance);
MAXENT_BENCH_PAIR(covariance);
MAXENT_BENCH_PAIR(gradient_step);

}  // namespace

BENCHMARK_MAIN();
