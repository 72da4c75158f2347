// Serial reference vs OpenMP kernels.
#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "archsearch/kernels.hpp"

namespace k = archsearch::kernels;

namespace {

std::vector<double> normals(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> d;
    std::vector<double> v(n);
    for (auto& x : v) x = d(rng);
    return v;
}

constexpr std::size_t kDim = 256;

template <auto Fn>
void dot_scores(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto rows = normals(n * kDim, 1);
    const auto q = normals(kDim, 2);
    std::vector<double> out(n);
    for (auto _ : state) {
        Fn(rows, kDim, q, out);
        benchmark::DoNotOptimize(out.data());
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n));
}

template <auto Fn>
void bootstrap(benchmark::State& state) {
    const auto v = normals(375, 3);
    for (auto _ : state) benchmark::DoNotOptimize(Fn(v, static_cast<std::size_t>(state.range(0)), 7));
}

template <auto Fn>
void sign_flip(benchmark::State& state) {
    const auto d = normals(375, 4);
    for (auto _ : state) benchmark::DoNotOptimize(Fn(d, static_cast<std::size_t>(state.range(0)), 7, 3.0));
}

template <auto Fn>
void sign_flip_exhaustive(benchmark::State& state) {
    const auto d = normals(static_cast<std::size_t>(state.range(0)), 5);
    for (auto _ : state) benchmark::DoNotOptimize(Fn(d, 1.0));
}

}  // namespace

BENCHMARK(dot_scores<k::serial::dot_scores>)->Name("dot_scores/serial")->Arg(1000)->Arg(10000);
BENCHMARK(dot_scores<k::parallel::dot_scores>)->Name("dot_scores/parallel")->Arg(1000)->Arg(10000);
BENCHMARK(bootstrap<k::serial::bootstrap_means>)->Name("bootstrap/serial")->Arg(10000);
BENCHMARK(bootstrap<k::parallel::bootstrap_means>)->Name("bootstrap/parallel")->Arg(10000);
BENCHMARK(sign_flip<k::serial::sign_flip_count>)->Name("sign_flip/serial")->Arg(10000);
BENCHMARK(sign_flip<k::parallel::sign_flip_count>)->Name("sign_flip/parallel")->Arg(10000);
BENCHMARK(sign_flip_exhaustive<k::serial::sign_flip_count_exhaustive>)->Name("sign_flip_exhaustive/serial")->Arg(16);
BENCHMARK(sign_flip_exhaustive<k::parallel::sign_flip_count_exhaustive>)->Name("sign_flip_exhaustive/parallel")->Arg(16);

BENCHMARK_MAIN();
