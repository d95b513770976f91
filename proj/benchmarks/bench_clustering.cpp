#include <random>

#include <benchmark/benchmark.h>

#include "favheat/clustering.hpp"

using namespace favheat::clustering;

namespace {

PointSet blobs(std::size_t n, std::size_t dim, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    PointSet p(dim);
    std::vector<double> x(dim);
    for (std::size_t i = 0; i < n; ++i) {
        const double c = static_cast<double>(i % 4) * 5.0;
        for (auto& v : x) v = c + g(rng);
        p.push_back(x);
    }
    return p;
}

Constraints pairs(std::size_t n) {
    Constraints c;
    for (std::size_t i = 0; i < n; ++i) c.group.push_back(i / 2);
    return c;
}

}  // namespace

static void BM_CopKMeans(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const PointSet p = blobs(n, 9, 1);
    const Constraints c = pairs(n);
    KMeansOptions o;
    o.k = 4;
    o.restarts = 10;
    o.threads = static_cast<unsigned>(state.range(1));
    for (auto _ : state) benchmark::DoNotOptimize(cop_kmeans(p, c, o).inertia);
    state.SetItemsProcessed(state.iterations() * static_cast<long>(n));
}
BENCHMARK(BM_CopKMeans)->Args({500, 1})->Args({2000, 1})->Args({2000, 4})->Unit(benchmark::kMillisecond);

static void BM_Silhouette(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const PointSet p = blobs(n, 9, 2);
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<int>(i % 4);
    for (auto _ : state) {
        benchmark::DoNotOptimize(silhouette_mean(p, labels, static_cast<unsigned>(state.range(1))));
    }
}
BENCHMARK(BM_Silhouette)->Args({500, 1})->Args({2000, 1})->Args({2000, 4})->Unit(benchmark::kMillisecond);
