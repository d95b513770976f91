#include <random>
#include <string>

#include <benchmark/benchmark.h>

#include "favheat/geometry.hpp"
#include "favheat/roadnet.hpp"

using namespace favheat;

namespace {

std::vector<geo::FavelaRecord> scattered(int n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> pos(0.0, 6000.0), side(30.0, 250.0);
    std::vector<geo::FavelaRecord> out;
    for (int i = 0; i < n; ++i) {
        const double x = pos(rng), y = pos(rng), w = side(rng), h = side(rng);
        geo::PolygonGeom p;
        p.exterior = {{x, y}, {x + w, y}, {x + w, y + h}, {x, y + h}, {x, y}};
        out.push_back({"F" + std::to_string(i), {p}});
    }
    return out;
}

}  // namespace

static void BM_MergeFavelas(benchmark::State& state) {
    const auto records = scattered(static_cast<int>(state.range(0)), 3);
    for (auto _ : state) benchmark::DoNotOptimize(geo::merge_favelas(records, 20.0).size());
}
BENCHMARK(BM_MergeFavelas)->Arg(200)->Arg(1000)->Unit(benchmark::kMillisecond);

static void BM_Coverage(benchmark::State& state) {
    const auto complexes = geo::merge_favelas(scattered(1000, 4), 20.0);
    const geo::Grid grid = geo::build_grid({0, 0, 6300, 6300}, 150.0);
    for (auto _ : state) {
        benchmark::DoNotOptimize(geo::compute_coverage(grid, complexes, static_cast<unsigned>(state.range(0))).size());
    }
}
BENCHMARK(BM_Coverage)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);

static void BM_RoadNetwork(benchmark::State& state) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 3000.0);
    std::vector<roadnet::Polyline> lines;
    for (int i = 0; i < state.range(0); ++i) lines.push_back({{u(rng), u(rng)}, {u(rng), u(rng)}, {u(rng), u(rng)}});
    for (auto _ : state) benchmark::DoNotOptimize(roadnet::build_network(lines).edges.size());
}
BENCHMARK(BM_RoadNetwork)->Arg(200)->Arg(1000)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
