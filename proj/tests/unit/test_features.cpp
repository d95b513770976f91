#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "favheat/error.hpp"
#include "favheat/features.hpp"

using namespace favheat;
using namespace favheat::features;
using raster::Raster;

namespace {

constexpr double kRadToDeg = 180.0 / std::numbers::pi;

Raster plane(int n, double a, double b, double c, double pixel = 1.0) {
    std::vector<double> v(static_cast<std::size_t>(n) * n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            const double x = (j + 0.5) * pixel;
            const double y = (n - i - 0.5) * pixel;
            v[static_cast<std::size_t>(i) * n + j] = a * x + b * y + c;
        }
    }
    return Raster(n, n, {0, n * pixel}, pixel, -9999, v);
}

Raster filled(int rows, int cols, double value, double pixel = 30.0) {
    return Raster(rows, cols, {0, rows * pixel}, pixel, -9999,
                  std::vector<double>(static_cast<std::size_t>(rows) * cols, value));
}

// Direct -sum p log2 p over a bin-count histogram.
double entropy_oracle(const std::vector<int>& counts) {
    double total = 0.0;
    for (int c : counts) total += c;
    double h = 0.0;
    for (int c : counts) {
        if (c > 0) h -= (c / total) * std::log2(c / total);
    }
    return h;
}

FeatureTable table_of(const std::vector<std::array<double, kFeatureCount>>& rows) {
    FeatureTable t;
    int i = 0;
    for (const auto& r : rows) t.rows.push_back({{0, i++}, "c", FeatureVector::from_array(r)});
    return t;
}

}  // namespace

TEST_CASE("feature order is fixed") {
    CHECK(kFeatureNames[0] == "ndvi");
    CHECK(kFeatureNames[2] == "slope");
    CHECK(kFeatureNames[5] == "road_length");
    CHECK(kFeatureNames[8] == "max_conn");
    FeatureVector v;
    v.entropy = 2;
    v.min_conn = 7;
    const auto a = v.to_array();
    CHECK(a[1] == 2);
    CHECK(a[7] == 7);
    CHECK(FeatureVector::from_array(a).min_conn == 7);
}

TEST_CASE("compute_ndvi") {
    const Raster red(1, 4, {0, 1}, 1, -1, {5, 0, 0, -1});
    const Raster nir(1, 4, {0, 1}, 1, -1, {5, 8, 0, 3});
    const Raster n = compute_ndvi(red, nir);
    CHECK(n.at(0, 0) == 0.0);
    CHECK(n.at(0, 1) == 1.0);
    CHECK_FALSE(n.valid(2));
    CHECK_FALSE(n.valid(3));
    CHECK(n.nodata() == kDerivedNodata);
    CHECK_THROWS_AS(compute_ndvi(red, filled(2, 2, 1.0)), ValidationError);
}

TEST_CASE("shannon_entropy") {
    const std::vector<double> constant(50, 3.0);
    CHECK(shannon_entropy(constant, 32, 0.0, 10.0) == 0.0);
    const std::vector<double> two{0.5, 0.5, 9.5, 9.5};
    CHECK(shannon_entropy(two, 32, 0.0, 10.0) == 1.0);
    std::vector<double> four;
    for (int b = 0; b < 4; ++b) four.insert(four.end(), 3, b + 0.5);
    CHECK(shannon_entropy(four, 4, 0.0, 4.0) == 2.0);
    CHECK(shannon_entropy(four, 4, 0.0, 4.0) == entropy_oracle({3, 3, 3, 3}));
    CHECK_THROWS_AS(shannon_entropy(std::vector<double>{}, 32, 0.0, 1.0), ValidationError);
    CHECK_THROWS_AS(shannon_entropy(two, 32, 1.0, 1.0), ValidationError);
    // out-of-range values clamp to the end bins
    CHECK(shannon_entropy(std::vector<double>{-5.0, 0.1, 20.0, 9.9}, 2, 0.0, 10.0) == 1.0);
}

TEST_CASE("shannon_entropy matches a histogram oracle, is bounded and permutation invariant") {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0.0, 100.0);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> v(1 + rng() % 300);
        for (auto& x : v) x = u(rng);
        const int bins = 1 + static_cast<int>(rng() % 40);
        std::vector<int> counts(static_cast<std::size_t>(bins), 0);
        for (double x : v) {
            const auto b = std::min(bins - 1, static_cast<int>(std::floor(x / 100.0 * bins)));
            ++counts[static_cast<std::size_t>(b)];
        }
        const double h = shannon_entropy(v, bins, 0.0, 100.0);
        CHECK(h == doctest::Approx(entropy_oracle(counts)).epsilon(1e-12));
        CHECK(h <= std::log2(bins) + 1e-12);
        std::shuffle(v.begin(), v.end(), rng);
        CHECK(shannon_entropy(v, bins, 0.0, 100.0) == doctest::Approx(h).epsilon(1e-14));
    }
}

TEST_CASE("compute_slope") {
    const Raster flat = filled(5, 5, 12.0, 1.0);
    const Raster s0 = compute_slope(flat);
    CHECK(s0.at(2, 2) == 0.0);
    CHECK_FALSE(s0.valid(s0.index(0, 0)));
    CHECK_FALSE(s0.valid(s0.index(4, 2)));

    CHECK(compute_slope(plane(5, 1.0, 0.0, 0.0)).at(2, 2) == doctest::Approx(45.0).epsilon(1e-12));
    CHECK(std::abs(compute_slope(plane(5, 0.5, 0.0, 0.0)).at(2, 2) - std::atan(0.5) * kRadToDeg) <= 1e-9);
    // gradient along y, 30 m pixels
    CHECK(std::abs(compute_slope(plane(6, 0.0, -0.3, 4.0, 30.0)).at(3, 3) - std::atan(0.3) * kRadToDeg) <= 1e-9);

    CHECK_THROWS_AS(compute_slope(filled(2, 5, 1.0)), ValidationError);
}

TEST_CASE("slope ignores an offset and scales with the gradient") {
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> u(0.0, 10.0);
    std::vector<double> v(64);
    for (auto& x : v) x = u(rng);
    const Raster dem(8, 8, {0, 240}, 30, -9999, v);
    std::vector<double> shifted = v;
    for (auto& x : shifted) x += 1234.5;
    const Raster dem_shifted(8, 8, {0, 240}, 30, -9999, shifted);
    const Raster a = compute_slope(dem), b = compute_slope(dem_shifted);
    const Raster ca = compute_convexity(dem), cb = compute_convexity(dem_shifted);
    for (int i = 1; i < 7; ++i) {
        for (int j = 1; j < 7; ++j) {
            CHECK(a.at(i, j) == doctest::Approx(b.at(i, j)).epsilon(1e-9));
            CHECK(ca.at(i, j) == doctest::Approx(cb.at(i, j)).epsilon(1e-9));
        }
    }
    for (double deg : {5.0, 20.0, 40.0}) {
        const double t = std::tan(deg / kRadToDeg);
        const double doubled = compute_slope(plane(5, 2.0 * t, 0.0, 0.0)).at(2, 2);
        CHECK(doubled == doctest::Approx(std::atan(2.0 * t) * kRadToDeg).epsilon(1e-12));
    }
}

TEST_CASE("slope marks pixels next to nodata") {
    Raster dem = plane(5, 1.0, 0.0, 0.0);
    dem.at(1, 1) = dem.nodata();
    const Raster s = compute_slope(dem);
    CHECK_FALSE(s.valid(s.index(2, 2)));
    CHECK(s.valid(s.index(3, 3)));
}

TEST_CASE("compute_convexity") {
    CHECK(std::abs(compute_convexity(plane(5, 0.7, -1.3, 9.0)).at(2, 2)) <= 1e-12);
    Raster peak = filled(3, 3, 0.0, 1.0);
    peak.at(1, 1) = 1.0;
    CHECK(compute_convexity(peak).at(1, 1) == 1.0);
    Raster pit = filled(3, 3, 1.0, 1.0);
    pit.at(1, 1) = 0.0;
    CHECK(compute_convexity(pit).at(1, 1) == -1.0);
}

TEST_CASE("assemble_features") {
    // one 150 m cell over 30 m pixels; a second cell with no gray data
    const Raster ndvi = filled(5, 10, 0.3);
    Raster gray = filled(5, 10, 100.0);
    for (int i = 0; i < 5; ++i) {
        for (int j = 5; j < 10; ++j) gray.at(i, j) = gray.nodata();
    }
    const Raster slope = filled(5, 10, 7.0);
    const Raster conv = filled(5, 10, -0.5);
    std::vector<geo::GridCell> cells(2);
    cells[0].cell_id = {0, 0};
    cells[0].bbox = {0, 0, 150, 150};
    cells[0].complex_id = "X";
    cells[1].cell_id = {0, 1};
    cells[1].bbox = {150, 0, 300, 150};
    cells[1].complex_id = "X";
    std::map<geo::CellId, roadnet::RoadMetrics> roads;
    const FeatureTable t = assemble_features(cells, ndvi, gray, slope, conv, roads);
    REQUIRE(t.rows.size() == 1);
    const auto& f = t.rows[0].features;
    CHECK(f.ndvi == doctest::Approx(0.3));
    CHECK(f.entropy == 0.0);
    CHECK(f.slope == 7.0);
    CHECK(f.convexity == -0.5);
    CHECK(f.nodes == 0.0);
    CHECK(f.road_length == 0.0);
    CHECK(f.mean_conn == 0.0);
    CHECK(t.rows[0].complex_id == "X");
    REQUIRE(t.dropped.size() == 1);
    CHECK(t.dropped[0].cell_id == geo::CellId{0, 1});
    CHECK_FALSE(t.dropped[0].reason.empty());
}

TEST_CASE("assemble_features accepts mixed resolutions") {
    const Raster ndvi = filled(15, 15, 0.2, 10.0);
    const Raster gray = filled(5, 5, 3.0, 30.0);
    const Raster slope = filled(5, 5, 2.0, 30.0);
    const Raster conv = filled(3, 3, 0.0, 50.0);
    std::vector<geo::GridCell> cells(1);
    cells[0].bbox = {0, 0, 150, 150};
    cells[0].complex_id = "A";
    std::map<geo::CellId, roadnet::RoadMetrics> roads{{{0, 0}, {2, 100, 1, 1, 1}}};
    const FeatureTable t = assemble_features(cells, ndvi, gray, slope, conv, roads);
    REQUIRE(t.rows.size() == 1);
    CHECK(t.rows[0].features.ndvi == doctest::Approx(0.2));
    CHECK(t.rows[0].features.road_length == 100.0);
    CHECK(t.rows[0].features.nodes == 2.0);
}

TEST_CASE("normalize z-score") {
    std::mt19937_64 rng(21);
    std::normal_distribution<double> g(5.0, 3.0);
    std::vector<std::array<double, kFeatureCount>> rows(40);
    for (auto& r : rows) {
        for (auto& x : r) x = g(rng);
        r[4] = 2.0;  // constant column
    }
    rows[0][0] = 0.0;
    const FeatureTable n = normalize(table_of(rows));
    REQUIRE(n.normalization.has_value());
    CHECK(n.normalization->constant[4]);
    CHECK_FALSE(n.normalization->constant[0]);
    for (std::size_t f = 0; f < kFeatureCount; ++f) {
        double mean = 0.0, sq = 0.0;
        for (const auto& r : n.rows) mean += r.features.to_array()[f];
        mean /= static_cast<double>(n.rows.size());
        for (const auto& r : n.rows) sq += std::pow(r.features.to_array()[f] - mean, 2);
        const double sd = std::sqrt(sq / static_cast<double>(n.rows.size()));
        CHECK(std::abs(mean) <= 1e-9);
        if (f == 4) {
            for (const auto& r : n.rows) CHECK(r.features.nodes == 0.0);
        } else {
            CHECK(std::abs(sd - 1.0) <= 1e-9);
        }
        // inverse mapping restores the raw value
        CHECK(n.normalization->invert(f, n.rows[3].features.to_array()[f]) ==
              doctest::Approx(rows[3][f]).epsilon(1e-12));
    }

    SUBCASE("idempotent") {
        const FeatureTable twice = normalize(n);
        for (std::size_t i = 0; i < n.rows.size(); ++i) {
            const auto a = n.rows[i].features.to_array();
            const auto b = twice.rows[i].features.to_array();
            for (std::size_t f = 0; f < kFeatureCount; ++f) CHECK(std::abs(a[f] - b[f]) < 1e-9);
        }
        // composed parameters still map raw values to the current ones
        const FeatureTable re = apply_normalization(table_of(rows), *twice.normalization);
        for (std::size_t f = 0; f < kFeatureCount; ++f) {
            CHECK(re.rows[5].features.to_array()[f] ==
                  doctest::Approx(twice.rows[5].features.to_array()[f]).epsilon(1e-9));
        }
    }
}

TEST_CASE("normalize two rows and errors") {
    std::array<double, kFeatureCount> a{}, b{};
    b[0] = 10.0;
    const FeatureTable n = normalize(table_of({a, b}));
    CHECK(n.rows[0].features.ndvi == -1.0);
    CHECK(n.rows[1].features.ndvi == 1.0);
    CHECK_THROWS_AS(normalize(table_of({a})), ValidationError);
}

TEST_CASE("normalize min-max") {
    std::array<double, kFeatureCount> a{}, b{}, c{};
    a[1] = 2.0;
    b[1] = 4.0;
    c[1] = 6.0;
    const FeatureTable n = normalize(table_of({a, b, c}), NormalizationMethod::MinMax);
    CHECK(n.rows[0].features.entropy == 0.0);
    CHECK(n.rows[1].features.entropy == 0.5);
    CHECK(n.rows[2].features.entropy == 1.0);
    CHECK(n.normalization->constant[0]);
    CHECK(parse_method("minmax") == NormalizationMethod::MinMax);
    CHECK(method_name(NormalizationMethod::ZScore) == "zscore");
    CHECK_THROWS_AS(parse_method("robust"), ValidationError);
}
