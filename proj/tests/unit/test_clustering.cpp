#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>

#include "favheat/clustering.hpp"
#include "favheat/error.hpp"

using namespace favheat;
using namespace favheat::clustering;

namespace {

PointSet points_1d(std::initializer_list<double> xs) {
    PointSet p(1);
    for (double x : xs) p.push_back(std::vector<double>{x});
    return p;
}

PointSet blobs(std::mt19937_64& rng, std::size_t n, std::size_t dim, int centers, double spread) {
    std::normal_distribution<double> g(0.0, spread);
    std::uniform_real_distribution<double> c(-10.0, 10.0);
    std::vector<std::vector<double>> mu(static_cast<std::size_t>(centers), std::vector<double>(dim));
    for (auto& m : mu) {
        for (auto& v : m) v = c(rng);
    }
    PointSet p(dim);
    std::vector<double> x(dim);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& m = mu[i % mu.size()];
        for (std::size_t d = 0; d < dim; ++d) x[d] = m[d] + g(rng);
        p.push_back(x);
    }
    return p;
}

Constraints random_groups(std::mt19937_64& rng, std::size_t n, std::size_t n_groups) {
    Constraints c;
    for (std::size_t i = 0; i < n; ++i) c.group.push_back(i < n_groups ? i : rng() % n_groups);
    std::shuffle(c.group.begin(), c.group.end(), rng);
    return c;
}

bool monochromatic(const Constraints& c, const std::vector<int>& labels) {
    std::map<std::size_t, int> seen;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        auto [it, fresh] = seen.emplace(c.group[i], labels[i]);
        if (!fresh && it->second != labels[i]) return false;
    }
    return true;
}

// Brute-force silhouette straight from the definition.
double silhouette_oracle(const PointSet& p, const std::vector<int>& labels) {
    const std::size_t n = p.size();
    const int k = *std::max_element(labels.begin(), labels.end()) + 1;
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double a_sum = 0.0;
        int a_n = 0;
        double b = INFINITY;
        for (int c = 0; c < k; ++c) {
            double s = 0.0;
            int m = 0;
            for (std::size_t j = 0; j < n; ++j) {
                if (labels[j] != c || j == i) continue;
                double d2 = 0.0;
                for (std::size_t d = 0; d < p.dim(); ++d) d2 += (p[i][d] - p[j][d]) * (p[i][d] - p[j][d]);
                s += std::sqrt(d2);
                ++m;
            }
            if (c == labels[i]) {
                a_sum = s;
                a_n = m;
            } else if (m > 0) {
                b = std::min(b, s / m);
            }
        }
        if (a_n == 0) continue;
        const double a = a_sum / a_n;
        const double den = std::max(a, b);
        total += den > 0.0 ? (b - a) / den : 0.0;
    }
    return total / static_cast<double>(n);
}

// Pair-counting form of the adjusted Rand index over all item pairs.
double ari_pair_oracle(const std::vector<int>& a, const std::vector<int>& b) {
    double n11 = 0, n10 = 0, n01 = 0, n00 = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        for (std::size_t j = i + 1; j < a.size(); ++j) {
            const bool sa = a[i] == a[j], sb = b[i] == b[j];
            if (sa && sb) ++n11;
            else if (sa) ++n10;
            else if (sb) ++n01;
            else ++n00;
        }
    }
    const double den = (n00 + n01) * (n01 + n11) + (n00 + n10) * (n10 + n11);
    return den == 0.0 ? 1.0 : 2.0 * (n00 * n11 - n01 * n10) / den;
}

}  // namespace

TEST_CASE("inertia examples") {
    const PointSet p = points_1d({3, 3});
    const PointSet c = points_1d({3});
    const std::vector<int> zero{0, 0};
    CHECK(inertia(p, zero, c) == 0.0);
    CHECK(inertia(points_1d({2}), std::vector<int>{0}, points_1d({0})) == 4.0);
    CHECK(inertia(points_1d({-1, 1}), zero, points_1d({0})) == 2.0);
}

TEST_CASE("k = 1 gives the global mean") {
    const PointSet p = points_1d({1, 2, 3, 10});
    KMeansOptions o;
    o.k = 1;
    const ClusterModel m = cop_kmeans(p, Constraints::unconstrained(4), o);
    CHECK(m.centroids[0][0] == 4.0);
    CHECK(m.inertia == doctest::Approx(9 + 4 + 1 + 36));
    for (int l : m.labels) CHECK(l == 0);
}

TEST_CASE("grouped point follows its group against its nearest centroid") {
    // centroids A = 0 and B = 10; point 2 is nearest A but shares a group with
    // points 0 and 1, already placed in B
    const PointSet p = points_1d({9, 11, 4, 0, 1});
    Constraints c;
    c.group = {7, 7, 7, 8, 9};
    const ClusterModel m = cop_kmeans_from(p, c, points_1d({0, 10}), 1);
    CHECK(m.labels == std::vector<int>{1, 1, 1, 0, 0});
    // unconstrained, the point would join A
    const ClusterModel free = cop_kmeans_from(p, Constraints::unconstrained(5), points_1d({0, 10}), 1);
    CHECK(free.labels[2] == 0);
}

TEST_CASE("cannot-link pairs are respected") {
    const PointSet p = points_1d({0, 0.1, 10});
    Constraints c = Constraints::unconstrained(3);
    c.cannot_link = {{0, 1}};
    const ClusterModel m = cop_kmeans_from(p, c, points_1d({0, 10}), 5);
    CHECK(m.labels[0] != m.labels[1]);
    Constraints bad;
    bad.group = {0, 0, 1};
    bad.cannot_link = {{0, 1}};
    CHECK_THROWS_AS(cop_kmeans_from(p, bad, points_1d({0, 10}), 5), InfeasibleError);
}

TEST_CASE("infeasible and invalid requests") {
    const PointSet p = points_1d({0, 1, 2, 3});
    Constraints two;
    two.group = {0, 0, 1, 1};
    KMeansOptions o;
    o.k = 3;
    CHECK_THROWS_AS(cop_kmeans(p, two, o), InfeasibleError);
    o.k = 2;
    o.restarts = 0;
    CHECK_THROWS_AS(cop_kmeans(p, two, o), ValidationError);
    o.restarts = 1;
    const PointSet nan = points_1d({0, NAN, 1, 2});
    CHECK_THROWS_AS(cop_kmeans(nan, Constraints::unconstrained(4), o), ValidationError);
}

TEST_CASE("every returned model keeps must-link groups together") {
    std::mt19937_64 rng(2024);
    for (int trial = 0; trial < 60; ++trial) {
        const std::size_t n = 10 + rng() % 150;
        const int k = 1 + static_cast<int>(rng() % 5);
        const std::size_t groups = static_cast<std::size_t>(k) + rng() % (n - static_cast<std::size_t>(k) + 1);
        const PointSet p = blobs(rng, n, 1 + rng() % 4, 1 + static_cast<int>(rng() % 5), 2.0);
        const Constraints c = random_groups(rng, n, groups);
        KMeansOptions o;
        o.k = k;
        o.seed = rng();
        o.restarts = 3;
        const ClusterModel m = cop_kmeans(p, c, o);
        CHECK(monochromatic(c, m.labels));
        std::set<int> used(m.labels.begin(), m.labels.end());
        CHECK(used.size() == static_cast<std::size_t>(k));
        CHECK(m.inertia >= 0.0);
    }
}

TEST_CASE("seeded runs are deterministic and thread-count independent") {
    std::mt19937_64 rng(5);
    const PointSet p = blobs(rng, 300, 3, 4, 1.5);
    const Constraints c = random_groups(rng, 300, 120);
    KMeansOptions o;
    o.k = 4;
    o.seed = 77;
    o.threads = 1;
    const ClusterModel a = cop_kmeans(p, c, o);
    o.threads = 8;
    const ClusterModel b = cop_kmeans(p, c, o);
    CHECK(a.labels == b.labels);
    CHECK(a.centroids == b.centroids);
    CHECK(a.inertia == b.inertia);
    CHECK(a.restart_inertias == b.restart_inertias);
    CHECK(a.restart_inertias.size() == 10);
    CHECK(a.inertia == *std::min_element(a.restart_inertias.begin(), a.restart_inertias.end()));
}

TEST_CASE("inertia does not increase across iterations without shared groups") {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 40; ++trial) {
        const std::size_t n = 30 + rng() % 200;
        const PointSet p = blobs(rng, n, 2, 6, 3.0);
        const Constraints c = Constraints::unconstrained(n);
        auto engine = restart_engine(rng(), 0);
        const int k = 2 + static_cast<int>(rng() % 5);
        const ClusterModel m = cop_kmeans_from(p, c, kmeanspp_group_init(p, c, k, engine));
        for (std::size_t i = 1; i < m.inertia_trace.size(); ++i) {
            CHECK(m.inertia_trace[i] <= m.inertia_trace[i - 1] + 1e-9);
        }
    }
}

TEST_CASE("k-means++ init over group means") {
    // two groups with means 0 and 10
    const PointSet p = points_1d({-1, 1, 9, 11});
    Constraints c;
    c.group = {0, 0, 1, 1};
    auto rng = restart_engine(1, 0);
    const PointSet init = kmeanspp_group_init(p, c, 2, rng);
    std::set<double> got{init[0][0], init[1][0]};
    CHECK(got == std::set<double>{0.0, 10.0});
    auto rng2 = restart_engine(1, 0);
    CHECK(kmeanspp_group_init(p, c, 2, rng2) == init);
}

TEST_CASE("uniform01 is in [0, 1) and stable") {
    auto a = restart_engine(42, 3);
    auto b = restart_engine(42, 3);
    for (int i = 0; i < 1000; ++i) {
        const double u = uniform01(a);
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        CHECK(u == uniform01(b));
    }
    auto c = restart_engine(42, 4);
    auto d = restart_engine(42, 3);
    CHECK(c() != d());
}

TEST_CASE("silhouette examples") {
    const PointSet p = points_1d({0, 0.1, 10, 10.1});
    const std::vector<int> labels{0, 0, 1, 1};
    const double expected = ((10.05 - 0.1) / 10.05 + (9.95 - 0.1) / 9.95) / 2.0;
    CHECK(silhouette_mean(p, labels) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(silhouette_mean(p, labels) == doctest::Approx(0.990).epsilon(1e-3));
    // singleton cluster contributes 0
    const PointSet q = points_1d({0, 1, 50});
    const std::vector<int> ql{0, 0, 1};
    const double s = silhouette_mean(q, ql);
    CHECK(s == doctest::Approx(silhouette_oracle(q, ql)).epsilon(1e-12));
    CHECK_THROWS_AS(silhouette_mean(p, std::vector<int>{0, 0, 0, 0}), ValidationError);
    CHECK_THROWS_AS(silhouette_mean(p, std::vector<int>{0, 0, 2, 2}), ValidationError);
}

TEST_CASE("silhouette matches the brute-force oracle, including coincident points") {
    std::mt19937_64 rng(66);
    for (int trial = 0; trial < 15; ++trial) {
        const std::size_t n = 3 + rng() % 120;
        const int k = 2 + static_cast<int>(rng() % 4);
        PointSet p = blobs(rng, n, 1 + rng() % 3, k, trial % 3 == 0 ? 0.0 : 1.0);
        std::vector<int> labels(n);
        for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<int>(i % static_cast<std::size_t>(k));
        if (n < static_cast<std::size_t>(k)) continue;
        CHECK(std::abs(silhouette_mean(p, labels, 4) - silhouette_oracle(p, labels)) <= 1e-9);
    }
}

TEST_CASE("relabeling leaves inertia, silhouette and ARI unchanged") {
    std::mt19937_64 rng(90);
    const PointSet p = blobs(rng, 80, 2, 3, 1.0);
    KMeansOptions o;
    o.k = 3;
    const ClusterModel m = cop_kmeans(p, Constraints::unconstrained(80), o);
    const int perm[] = {2, 0, 1};
    std::vector<int> relabeled;
    for (int l : m.labels) relabeled.push_back(perm[l]);
    PointSet moved(2);
    for (int c = 0; c < 3; ++c) {
        const int source = static_cast<int>(std::find(perm, perm + 3, c) - perm);
        moved.push_back(m.centroids[static_cast<std::size_t>(source)]);
    }
    CHECK(inertia(p, relabeled, moved) == doctest::Approx(m.inertia).epsilon(1e-14));
    CHECK(silhouette_mean(p, relabeled) == doctest::Approx(silhouette_mean(p, m.labels)).epsilon(1e-14));
    std::vector<int> reference(80);
    for (std::size_t i = 0; i < 80; ++i) reference[i] = static_cast<int>(i % 3);
    CHECK(adjusted_rand_index(relabeled, reference) ==
          doctest::Approx(adjusted_rand_index(m.labels, reference)).epsilon(1e-14));
}

TEST_CASE("adjusted_rand_index") {
    const std::vector<int> a{0, 0, 1, 1, 2, 2};
    CHECK(adjusted_rand_index(a, a) == 1.0);
    CHECK(adjusted_rand_index(a, std::vector<int>{5, 5, 3, 3, 9, 9}) == 1.0);
    const std::vector<int> b{0, 0, 0, 1, 1, 2};
    CHECK(adjusted_rand_index(a, b) == doctest::Approx(ari_pair_oracle(a, b)).epsilon(1e-12));
    CHECK_THROWS_AS(adjusted_rand_index(a, std::vector<int>{0, 1}), ValidationError);

    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 2 + rng() % 60;
        std::vector<int> x(n), y(n);
        for (std::size_t i = 0; i < n; ++i) {
            x[i] = static_cast<int>(rng() % 4);
            y[i] = static_cast<int>(rng() % 3);
        }
        CHECK(adjusted_rand_index(x, y) == doctest::Approx(ari_pair_oracle(x, y)).epsilon(1e-9));
    }
}

TEST_CASE("select_k") {
    std::mt19937_64 rng(12);
    const PointSet p = blobs(rng, 60, 2, 3, 0.5);
    KMeansOptions o;
    const KSelectionCurve curve = select_k(p, Constraints::unconstrained(60), 1, 6, o);
    REQUIRE(curve.entries.size() == 6);
    CHECK_FALSE(curve.entries[0].silhouette.has_value());
    for (std::size_t i = 1; i < curve.entries.size(); ++i) {
        CHECK(curve.entries[i].silhouette.has_value());
        CHECK(curve.entries[i].inertia <= curve.entries[i - 1].inertia + 1e-6);
    }
    int hints = 0;
    for (const auto& e : curve.entries) hints += e.elbow_hint ? 1 : 0;
    CHECK(hints == 1);
    REQUIRE(curve.elbow_k.has_value());

    const PointSet singles = points_1d({0, 3, 7, 12, 20});
    const KSelectionCurve full = select_k(singles, Constraints::unconstrained(5), 2, 5, o);
    CHECK(full.entries.back().inertia == 0.0);
    CHECK_THROWS_AS(select_k(singles, Constraints::unconstrained(5), 2, 6, o), InfeasibleError);
}

TEST_CASE("constraints from keys") {
    const std::vector<std::string> keys{"b", "a", "b", "c"};
    const Constraints c = Constraints::from_keys(keys);
    CHECK(c.group == std::vector<std::size_t>{1, 0, 1, 2});
    CHECK(distinct_groups(c) == 3);
}
