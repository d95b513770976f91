#include "favheat/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "favheat/error.hpp"
#include "favheat/parallel.hpp"

namespace favheat::clustering {

PointSet::PointSet(std::size_t n, std::size_t dim, std::vector<double> data)
    : dim_(dim), data_(std::move(data)) {
    if (dim == 0 || data_.size() != n * dim) throw ValidationError("point data does not match n x dim");
}

void PointSet::push_back(std::span<const double> p) {
    if (p.size() != dim_) throw ValidationError("point dimension mismatch");
    data_.insert(data_.end(), p.begin(), p.end());
}

double squared_distance(std::span<const double> a, std::span<const double> b) noexcept {
    double s = 0.0;
    for (std::size_t d = 0; d < a.size(); ++d) {
        const double diff = a[d] - b[d];
        s += diff * diff;
    }
    return s;
}

Constraints Constraints::unconstrained(std::size_t n) {
    Constraints c;
    c.group.resize(n);
    std::iota(c.group.begin(), c.group.end(), 0);
    return c;
}

Constraints Constraints::from_keys(std::span<const std::string> keys) {
    std::map<std::string, std::size_t> index;
    for (const auto& k : keys) index.emplace(k, 0);
    std::size_t next = 0;
    for (auto& [k, v] : index) v = next++;
    Constraints c;
    c.group.reserve(keys.size());
    for (const auto& k : keys) c.group.push_back(index.at(k));
    return c;
}

std::size_t distinct_groups(const Constraints& c) {
    std::vector<std::size_t> g = c.group;
    std::sort(g.begin(), g.end());
    return static_cast<std::size_t>(std::unique(g.begin(), g.end()) - g.begin());
}

std::mt19937_64 restart_engine(std::uint64_t seed, int restart) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu),
                      static_cast<std::uint32_t>(seed >> 32), static_cast<std::uint32_t>(restart)};
    return std::mt19937_64(seq);
}

double uniform01(std::mt19937_64& rng) noexcept {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

namespace {

struct GroupIndex {
    std::vector<std::size_t> ids;                  // distinct group ids, ascending
    std::vector<std::size_t> dense;                // per point, index into ids
    std::vector<std::vector<std::size_t>> members;  // per dense group, point indices ascending
};

GroupIndex index_groups(const Constraints& c, std::size_t n) {
    if (c.group.size() != n) throw ValidationError("must-link group list does not match point count");
    GroupIndex gi;
    gi.ids = c.group;
    std::sort(gi.ids.begin(), gi.ids.end());
    gi.ids.erase(std::unique(gi.ids.begin(), gi.ids.end()), gi.ids.end());
    gi.dense.resize(n);
    gi.members.resize(gi.ids.size());
    for (std::size_t i = 0; i < n; ++i) {
        gi.dense[i] = static_cast<std::size_t>(
            std::lower_bound(gi.ids.begin(), gi.ids.end(), c.group[i]) - gi.ids.begin());
        gi.members[gi.dense[i]].push_back(i);
    }
    return gi;
}

PointSet means_of(const PointSet& points, std::span<const int> labels, int k) {
    const std::size_t dim = points.dim();
    PointSet c(static_cast<std::size_t>(k), dim, std::vector<double>(static_cast<std::size_t>(k) * dim, 0.0));
    std::vector<std::size_t> counts(static_cast<std::size_t>(k), 0);
    for (std::size_t i = 0; i < points.size(); ++i) {
        auto dst = c[static_cast<std::size_t>(labels[i])];
        const auto src = points[i];
        for (std::size_t d = 0; d < dim; ++d) dst[d] += src[d];
        ++counts[static_cast<std::size_t>(labels[i])];
    }
    for (std::size_t j = 0; j < counts.size(); ++j) {
        if (counts[j] == 0) continue;
        for (auto& v : c[j]) v /= static_cast<double>(counts[j]);
    }
    return c;
}

// Assigns each point, in index order, to the nearest centroid that keeps all
// constraints with points already assigned in this pass.
std::vector<int> assign(const PointSet& points, const GroupIndex& gi,
                        const std::vector<std::vector<std::size_t>>& cannot, const PointSet& centroids) {
    const std::size_t n = points.size();
    const std::size_t k = centroids.size();
    std::vector<int> labels(n, -1);
    std::vector<int> group_label(gi.ids.size(), -1);
    std::vector<std::pair<double, std::size_t>> order(k);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t c = 0; c < k; ++c) order[c] = {squared_distance(points[i], centroids[c]), c};
        std::sort(order.begin(), order.end());
        int chosen = -1;
        for (const auto& [dist, c] : order) {
            const int label = static_cast<int>(c);
            const int locked = group_label[gi.dense[i]];
            if (locked >= 0 && locked != label) continue;
            bool blocked = false;
            for (std::size_t j : cannot[i]) {
                if (labels[j] == label) {
                    blocked = true;
                    break;
                }
            }
            if (blocked) continue;
            chosen = label;
            break;
        }
        if (chosen < 0) {
            throw InfeasibleError("no cluster satisfies the constraints of point " + std::to_string(i));
        }
        labels[i] = chosen;
        group_label[gi.dense[i]] = chosen;
    }
    return labels;
}

// Refills empty clusters by moving whole groups; returns whether labels changed.
bool repair_empty(const PointSet& points, const GroupIndex& gi, std::vector<int>& labels, int k) {
    bool changed = false;
    for (int empty = 0; empty < k; ++empty) {
        if (std::find(labels.begin(), labels.end(), empty) != labels.end()) continue;
        const PointSet centroids = means_of(points, labels, k);
        std::vector<std::vector<std::size_t>> groups_in(static_cast<std::size_t>(k));
        for (std::size_t g = 0; g < gi.members.size(); ++g) {
            groups_in[static_cast<std::size_t>(labels[gi.members[g].front()])].push_back(g);
        }
        double best = -1.0;
        std::size_t best_point = 0;
        for (std::size_t i = 0; i < points.size(); ++i) {
            const auto lbl = static_cast<std::size_t>(labels[i]);
            if (groups_in[lbl].size() < 2) continue;
            const double d = squared_distance(points[i], centroids[lbl]);
            if (d > best) {
                best = d;
                best_point = i;
            }
        }
        if (best < 0.0) throw InfeasibleError("cannot refill an empty cluster: too few must-link groups");
        for (std::size_t i : gi.members[gi.dense[best_point]]) labels[i] = empty;
        changed = true;
    }
    return changed;
}

void require_finite(const PointSet& points) {
    for (double v : points.data()) {
        if (!std::isfinite(v)) throw ValidationError("points must be finite");
    }
}

}  // namespace

PointSet kmeanspp_group_init(const PointSet& points, const Constraints& constraints, int k,
                             std::mt19937_64& rng) {
    const GroupIndex gi = index_groups(constraints, points.size());
    const std::size_t n_groups = gi.ids.size();
    if (k < 1 || static_cast<std::size_t>(k) > n_groups) {
        throw InfeasibleError("k = " + std::to_string(k) + " exceeds the " + std::to_string(n_groups) +
                              " distinct must-link groups");
    }
    PointSet means(points.dim());
    std::vector<double> acc(points.dim());
    for (const auto& members : gi.members) {
        std::fill(acc.begin(), acc.end(), 0.0);
        for (std::size_t i : members) {
            const auto p = points[i];
            for (std::size_t d = 0; d < acc.size(); ++d) acc[d] += p[d];
        }
        for (auto& v : acc) v /= static_cast<double>(members.size());
        means.push_back(acc);
    }

    PointSet centers(points.dim());
    std::vector<char> taken(n_groups, 0);
    std::vector<double> d2(n_groups, std::numeric_limits<double>::infinity());
    auto take = [&](std::size_t g) {
        taken[g] = 1;
        centers.push_back(means[g]);
        for (std::size_t h = 0; h < n_groups; ++h) d2[h] = std::min(d2[h], squared_distance(means[h], means[g]));
    };
    take(std::min(n_groups - 1, static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n_groups))));
    while (centers.size() < static_cast<std::size_t>(k)) {
        double total = 0.0;
        for (std::size_t g = 0; g < n_groups; ++g) {
            if (!taken[g]) total += d2[g];
        }
        std::size_t pick = n_groups;
        if (total > 0.0) {
            const double target = uniform01(rng) * total;
            double run = 0.0;
            for (std::size_t g = 0; g < n_groups; ++g) {
                if (taken[g] || d2[g] <= 0.0) continue;
                run += d2[g];
                pick = g;
                if (run > target) break;
            }
        } else {
            // Remaining group means coincide with chosen centers.
            std::vector<std::size_t> free;
            for (std::size_t g = 0; g < n_groups; ++g) {
                if (!taken[g]) free.push_back(g);
            }
            pick = free[std::min(free.size() - 1,
                                 static_cast<std::size_t>(uniform01(rng) * static_cast<double>(free.size())))];
        }
        take(pick);
    }
    return centers;
}

ClusterModel cop_kmeans_from(const PointSet& points, const Constraints& constraints,
                             const PointSet& initial_centroids, int max_iter, double tol) {
    const std::size_t n = points.size();
    const int k = static_cast<int>(initial_centroids.size());
    if (n == 0) throw ValidationError("cannot cluster an empty point set");
    if (initial_centroids.dim() != points.dim()) throw ValidationError("centroid dimension mismatch");
    if (max_iter < 1) throw ValidationError("max_iter must be at least 1");
    const GroupIndex gi = index_groups(constraints, n);
    if (k < 1 || static_cast<std::size_t>(k) > gi.ids.size()) {
        throw InfeasibleError("k = " + std::to_string(k) + " exceeds the " + std::to_string(gi.ids.size()) +
                              " distinct must-link groups");
    }
    std::vector<std::vector<std::size_t>> cannot(n);
    for (const auto& [a, b] : constraints.cannot_link) {
        if (a >= n || b >= n) throw ValidationError("cannot-link index out of range");
        if (gi.dense[a] == gi.dense[b]) {
            throw InfeasibleError("cannot-link pair lies inside one must-link group");
        }
        cannot[a].push_back(b);
        cannot[b].push_back(a);
    }

    ClusterModel model;
    model.k = k;
    PointSet centroids = initial_centroids;
    for (int iter = 1; iter <= max_iter; ++iter) {
        std::vector<int> labels = assign(points, gi, cannot, centroids);
        repair_empty(points, gi, labels, k);
        PointSet next = means_of(points, labels, k);
        double shift = 0.0;
        for (std::size_t c = 0; c < next.size(); ++c) {
            shift = std::max(shift, std::sqrt(squared_distance(next[c], centroids[c])));
        }
        centroids = std::move(next);
        model.labels = std::move(labels);
        model.n_iter = iter;
        model.inertia_trace.push_back(inertia(points, model.labels, centroids));
        if (shift < tol) {
            model.converged = true;
            break;
        }
    }
    model.centroids = std::move(centroids);
    model.inertia = model.inertia_trace.back();
    return model;
}

ClusterModel cop_kmeans(const PointSet& points, const Constraints& constraints, const KMeansOptions& options) {
    if (options.restarts < 1) throw ValidationError("restarts must be at least 1");
    if (!(options.tol >= 0.0)) throw ValidationError("tol must be non-negative");
    if (options.k < 1) throw ValidationError("k must be at least 1");
    if (points.empty()) throw ValidationError("cannot cluster an empty point set");
    require_finite(points);
    const std::size_t groups = distinct_groups(constraints);
    if (constraints.group.size() != points.size()) {
        throw ValidationError("must-link group list does not match point count");
    }
    if (static_cast<std::size_t>(options.k) > groups) {
        throw InfeasibleError("k = " + std::to_string(options.k) + " exceeds the " + std::to_string(groups) +
                              " distinct must-link groups");
    }

    std::vector<std::optional<ClusterModel>> runs(static_cast<std::size_t>(options.restarts));
    parallel_for(runs.size(), options.threads, [&](std::size_t r) {
        auto rng = restart_engine(options.seed, static_cast<int>(r));
        const PointSet init = kmeanspp_group_init(points, constraints, options.k, rng);
        runs[r] = cop_kmeans_from(points, constraints, init, options.max_iter, options.tol);
    });

    std::size_t best = 0;
    std::vector<double> inertias;
    for (std::size_t r = 0; r < runs.size(); ++r) {
        inertias.push_back(runs[r]->inertia);
        if (runs[r]->inertia < runs[best]->inertia) best = r;
    }
    ClusterModel model = std::move(*runs[best]);
    model.seed = options.seed;
    model.restarts = options.restarts;
    model.best_restart = static_cast<int>(best);
    model.restart_inertias = std::move(inertias);
    return model;
}

double inertia(const PointSet& points, std::span<const int> labels, const PointSet& centroids) {
    if (labels.size() != points.size()) throw ValidationError("label count does not match point count");
    double total = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= centroids.size()) {
            throw ValidationError("label out of range");
        }
        total += squared_distance(points[i], centroids[static_cast<std::size_t>(labels[i])]);
    }
    return total;
}

double silhouette_mean(const PointSet& points, std::span<const int> labels, unsigned threads) {
    const std::size_t n = points.size();
    if (labels.size() != n) throw ValidationError("label count does not match point count");
    if (n < 3) throw ValidationError("silhouette needs at least 3 points");
    int max_label = -1;
    for (int l : labels) {
        if (l < 0) throw ValidationError("negative label");
        max_label = std::max(max_label, l);
    }
    const std::size_t k = static_cast<std::size_t>(max_label) + 1;
    if (k < 2) throw ValidationError("silhouette is undefined for a single cluster");
    std::vector<std::size_t> sizes(k, 0);
    for (int l : labels) ++sizes[static_cast<std::size_t>(l)];
    for (std::size_t c = 0; c < k; ++c) {
        if (sizes[c] == 0) throw ValidationError("cluster " + std::to_string(c) + " is empty");
    }

    std::vector<double> scores(n, 0.0);
    parallel_for(n, threads, [&](std::size_t i) {
        const auto own = static_cast<std::size_t>(labels[i]);
        if (sizes[own] == 1) return;
        std::vector<double> sums(k, 0.0);
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            sums[static_cast<std::size_t>(labels[j])] += std::sqrt(squared_distance(points[i], points[j]));
        }
        const double a = sums[own] / static_cast<double>(sizes[own] - 1);
        double b = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < k; ++c) {
            if (c != own) b = std::min(b, sums[c] / static_cast<double>(sizes[c]));
        }
        const double denom = std::max(a, b);
        scores[i] = denom > 0.0 ? (b - a) / denom : 0.0;
    });
    double total = 0.0;
    for (double s : scores) total += s;
    return total / static_cast<double>(n);
}

KSelectionCurve select_k(const PointSet& points, const Constraints& constraints, int k_min, int k_max,
                         const KMeansOptions& options) {
    if (k_min < 1 || k_max < k_min) throw ValidationError("invalid k range");
    const std::size_t groups = distinct_groups(constraints);
    if (static_cast<std::size_t>(k_max) > groups) {
        throw InfeasibleError("k range upper bound " + std::to_string(k_max) + " exceeds the " +
                              std::to_string(groups) + " distinct must-link groups");
    }
    KSelectionCurve curve;
    for (int k = k_min; k <= k_max; ++k) {
        KMeansOptions opts = options;
        opts.k = k;
        const ClusterModel m = cop_kmeans(points, constraints, opts);
        KSelectionEntry e;
        e.k = k;
        e.inertia = m.inertia;
        if (k >= 2 && points.size() >= 3) e.silhouette = silhouette_mean(points, m.labels, options.threads);
        curve.entries.push_back(e);
    }
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i + 1 < curve.entries.size(); ++i) {
        const double d2 = curve.entries[i - 1].inertia - 2.0 * curve.entries[i].inertia + curve.entries[i + 1].inertia;
        if (d2 > best) {
            best = d2;
            curve.elbow_k = curve.entries[i].k;
        }
    }
    for (auto& e : curve.entries) e.elbow_hint = curve.elbow_k && e.k == *curve.elbow_k;
    return curve;
}

double adjusted_rand_index(std::span<const int> a, std::span<const int> b) {
    if (a.size() != b.size()) throw ValidationError("labelings differ in length");
    if (a.size() < 2) throw ValidationError("adjusted Rand index needs at least 2 items");
    std::map<std::pair<int, int>, double> joint;
    std::map<int, double> rows;
    std::map<int, double> cols;
    for (std::size_t i = 0; i < a.size(); ++i) {
        joint[{a[i], b[i]}] += 1.0;
        rows[a[i]] += 1.0;
        cols[b[i]] += 1.0;
    }
    auto pairs = [](double x) { return x * (x - 1.0) / 2.0; };
    double index = 0.0;
    for (const auto& [key, v] : joint) index += pairs(v);
    double sum_a = 0.0;
    for (const auto& [key, v] : rows) sum_a += pairs(v);
    double sum_b = 0.0;
    for (const auto& [key, v] : cols) sum_b += pairs(v);
    const double expected = sum_a * sum_b / pairs(static_cast<double>(a.size()));
    const double max_index = 0.5 * (sum_a + sum_b);
    if (max_index == expected) return 1.0;
    return (index - expected) / (max_index - expected);
}

}  // namespace favheat::clustering
