#pragma once

// Constrained k-means (COP-KMeans) with must-link groups, and the diagnostics
// used to choose k: inertia, silhouette and the adjusted Rand index.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace favheat::clustering {

/// Dense row-major n x dim matrix of points.
class PointSet {
public:
    PointSet() = default;
    explicit PointSet(std::size_t dim) : dim_(dim) {}
    PointSet(std::size_t n, std::size_t dim, std::vector<double> data);

    std::size_t size() const noexcept { return dim_ == 0 ? 0 : data_.size() / dim_; }
    std::size_t dim() const noexcept { return dim_; }
    bool empty() const noexcept { return data_.empty(); }

    std::span<const double> operator[](std::size_t i) const noexcept {
        return {data_.data() + i * dim_, dim_};
    }
    std::span<double> operator[](std::size_t i) noexcept { return {data_.data() + i * dim_, dim_}; }

    void push_back(std::span<const double> p);
    const std::vector<double>& data() const noexcept { return data_; }

    friend bool operator==(const PointSet&, const PointSet&) = default;

private:
    std::size_t dim_ = 0;
    std::vector<double> data_;
};

double squared_distance(std::span<const double> a, std::span<const double> b) noexcept;

/// Must-link groups as one group index per point; points sharing an index
/// must share a label. Cannot-link pairs are supported by the assignment pass
/// but the pipeline never sets them.
struct Constraints {
    std::vector<std::size_t> group;
    std::vector<std::pair<std::size_t, std::size_t>> cannot_link;

    /// Every point in its own group.
    static Constraints unconstrained(std::size_t n);
    /// Dense indices for arbitrary group keys (sorted key order).
    static Constraints from_keys(std::span<const std::string> keys);
};

std::size_t distinct_groups(const Constraints& c);

struct KMeansOptions {
    int k = 2;
    std::uint64_t seed = 0;
    int restarts = 10;
    int max_iter = 300;
    double tol = 1e-6;
    unsigned threads = 1;
};

struct ClusterModel {
    int k = 0;
    PointSet centroids;
    std::vector<int> labels;  // per point, in [0, k)
    double inertia = 0.0;
    int n_iter = 0;
    bool converged = false;
    std::uint64_t seed = 0;
    int restarts = 1;
    int best_restart = 0;
    std::vector<double> restart_inertias;
    std::vector<double> inertia_trace;  // per iteration of the returned run
};

/// Random engine for one restart, derived from (seed, restart).
std::mt19937_64 restart_engine(std::uint64_t seed, int restart);

/// Uniform double in [0, 1) from 53 high bits; stable across standard libraries.
double uniform01(std::mt19937_64& rng) noexcept;

/// k-means++ seeding over the mean point of each must-link group.
PointSet kmeanspp_group_init(const PointSet& points, const Constraints& constraints, int k,
                             std::mt19937_64& rng);

/// One COP-KMeans run from the given centroids. Points are visited in index
/// order; each takes the nearest centroid that does not break a constraint
/// with a point already assigned in the same pass. A cluster left empty takes
/// over the group of the point farthest from its centroid among clusters
/// holding at least two groups. Stops when no centroid moves by tol or more.
/// Throws InfeasibleError when a point has no admissible centroid.
ClusterModel cop_kmeans_from(const PointSet& points, const Constraints& constraints,
                             const PointSet& initial_centroids, int max_iter = 300,
                             double tol = 1e-6);

/// Best-inertia model over options.restarts seeded runs. Throws
/// InfeasibleError if k exceeds the number of must-link groups and
/// ValidationError on bad options or non-finite points.
ClusterModel cop_kmeans(const PointSet& points, const Constraints& constraints,
                        const KMeansOptions& options);

/// Sum of squared distances of points to their assigned centroid.
double inertia(const PointSet& points, std::span<const int> labels, const PointSet& centroids);

/// Mean silhouette with Euclidean distances; singleton-cluster points score 0.
/// Throws ValidationError with fewer than 2 clusters, fewer than 3 points, or
/// an empty label in [0, max label].
double silhouette_mean(const PointSet& points, std::span<const int> labels, unsigned threads = 1);

struct KSelectionEntry {
    int k = 0;
    double inertia = 0.0;
    std::optional<double> silhouette;
    bool elbow_hint = false;
};

struct KSelectionCurve {
    std::vector<KSelectionEntry> entries;
    std::optional<int> elbow_k;
};

/// Runs cop_kmeans for each k in [k_min, k_max] with the same seed policy.
/// The elbow hint marks the k with the largest second difference of inertia.
KSelectionCurve select_k(const PointSet& points, const Constraints& constraints, int k_min,
                         int k_max, const KMeansOptions& options);

/// Pair-counting adjusted Rand index. Throws ValidationError on length
/// mismatch or fewer than 2 items.
double adjusted_rand_index(std::span<const int> a, std::span<const int> b);

}  // namespace favheat::clustering
