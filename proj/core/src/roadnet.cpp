#include "favheat/roadnet.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <unordered_map>

#include "favheat/error.hpp"
#include "favheat/parallel.hpp"

namespace favheat::roadnet {

namespace {

struct VertexRef {
    std::size_t line;
    std::size_t vertex;
};

class DisjointSet {
public:
    explicit DisjointSet(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }
    std::size_t find(std::size_t i) {
        while (parent_[i] != i) {
            parent_[i] = parent_[parent_[i]];
            i = parent_[i];
        }
        return i;
    }
    void unite(std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a != b) parent_[std::max(a, b)] = std::min(a, b);
    }

private:
    std::vector<std::size_t> parent_;
};

struct BucketKey {
    long long x;
    long long y;
    bool operator==(const BucketKey&) const = default;
};

struct BucketHash {
    std::size_t operator()(const BucketKey& k) const noexcept {
        return std::hash<long long>{}(k.x) * 1000003u ^ std::hash<long long>{}(k.y);
    }
};

// Snapped position for every input vertex.
std::vector<Point2D> snap_vertices(const std::vector<Point2D>& pts, double tol) {
    DisjointSet sets(pts.size());
    if (tol > 0.0) {
        std::unordered_map<BucketKey, std::vector<std::size_t>, BucketHash> buckets;
        auto key_of = [tol](Point2D p) {
            return BucketKey{static_cast<long long>(std::floor(p.x / tol)),
                             static_cast<long long>(std::floor(p.y / tol))};
        };
        for (std::size_t i = 0; i < pts.size(); ++i) buckets[key_of(pts[i])].push_back(i);
        for (std::size_t i = 0; i < pts.size(); ++i) {
            const BucketKey k = key_of(pts[i]);
            for (long long dx = -1; dx <= 1; ++dx) {
                for (long long dy = -1; dy <= 1; ++dy) {
                    auto it = buckets.find(BucketKey{k.x + dx, k.y + dy});
                    if (it == buckets.end()) continue;
                    for (std::size_t j : it->second) {
                        if (j > i && geo::distance(pts[i], pts[j]) <= tol) sets.unite(i, j);
                    }
                }
            }
        }
    } else {
        std::map<Point2D, std::size_t> first;
        for (std::size_t i = 0; i < pts.size(); ++i) {
            auto [it, inserted] = first.emplace(pts[i], i);
            if (!inserted) sets.unite(it->second, i);
        }
    }
    std::vector<Point2D> rep(pts.size());
    std::vector<char> seen(pts.size(), 0);
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const std::size_t root = sets.find(i);
        if (!seen[root] || pts[i] < rep[root]) {
            rep[root] = pts[i];
            seen[root] = 1;
        }
    }
    std::vector<Point2D> out(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) out[i] = rep[sets.find(i)];
    return out;
}

double polyline_length(const Polyline& line) {
    double len = 0.0;
    for (std::size_t i = 0; i + 1 < line.size(); ++i) len += geo::distance(line[i], line[i + 1]);
    return len;
}

}  // namespace

double RoadNetwork::total_length() const noexcept {
    double total = 0.0;
    for (const auto& e : edges) total += e.length;
    return total;
}

RoadNetwork build_network(std::span<const Polyline> lines, double snap_tol) {
    if (!(snap_tol >= 0.0) || !std::isfinite(snap_tol)) {
        throw ValidationError("snap tolerance must be a finite non-negative distance");
    }
    RoadNetwork net;

    std::vector<Point2D> flat;
    std::vector<VertexRef> refs;
    for (std::size_t l = 0; l < lines.size(); ++l) {
        if (lines[l].size() < 2) {
            throw ValidationError("polyline " + std::to_string(l) + " has fewer than 2 vertices");
        }
        for (std::size_t v = 0; v < lines[l].size(); ++v) {
            const Point2D p = lines[l][v];
            if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
                throw ValidationError("polyline " + std::to_string(l) + " has a non-finite vertex");
            }
            flat.push_back(p);
            refs.push_back({l, v});
        }
    }
    const auto snapped = snap_vertices(flat, snap_tol);

    std::vector<Polyline> clean(lines.size());
    for (std::size_t i = 0; i < snapped.size(); ++i) {
        auto& line = clean[refs[i].line];
        if (!line.empty() && line.back() == snapped[i]) {
            net.diagnostics.push_back("dropped zero-length segment in polyline " +
                                      std::to_string(refs[i].line) + " at vertex " +
                                      std::to_string(refs[i].vertex));
            continue;
        }
        line.push_back(snapped[i]);
    }

    struct Usage {
        std::vector<std::size_t> lines;
        int interior_visits = 0;
        bool endpoint = false;
    };
    std::map<Point2D, Usage> usage;
    for (std::size_t l = 0; l < clean.size(); ++l) {
        const auto& line = clean[l];
        if (line.size() < 2) {
            net.diagnostics.push_back("dropped polyline " + std::to_string(l) +
                                      " collapsed to a point after snapping");
            continue;
        }
        for (std::size_t v = 0; v < line.size(); ++v) {
            Usage& u = usage[line[v]];
            if (u.lines.empty() || u.lines.back() != l) u.lines.push_back(l);
            if (v == 0 || v + 1 == line.size()) {
                u.endpoint = true;
            } else {
                ++u.interior_visits;
            }
        }
    }
    auto is_node = [&](Point2D p) {
        const Usage& u = usage.at(p);
        return u.endpoint || u.lines.size() >= 2 || u.interior_visits >= 2;
    };

    std::map<Point2D, std::size_t> node_ids;
    for (const auto& [p, u] : usage) {
        if (is_node(p)) node_ids.emplace(p, 0);
    }
    std::size_t next_id = 0;
    for (auto& [p, id] : node_ids) {
        id = next_id++;
        net.nodes.push_back(Node{id, p, 0});
    }

    for (const auto& line : clean) {
        if (line.size() < 2) continue;
        Polyline current{line.front()};
        for (std::size_t v = 1; v < line.size(); ++v) {
            current.push_back(line[v]);
            if (!is_node(line[v])) continue;
            Edge e;
            e.from = node_ids.at(current.front());
            e.to = node_ids.at(current.back());
            e.geometry = std::move(current);
            if (e.from > e.to) {
                std::reverse(e.geometry.begin(), e.geometry.end());
                std::swap(e.from, e.to);
            } else if (e.from == e.to) {
                Polyline reversed(e.geometry.rbegin(), e.geometry.rend());
                if (reversed < e.geometry) e.geometry = std::move(reversed);
            }
            e.length = polyline_length(e.geometry);
            net.edges.push_back(std::move(e));
            current = Polyline{line[v]};
        }
    }
    std::sort(net.edges.begin(), net.edges.end(), [](const Edge& a, const Edge& b) {
        if (a.from != b.from) return a.from < b.from;
        if (a.to != b.to) return a.to < b.to;
        return a.geometry < b.geometry;
    });
    for (const auto& e : net.edges) {
        ++net.nodes[e.from].degree;
        ++net.nodes[e.to].degree;
    }
    return net;
}

double clipped_length(Point2D a, Point2D b, const BBox& cell) noexcept {
    const double dx = b.x - a.x;
    const double dy = b.y - a.y;
    if (dx == 0.0 && dy == 0.0) return 0.0;
    if (dx == 0.0) {
        if (!(a.x >= cell.min_x && a.x < cell.max_x)) return 0.0;
        const double lo = std::max(std::min(a.y, b.y), cell.min_y);
        const double hi = std::min(std::max(a.y, b.y), cell.max_y);
        return hi > lo ? hi - lo : 0.0;
    }
    if (dy == 0.0) {
        if (!(a.y > cell.min_y && a.y <= cell.max_y)) return 0.0;
        const double lo = std::max(std::min(a.x, b.x), cell.min_x);
        const double hi = std::min(std::max(a.x, b.x), cell.max_x);
        return hi > lo ? hi - lo : 0.0;
    }
    // Liang-Barsky against the closed box; the boundary has zero length for
    // oblique segments.
    double t0 = 0.0;
    double t1 = 1.0;
    const double p[4] = {-dx, dx, -dy, dy};
    const double q[4] = {a.x - cell.min_x, cell.max_x - a.x, a.y - cell.min_y, cell.max_y - a.y};
    for (int i = 0; i < 4; ++i) {
        const double t = q[i] / p[i];
        if (p[i] < 0.0) {
            t0 = std::max(t0, t);
        } else {
            t1 = std::min(t1, t);
        }
    }
    if (t1 <= t0) return 0.0;
    return (t1 - t0) * std::hypot(dx, dy);
}

namespace {

struct EdgeIndex {
    std::vector<BBox> bounds;
};

RoadMetrics metrics_for(const RoadNetwork& net, const EdgeIndex& index, const BBox& cell) {
    RoadMetrics m;
    // Nodes are sorted by x then y.
    auto lo = std::lower_bound(net.nodes.begin(), net.nodes.end(), cell.min_x,
                               [](const Node& n, double x) { return n.position.x < x; });
    double degree_sum = 0.0;
    int count = 0;
    int min_deg = 0;
    int max_deg = 0;
    for (auto it = lo; it != net.nodes.end() && it->position.x < cell.max_x; ++it) {
        if (!cell.contains(it->position)) continue;
        if (count == 0) {
            min_deg = max_deg = it->degree;
        } else {
            min_deg = std::min(min_deg, it->degree);
            max_deg = std::max(max_deg, it->degree);
        }
        degree_sum += it->degree;
        ++count;
    }
    for (std::size_t e = 0; e < net.edges.size(); ++e) {
        if (!index.bounds[e].intersects(cell)) continue;
        const auto& g = net.edges[e].geometry;
        for (std::size_t i = 0; i + 1 < g.size(); ++i) m.road_length += clipped_length(g[i], g[i + 1], cell);
    }
    if (count > 0) {
        m.nodes = count;
        m.mean_conn = degree_sum / count;
        m.min_conn = min_deg;
        m.max_conn = max_deg;
    }
    return m;
}

EdgeIndex make_index(const RoadNetwork& net) {
    EdgeIndex index;
    index.bounds.reserve(net.edges.size());
    for (const auto& e : net.edges) {
        BBox b = BBox::empty();
        for (const auto& p : e.geometry) b.expand(p);
        index.bounds.push_back(b);
    }
    return index;
}

}  // namespace

RoadMetrics cell_road_metrics(const RoadNetwork& net, const BBox& cell) {
    return metrics_for(net, make_index(net), cell);
}

std::vector<RoadMetrics> cells_road_metrics(const RoadNetwork& net, std::span<const BBox> cells,
                                            unsigned threads) {
    const EdgeIndex index = make_index(net);
    std::vector<RoadMetrics> out(cells.size());
    parallel_for(cells.size(), threads, [&](std::size_t i) { out[i] = metrics_for(net, index, cells[i]); });
    return out;
}

}  // namespace favheat::roadnet
