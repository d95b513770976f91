#include "favheat/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <utility>

#include "favheat/error.hpp"
#include "favheat/parallel.hpp"

namespace favheat::geo {

namespace {

struct Segment {
    Point2D a;
    Point2D b;
};

double cross(Point2D o, Point2D a, Point2D b) noexcept {
    return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

int sign(double v) noexcept { return (v > 0.0) - (v < 0.0); }

bool on_segment(Point2D p, const Segment& s) noexcept {
    return std::min(s.a.x, s.b.x) <= p.x && p.x <= std::max(s.a.x, s.b.x) &&
           std::min(s.a.y, s.b.y) <= p.y && p.y <= std::max(s.a.y, s.b.y);
}

bool segments_intersect(const Segment& s, const Segment& t) noexcept {
    const int d1 = sign(cross(t.a, t.b, s.a));
    const int d2 = sign(cross(t.a, t.b, s.b));
    const int d3 = sign(cross(s.a, s.b, t.a));
    const int d4 = sign(cross(s.a, s.b, t.b));
    if (d1 * d2 < 0 && d3 * d4 < 0) return true;
    if (d1 == 0 && on_segment(s.a, t)) return true;
    if (d2 == 0 && on_segment(s.b, t)) return true;
    if (d3 == 0 && on_segment(t.a, s)) return true;
    if (d4 == 0 && on_segment(t.b, s)) return true;
    return false;
}

double point_segment_distance(Point2D p, const Segment& s) noexcept {
    const double dx = s.b.x - s.a.x;
    const double dy = s.b.y - s.a.y;
    const double len2 = dx * dx + dy * dy;
    if (len2 == 0.0) return distance(p, s.a);
    const double t = std::clamp(((p.x - s.a.x) * dx + (p.y - s.a.y) * dy) / len2, 0.0, 1.0);
    return distance(p, Point2D{s.a.x + t * dx, s.a.y + t * dy});
}

double segment_distance(const Segment& s, const Segment& t) noexcept {
    if (segments_intersect(s, t)) return 0.0;
    return std::min({point_segment_distance(s.a, t), point_segment_distance(s.b, t),
                     point_segment_distance(t.a, s), point_segment_distance(t.b, s)});
}

template <typename Fn>
void for_each_ring(const PolygonGeom& p, Fn&& fn) {
    fn(p.exterior);
    for (const auto& h : p.holes) fn(h);
}

std::vector<Segment> ring_segments(const Ring& r) {
    std::vector<Segment> out;
    out.reserve(r.size());
    for (std::size_t i = 0; i + 1 < r.size(); ++i) out.push_back({r[i], r[i + 1]});
    return out;
}

std::vector<Segment> boundary_segments(const PolygonGeom& p) {
    std::vector<Segment> out;
    for_each_ring(p, [&](const Ring& r) {
        auto s = ring_segments(r);
        out.insert(out.end(), s.begin(), s.end());
    });
    return out;
}

void validate_ring(const Ring& r, const char* which) {
    if (r.size() < 4) {
        throw ValidationError(std::string(which) + " ring has fewer than 4 points");
    }
    if (r.front() != r.back()) {
        throw ValidationError(std::string(which) + " ring is not closed");
    }
    for (const auto& p : r) {
        if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
            throw ValidationError(std::string(which) + " ring has a non-finite coordinate");
        }
    }
    const auto segs = ring_segments(r);
    const std::size_t n = segs.size();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const bool adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if (adjacent) {
                // Neighbours share one vertex; they may only overlap if they fold back.
                const Segment& s = segs[i];
                const Segment& t = segs[j];
                if (sign(cross(s.a, s.b, t.a)) == 0 && sign(cross(s.a, s.b, t.b)) == 0 &&
                    n > 2) {
                    const Point2D shared = (j == i + 1) ? s.b : s.a;
                    const Point2D far_s = (j == i + 1) ? s.a : s.b;
                    const Point2D far_t = (j == i + 1) ? t.b : t.a;
                    const double dot = (far_s.x - shared.x) * (far_t.x - shared.x) +
                                       (far_s.y - shared.y) * (far_t.y - shared.y);
                    if (dot > 0.0) {
                        throw ValidationError(std::string(which) + " ring folds back on itself");
                    }
                }
                continue;
            }
            if (segments_intersect(segs[i], segs[j])) {
                throw ValidationError(std::string(which) + " ring self-intersects");
            }
        }
    }
}

}  // namespace

double distance(Point2D a, Point2D b) noexcept { return std::hypot(a.x - b.x, a.y - b.y); }

double BBox::distance_to(const BBox& o) const noexcept {
    const double dx = std::max({0.0, o.min_x - max_x, min_x - o.max_x});
    const double dy = std::max({0.0, o.min_y - max_y, min_y - o.max_y});
    return std::hypot(dx, dy);
}

void BBox::expand(Point2D p) noexcept {
    min_x = std::min(min_x, p.x);
    min_y = std::min(min_y, p.y);
    max_x = std::max(max_x, p.x);
    max_y = std::max(max_y, p.y);
}

void BBox::expand(const BBox& o) noexcept {
    if (o.is_empty()) return;
    expand(Point2D{o.min_x, o.min_y});
    expand(Point2D{o.max_x, o.max_y});
}

BBox BBox::empty() noexcept {
    constexpr double inf = std::numeric_limits<double>::infinity();
    return BBox{inf, inf, -inf, -inf};
}

BBox PolygonGeom::bounds() const noexcept {
    BBox b = BBox::empty();
    for (const auto& p : exterior) b.expand(p);
    return b;
}

BBox FavelaRecord::bounds() const noexcept {
    BBox b = BBox::empty();
    for (const auto& p : parts) b.expand(p.bounds());
    return b;
}

BBox FavelaComplex::bounds() const noexcept {
    BBox b = BBox::empty();
    for (const auto& p : parts) b.expand(p.bounds());
    return b;
}

void validate(const PolygonGeom& p) {
    validate_ring(p.exterior, "exterior");
    for (const auto& h : p.holes) validate_ring(h, "hole");
    if (!(ring_area(p.exterior) > 0.0)) throw ValidationError("exterior ring has zero area");
}

double ring_area(const Ring& r) noexcept {
    double twice = 0.0;
    for (std::size_t i = 0; i + 1 < r.size(); ++i) {
        twice += r[i].x * r[i + 1].y - r[i + 1].x * r[i].y;
    }
    return std::abs(twice) * 0.5;
}

double polygon_area(const PolygonGeom& p) {
    validate(p);
    double area = ring_area(p.exterior);
    for (const auto& h : p.holes) area -= ring_area(h);
    return area;
}

bool contains(const PolygonGeom& p, Point2D q) noexcept {
    bool inside = false;
    bool on_boundary = false;
    for_each_ring(p, [&](const Ring& r) {
        for (std::size_t i = 0; i + 1 < r.size(); ++i) {
            const Point2D a = r[i];
            const Point2D b = r[i + 1];
            if (sign(cross(a, b, q)) == 0 && on_segment(q, {a, b})) on_boundary = true;
            if ((a.y > q.y) != (b.y > q.y)) {
                const double x_at = a.x + (q.y - a.y) * (b.x - a.x) / (b.y - a.y);
                if (q.x < x_at) inside = !inside;
            }
        }
    });
    return inside || on_boundary;
}

double boundary_distance(const PolygonGeom& a, const PolygonGeom& b) {
    validate(a);
    validate(b);
    const auto sa = boundary_segments(a);
    const auto sb = boundary_segments(b);
    if (a.bounds().intersects(b.bounds())) {
        for (const auto& s : sa) {
            for (const auto& t : sb) {
                if (segments_intersect(s, t)) return 0.0;
            }
        }
        if (contains(b, a.exterior.front()) || contains(a, b.exterior.front())) return 0.0;
    }
    double best = std::numeric_limits<double>::infinity();
    for (const auto& s : sa) {
        for (const auto& t : sb) best = std::min(best, segment_distance(s, t));
    }
    return best;
}

double record_distance(const FavelaRecord& a, const FavelaRecord& b) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& pa : a.parts) {
        for (const auto& pb : b.parts) {
            best = std::min(best, boundary_distance(pa, pb));
            if (best == 0.0) return 0.0;
        }
    }
    return best;
}

namespace {

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
        if (a == b) return;
        if (b < a) std::swap(a, b);
        parent_[b] = a;
    }

private:
    std::vector<std::size_t> parent_;
};

}  // namespace

std::vector<FavelaComplex> merge_favelas(std::span<const FavelaRecord> records, double threshold,
                                         unsigned threads) {
    if (!(threshold > 0.0) || !std::isfinite(threshold)) {
        throw ValidationError("merge threshold must be a positive finite distance");
    }
    // Sorting by id makes the result independent of input order.
    std::vector<std::size_t> order(records.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
        return records[i].favela_id < records[j].favela_id;
    });
    for (std::size_t i = 1; i < order.size(); ++i) {
        if (records[order[i]].favela_id == records[order[i - 1]].favela_id) {
            throw ValidationError("duplicate favela_id '" + records[order[i]].favela_id + "'");
        }
    }
    for (const auto& r : records) {
        if (r.parts.empty()) throw ValidationError("favela '" + r.favela_id + "' has no geometry");
        for (const auto& p : r.parts) validate(p);
    }

    std::vector<BBox> bounds;
    bounds.reserve(order.size());
    for (auto i : order) bounds.push_back(records[i].bounds());

    std::vector<std::pair<std::size_t, std::size_t>> candidates;
    for (std::size_t i = 0; i < order.size(); ++i) {
        for (std::size_t j = i + 1; j < order.size(); ++j) {
            if (bounds[i].distance_to(bounds[j]) < threshold) candidates.emplace_back(i, j);
        }
    }
    std::vector<char> linked(candidates.size(), 0);
    parallel_for(candidates.size(), threads, [&](std::size_t c) {
        const auto [i, j] = candidates[c];
        linked[c] = record_distance(records[order[i]], records[order[j]]) < threshold ? 1 : 0;
    });

    DisjointSet sets(order.size());
    for (std::size_t c = 0; c < candidates.size(); ++c) {
        if (linked[c]) sets.unite(candidates[c].first, candidates[c].second);
    }

    // Roots are the smallest sorted index of each component, so iterating in
    // sorted order emits complexes already sorted by complex_id.
    std::vector<FavelaComplex> complexes;
    std::vector<std::size_t> slot(order.size(), 0);
    for (std::size_t i = 0; i < order.size(); ++i) {
        const std::size_t root = sets.find(i);
        const FavelaRecord& rec = records[order[i]];
        if (root == i) {
            slot[i] = complexes.size();
            complexes.push_back(FavelaComplex{rec.favela_id, {}, {}});
        }
        FavelaComplex& c = complexes[slot[root]];
        c.member_ids.push_back(rec.favela_id);
        c.parts.insert(c.parts.end(), rec.parts.begin(), rec.parts.end());
    }
    return complexes;
}

BBox Grid::cell_bbox(CellId id) const noexcept {
    return BBox{origin.x + id.col * cell_size, origin.y - (id.row + 1) * cell_size,
                origin.x + (id.col + 1) * cell_size, origin.y - id.row * cell_size};
}

BBox Grid::extent() const noexcept {
    return BBox{origin.x, origin.y - n_rows * cell_size, origin.x + n_cols * cell_size, origin.y};
}

Grid build_grid(const BBox& extent, double cell_size) {
    if (!(cell_size > 0.0) || !std::isfinite(cell_size)) {
        throw ValidationError("cell size must be positive");
    }
    if (extent.is_empty() || !(extent.width() > 0.0) || !(extent.height() > 0.0) ||
        !std::isfinite(extent.area())) {
        throw ValidationError("grid extent must have positive finite width and height");
    }
    Grid g;
    g.origin = Point2D{extent.min_x, extent.max_y};
    g.cell_size = cell_size;
    g.n_cols = static_cast<int>(std::ceil(extent.width() / cell_size));
    g.n_rows = static_cast<int>(std::ceil(extent.height() / cell_size));
    return g;
}

double union_area_in_box(std::span<const PolygonGeom* const> polygons, const BBox& box) {
    if (polygons.empty() || !(box.width() > 0.0) || !(box.height() > 0.0)) return 0.0;

    struct Edge {
        Point2D a;
        Point2D b;
    };
    std::vector<double> xs{box.min_x, box.max_x};
    auto add_x = [&](double x) {
        if (x > box.min_x && x < box.max_x) xs.push_back(x);
    };
    std::vector<std::vector<Edge>> poly_edges;
    std::vector<Edge> local;  // edges touching the box, used for breakpoints
    poly_edges.reserve(polygons.size());
    for (const PolygonGeom* p : polygons) {
        auto& edges = poly_edges.emplace_back();
        for_each_ring(*p, [&](const Ring& r) {
            for (std::size_t i = 0; i + 1 < r.size(); ++i) {
                const Edge e{r[i], r[i + 1]};
                add_x(e.a.x);
                if (e.a.x == e.b.x) continue;  // vertical edges never cross a vertical probe
                edges.push_back(e);
                const BBox eb{std::min(e.a.x, e.b.x), std::min(e.a.y, e.b.y),
                              std::max(e.a.x, e.b.x), std::max(e.a.y, e.b.y)};
                if (eb.intersects(box)) local.push_back(e);
            }
        });
    }

    auto y_at = [](const Edge& e, double x) {
        return e.a.y + (x - e.a.x) * (e.b.y - e.a.y) / (e.b.x - e.a.x);
    };
    for (const auto& e : local) {
        for (double clip_y : {box.min_y, box.max_y}) {
            if ((e.a.y < clip_y) != (e.b.y < clip_y)) {
                add_x(e.a.x + (clip_y - e.a.y) * (e.b.x - e.a.x) / (e.b.y - e.a.y));
            }
        }
    }
    for (std::size_t i = 0; i < local.size(); ++i) {
        for (std::size_t j = i + 1; j < local.size(); ++j) {
            const Edge& s = local[i];
            const Edge& t = local[j];
            const double rx = s.b.x - s.a.x, ry = s.b.y - s.a.y;
            const double sx = t.b.x - t.a.x, sy = t.b.y - t.a.y;
            const double denom = rx * sy - ry * sx;
            if (denom == 0.0) continue;
            const double u = ((t.a.x - s.a.x) * sy - (t.a.y - s.a.y) * sx) / denom;
            if (u > 0.0 && u < 1.0) add_x(s.a.x + u * rx);
        }
    }
    std::sort(xs.begin(), xs.end());
    xs.erase(std::unique(xs.begin(), xs.end()), xs.end());

    double area = 0.0;
    std::vector<double> ys;
    std::vector<std::pair<double, double>> spans;
    for (std::size_t s = 0; s + 1 < xs.size(); ++s) {
        const double x0 = xs[s];
        const double x1 = xs[s + 1];
        if (!(x1 > x0)) continue;
        const double xm = 0.5 * (x0 + x1);
        spans.clear();
        for (const auto& edges : poly_edges) {
            ys.clear();
            for (const auto& e : edges) {
                if ((e.a.x <= xm) != (e.b.x <= xm)) ys.push_back(y_at(e, xm));
            }
            std::sort(ys.begin(), ys.end());
            for (std::size_t k = 0; k + 1 < ys.size(); k += 2) {
                const double lo = std::max(ys[k], box.min_y);
                const double hi = std::min(ys[k + 1], box.max_y);
                if (hi > lo) spans.emplace_back(lo, hi);
            }
        }
        if (spans.empty()) continue;
        std::sort(spans.begin(), spans.end());
        double covered = 0.0;
        double cur_lo = spans.front().first;
        double cur_hi = spans.front().second;
        for (std::size_t k = 1; k < spans.size(); ++k) {
            if (spans[k].first > cur_hi) {
                covered += cur_hi - cur_lo;
                cur_lo = spans[k].first;
                cur_hi = spans[k].second;
            } else {
                cur_hi = std::max(cur_hi, spans[k].second);
            }
        }
        covered += cur_hi - cur_lo;
        area += (x1 - x0) * covered;
    }
    return area;
}

std::vector<GridCell> compute_coverage(const Grid& grid, std::span<const FavelaComplex> complexes,
                                       unsigned threads) {
    std::vector<BBox> bounds;
    bounds.reserve(complexes.size());
    for (const auto& c : complexes) bounds.push_back(c.bounds());

    std::vector<GridCell> cells(grid.cell_count());
    parallel_for(cells.size(), threads, [&](std::size_t idx) {
        GridCell& cell = cells[idx];
        cell.cell_id = CellId{static_cast<int>(idx / grid.n_cols), static_cast<int>(idx % grid.n_cols)};
        cell.bbox = grid.cell_bbox(cell.cell_id);

        std::vector<const PolygonGeom*> all;
        double best_area = 0.0;
        const FavelaComplex* best = nullptr;
        // Scan in a fixed order: ties on area resolve to the smallest complex_id.
        std::vector<std::size_t> hits;
        for (std::size_t c = 0; c < complexes.size(); ++c) {
            if (bounds[c].intersects(cell.bbox)) hits.push_back(c);
        }
        std::sort(hits.begin(), hits.end(), [&](std::size_t a, std::size_t b) {
            return complexes[a].complex_id < complexes[b].complex_id;
        });
        for (std::size_t c : hits) {
            std::vector<const PolygonGeom*> parts;
            for (const auto& p : complexes[c].parts) parts.push_back(&p);
            const double a = union_area_in_box(parts, cell.bbox);
            if (a > best_area) {
                best_area = a;
                best = &complexes[c];
            }
            all.insert(all.end(), parts.begin(), parts.end());
        }
        const double covered = hits.size() == 1 ? best_area : union_area_in_box(all, cell.bbox);
        if (covered > 0.0 && best != nullptr) {
            cell.coverage = std::clamp(covered / cell.bbox.area(), 0.0, 1.0);
            cell.complex_id = best->complex_id;
        }
    });
    return cells;
}

std::vector<GridCell> filter_cells(std::span<const GridCell> cells, double min_coverage) {
    std::vector<GridCell> out;
    for (const auto& c : cells) {
        if (c.coverage >= min_coverage) out.push_back(c);
    }
    return out;
}

}  // namespace favheat::geo
