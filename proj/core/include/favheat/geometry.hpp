#pragma once

// Planar geometry in a projected metric CRS: polygons, settlement merging,
// the analysis grid and per-cell coverage.

#include <compare>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace favheat::geo {

struct Point2D {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Point2D&, const Point2D&) = default;
    friend auto operator<=>(const Point2D&, const Point2D&) = default;
};

double distance(Point2D a, Point2D b) noexcept;

/// Axis-aligned box. Point membership uses half-open footprints:
/// x in [min_x, max_x), y in (min_y, max_y]. A point on an edge shared by two
/// boxes of a north-up grid belongs to the box with the larger row/col index.
struct BBox {
    double min_x = 0.0;
    double min_y = 0.0;
    double max_x = 0.0;
    double max_y = 0.0;

    double width() const noexcept { return max_x - min_x; }
    double height() const noexcept { return max_y - min_y; }
    double area() const noexcept { return width() * height(); }
    bool contains(Point2D p) const noexcept {
        return p.x >= min_x && p.x < max_x && p.y > min_y && p.y <= max_y;
    }
    bool intersects(const BBox& o) const noexcept {
        return min_x <= o.max_x && o.min_x <= max_x && min_y <= o.max_y && o.min_y <= max_y;
    }
    /// Gap between the boxes, 0 when they touch or overlap.
    double distance_to(const BBox& o) const noexcept;
    void expand(Point2D p) noexcept;
    void expand(const BBox& o) noexcept;

    static BBox empty() noexcept;
    bool is_empty() const noexcept { return min_x > max_x || min_y > max_y; }

    friend bool operator==(const BBox&, const BBox&) = default;
};

/// Closed ring: first point equals last point.
using Ring = std::vector<Point2D>;

struct PolygonGeom {
    Ring exterior;
    std::vector<Ring> holes;

    BBox bounds() const noexcept;
};

/// Throws ValidationError unless every ring is closed, has at least 4 points,
/// is free of self-intersections, and the exterior area is positive.
void validate(const PolygonGeom& p);

/// Unsigned shoelace area of a closed ring.
double ring_area(const Ring& r) noexcept;

/// Exterior area minus hole areas. Validates the polygon first.
double polygon_area(const PolygonGeom& p);

/// Even-odd containment over all rings (boundary points count as inside).
bool contains(const PolygonGeom& p, Point2D q) noexcept;

/// Minimum Euclidean distance between the boundaries of two polygons; 0 when
/// boundaries intersect or one polygon lies inside the other.
double boundary_distance(const PolygonGeom& a, const PolygonGeom& b);

struct FavelaRecord {
    std::string favela_id;
    std::vector<PolygonGeom> parts;

    BBox bounds() const noexcept;
};

/// Minimum boundary_distance over all part pairs.
double record_distance(const FavelaRecord& a, const FavelaRecord& b);

struct FavelaComplex {
    std::string complex_id;               // smallest member id
    std::vector<std::string> member_ids;  // sorted
    std::vector<PolygonGeom> parts;       // member parts, in member order

    BBox bounds() const noexcept;
};

inline constexpr double kDefaultMergeThreshold = 20.0;
inline constexpr double kDefaultCellSize = 150.0;
inline constexpr double kDefaultMinCoverage = 0.7;

/// Connected components of the relation record_distance < threshold, sorted by
/// complex_id. Throws ValidationError on duplicate ids or threshold <= 0.
std::vector<FavelaComplex> merge_favelas(std::span<const FavelaRecord> records,
                                         double threshold = kDefaultMergeThreshold,
                                         unsigned threads = 1);

struct CellId {
    int row = 0;
    int col = 0;

    friend bool operator==(const CellId&, const CellId&) = default;
    friend auto operator<=>(const CellId&, const CellId&) = default;
};

struct Grid {
    Point2D origin;  // upper-left corner
    double cell_size = kDefaultCellSize;
    int n_rows = 0;
    int n_cols = 0;

    BBox cell_bbox(CellId id) const noexcept;
    BBox extent() const noexcept;
    std::size_t cell_count() const noexcept {
        return static_cast<std::size_t>(n_rows) * static_cast<std::size_t>(n_cols);
    }
};

/// n_cols = ceil(width / cell_size), n_rows = ceil(height / cell_size), origin
/// at the upper-left corner of the extent.
Grid build_grid(const BBox& extent, double cell_size = kDefaultCellSize);

struct GridCell {
    CellId cell_id;
    BBox bbox;
    double coverage = 0.0;
    std::optional<std::string> complex_id;
};

/// Area of (box ∩ union of polygons). Exact up to floating point: vertical
/// slab decomposition at every vertex, edge crossing and clip-line crossing.
double union_area_in_box(std::span<const PolygonGeom* const> polygons, const BBox& box);

/// One GridCell per grid cell in row-major order.
std::vector<GridCell> compute_coverage(const Grid& grid, std::span<const FavelaComplex> complexes,
                                       unsigned threads = 1);

/// Cells with coverage >= min_coverage, order preserved.
std::vector<GridCell> filter_cells(std::span<const GridCell> cells,
                                   double min_coverage = kDefaultMinCoverage);

}  // namespace favheat::geo
