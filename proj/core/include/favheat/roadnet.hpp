#pragma once

// Road graph built from line geometries, and per-cell network descriptors.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "favheat/geometry.hpp"

namespace favheat::roadnet {

using geo::BBox;
using geo::Point2D;
using Polyline = std::vector<Point2D>;

struct Node {
    std::size_t id;
    Point2D position;
    int degree = 0;
};

struct Edge {
    std::size_t from;
    std::size_t to;
    Polyline geometry;
    double length = 0.0;
};

struct RoadNetwork {
    std::vector<Node> nodes;  // sorted by position; id == index
    std::vector<Edge> edges;  // sorted by (from, to, geometry)
    std::vector<std::string> diagnostics;

    double total_length() const noexcept;
};

inline constexpr double kDefaultSnapTolerance = 0.01;

/// Vertices closer than snap_tol (transitively) collapse to the smallest
/// coordinate of their cluster. Nodes are polyline endpoints and vertices
/// shared by two or more polylines (or revisited by one). Polylines are split
/// at nodes; degree counts incident split edges, a self-loop counting twice.
/// Zero-length segments are dropped and reported in diagnostics.
/// Throws ValidationError for polylines with fewer than 2 vertices.
RoadNetwork build_network(std::span<const Polyline> lines,
                          double snap_tol = kDefaultSnapTolerance);

struct RoadMetrics {
    double nodes = 0.0;
    double road_length = 0.0;
    double mean_conn = 0.0;
    double min_conn = 0.0;
    double max_conn = 0.0;

    friend bool operator==(const RoadMetrics&, const RoadMetrics&) = default;
};

/// Node count and degree statistics over nodes inside the half-open cell
/// footprint; road_length is the edge geometry clipped to the cell.
RoadMetrics cell_road_metrics(const RoadNetwork& net, const BBox& cell);

/// Length of the segment a-b inside the cell. Segments lying on a cell edge
/// are attributed with the same half-open rule as points, so lengths over a
/// tiling of cells sum to the segment length.
double clipped_length(Point2D a, Point2D b, const BBox& cell) noexcept;

/// cell_road_metrics for many cells, sharing an edge bounding-box index.
std::vector<RoadMetrics> cells_road_metrics(const RoadNetwork& net, std::span<const BBox> cells,
                                            unsigned threads = 1);

}  // namespace favheat::roadnet
