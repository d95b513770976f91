#pragma once

// GeoJSON FeatureCollection readers and writers for settlement polygons,
// road lines and grid cells.

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "favheat/geometry.hpp"
#include "favheat/roadnet.hpp"

namespace favheat::geojson {

/// Reads Polygon/MultiPolygon features. The identifier is taken from
/// properties[id_property]; integer identifiers are converted to strings.
/// When expected_crs is set and the collection carries a "crs" member, the
/// two must match. Throws ParseError on malformed input or invalid geometry.
std::vector<geo::FavelaRecord> parse_favelas(const std::string& text,
                                             const std::string& id_property = "favela_id",
                                             const std::optional<std::string>& expected_crs = {});

/// Reads LineString/MultiLineString features. When highway_filter is
/// non-empty, only features whose "highway" property is listed are kept.
std::vector<roadnet::Polyline> parse_roads(const std::string& text,
                                           std::span<const std::string> highway_filter = {},
                                           const std::optional<std::string>& expected_crs = {});

std::string write_complexes(std::span<const geo::FavelaComplex> complexes, const std::string& crs);

/// Cells as square polygons with cell_row, cell_col, coverage and complex_id
/// properties, plus a label property when `labels` has an entry.
std::string write_cells(std::span<const geo::GridCell> cells, const std::string& crs,
                        const std::map<geo::CellId, int>* labels = nullptr);

struct CellRecord {
    geo::CellId cell_id;
    double coverage = 0.0;
    std::optional<std::string> complex_id;
};

/// Reads back the properties written by write_cells.
std::vector<CellRecord> parse_cells(const std::string& text);

}  // namespace favheat::geojson
