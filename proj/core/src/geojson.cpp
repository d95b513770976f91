#include "favheat/geojson.hpp"

#include <algorithm>

#include <json.hpp>

#include "favheat/error.hpp"

namespace favheat::geojson {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

namespace {

json parse_collection(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("invalid JSON: ") + e.what());
    }
    if (!doc.is_object() || doc.value("type", "") != "FeatureCollection" || !doc.contains("features") ||
        !doc["features"].is_array()) {
        throw ParseError("expected a GeoJSON FeatureCollection");
    }
    return doc;
}

void check_crs(const json& doc, const std::optional<std::string>& expected) {
    if (!expected || !doc.contains("crs")) return;
    const json& crs = doc["crs"];
    std::string name;
    if (crs.is_object() && crs.contains("properties") && crs["properties"].is_object()) {
        name = crs["properties"].value("name", "");
    } else if (crs.is_string()) {
        name = crs.get<std::string>();
    }
    if (name != *expected) {
        throw ParseError("declared CRS '" + name + "' does not match configured CRS '" + *expected + "'");
    }
}

geo::Point2D parse_position(const json& j) {
    if (!j.is_array() || j.size() < 2 || !j[0].is_number() || !j[1].is_number()) {
        throw ParseError("position must be an array of at least two numbers");
    }
    return {j[0].get<double>(), j[1].get<double>()};
}

geo::Ring parse_ring(const json& j) {
    if (!j.is_array()) throw ParseError("linear ring must be an array");
    geo::Ring r;
    r.reserve(j.size());
    for (const auto& p : j) r.push_back(parse_position(p));
    return r;
}

geo::PolygonGeom parse_polygon(const json& rings) {
    if (!rings.is_array() || rings.empty()) throw ParseError("polygon needs at least one ring");
    geo::PolygonGeom p;
    p.exterior = parse_ring(rings[0]);
    for (std::size_t i = 1; i < rings.size(); ++i) p.holes.push_back(parse_ring(rings[i]));
    return p;
}

ojson ring_json(const geo::Ring& r) {
    ojson out = ojson::array();
    for (const auto& p : r) out.push_back({p.x, p.y});
    return out;
}

ojson polygon_json(const geo::PolygonGeom& p) {
    ojson rings = ojson::array();
    rings.push_back(ring_json(p.exterior));
    for (const auto& h : p.holes) rings.push_back(ring_json(h));
    return rings;
}

ojson collection(const std::string& crs) {
    ojson fc;
    fc["type"] = "FeatureCollection";
    if (!crs.empty()) fc["crs"] = {{"type", "name"}, {"properties", {{"name", crs}}}};
    fc["features"] = ojson::array();
    return fc;
}

}  // namespace

std::vector<geo::FavelaRecord> parse_favelas(const std::string& text, const std::string& id_property,
                                             const std::optional<std::string>& expected_crs) {
    const json doc = parse_collection(text);
    check_crs(doc, expected_crs);
    std::vector<geo::FavelaRecord> out;
    std::size_t index = 0;
    for (const auto& f : doc["features"]) {
        const std::string where = "feature " + std::to_string(index++);
        if (!f.is_object() || !f.contains("geometry") || !f["geometry"].is_object()) {
            throw ParseError(where + ": missing geometry");
        }
        const json props = f.value("properties", json::object());
        if (!props.is_object() || !props.contains(id_property)) {
            throw ParseError(where + ": missing identifier property '" + id_property + "'");
        }
        const json& id = props[id_property];
        geo::FavelaRecord rec;
        if (id.is_string()) {
            rec.favela_id = id.get<std::string>();
        } else if (id.is_number_integer()) {
            rec.favela_id = std::to_string(id.get<long long>());
        } else {
            throw ParseError(where + ": identifier must be a string or an integer");
        }
        const json& g = f["geometry"];
        const std::string type = g.value("type", "");
        if (!g.contains("coordinates")) throw ParseError(where + ": geometry has no coordinates");
        if (type == "Polygon") {
            rec.parts.push_back(parse_polygon(g["coordinates"]));
        } else if (type == "MultiPolygon") {
            for (const auto& poly : g["coordinates"]) rec.parts.push_back(parse_polygon(poly));
        } else {
            throw ParseError(where + ": unsupported geometry type '" + type + "'");
        }
        try {
            for (const auto& p : rec.parts) geo::validate(p);
        } catch (const ValidationError& e) {
            throw ParseError(where + " ('" + rec.favela_id + "'): " + e.what());
        }
        out.push_back(std::move(rec));
    }
    std::vector<std::string> ids;
    for (const auto& r : out) ids.push_back(r.favela_id);
    std::sort(ids.begin(), ids.end());
    if (auto dup = std::adjacent_find(ids.begin(), ids.end()); dup != ids.end()) {
        throw ParseError("duplicate favela identifier '" + *dup + "'");
    }
    return out;
}

std::vector<roadnet::Polyline> parse_roads(const std::string& text, std::span<const std::string> highway_filter,
                                           const std::optional<std::string>& expected_crs) {
    const json doc = parse_collection(text);
    check_crs(doc, expected_crs);
    std::vector<roadnet::Polyline> out;
    std::size_t index = 0;
    for (const auto& f : doc["features"]) {
        const std::string where = "feature " + std::to_string(index++);
        if (!f.is_object() || !f.contains("geometry") || !f["geometry"].is_object()) {
            throw ParseError(where + ": missing geometry");
        }
        if (!highway_filter.empty()) {
            const json props = f.value("properties", json::object());
            const json hw = props.is_object() ? props.value("highway", json()) : json();
            if (!hw.is_string() ||
                std::find(highway_filter.begin(), highway_filter.end(), hw.get<std::string>()) ==
                    highway_filter.end()) {
                continue;
            }
        }
        const json& g = f["geometry"];
        const std::string type = g.value("type", "");
        auto line_of = [&](const json& coords) {
            if (!coords.is_array() || coords.size() < 2) {
                throw ParseError(where + ": line needs at least two positions");
            }
            roadnet::Polyline line;
            for (const auto& p : coords) line.push_back(parse_position(p));
            return line;
        };
        if (type == "LineString") {
            out.push_back(line_of(g.at("coordinates")));
        } else if (type == "MultiLineString") {
            for (const auto& l : g.at("coordinates")) out.push_back(line_of(l));
        } else {
            throw ParseError(where + ": unsupported geometry type '" + type + "'");
        }
    }
    return out;
}

std::string write_complexes(std::span<const geo::FavelaComplex> complexes, const std::string& crs) {
    ojson fc = collection(crs);
    for (const auto& c : complexes) {
        ojson polys = ojson::array();
        for (const auto& p : c.parts) polys.push_back(polygon_json(p));
        ojson f;
        f["type"] = "Feature";
        f["properties"] = {{"complex_id", c.complex_id}, {"members", c.member_ids}};
        f["geometry"] = {{"type", "MultiPolygon"}, {"coordinates", polys}};
        fc["features"].push_back(std::move(f));
    }
    return fc.dump(1) + "\n";
}

std::string write_cells(std::span<const geo::GridCell> cells, const std::string& crs,
                        const std::map<geo::CellId, int>* labels) {
    ojson fc = collection(crs);
    for (const auto& c : cells) {
        const auto& b = c.bbox;
        geo::Ring ring{{b.min_x, b.max_y}, {b.max_x, b.max_y}, {b.max_x, b.min_y}, {b.min_x, b.min_y},
                       {b.min_x, b.max_y}};
        ojson props;
        props["cell_row"] = c.cell_id.row;
        props["cell_col"] = c.cell_id.col;
        props["coverage"] = c.coverage;
        props["complex_id"] = c.complex_id ? ojson(*c.complex_id) : ojson(nullptr);
        if (labels) {
            auto it = labels->find(c.cell_id);
            if (it != labels->end()) props["label"] = it->second;
        }
        ojson f;
        f["type"] = "Feature";
        f["properties"] = std::move(props);
        f["geometry"] = {{"type", "Polygon"}, {"coordinates", ojson::array({ring_json(ring)})}};
        fc["features"].push_back(std::move(f));
    }
    return fc.dump(1) + "\n";
}

std::vector<CellRecord> parse_cells(const std::string& text) {
    const json doc = parse_collection(text);
    std::vector<CellRecord> out;
    for (const auto& f : doc["features"]) {
        const json props = f.value("properties", json::object());
        try {
            CellRecord r;
            r.cell_id = geo::CellId{props.at("cell_row").get<int>(), props.at("cell_col").get<int>()};
            r.coverage = props.at("coverage").get<double>();
            if (props.contains("complex_id") && props["complex_id"].is_string()) {
                r.complex_id = props["complex_id"].get<std::string>();
            }
            out.push_back(std::move(r));
        } catch (const json::exception& e) {
            throw ParseError(std::string("malformed cell feature: ") + e.what());
        }
    }
    return out;
}

}  // namespace favheat::geojson
