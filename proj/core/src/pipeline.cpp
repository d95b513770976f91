#include "favheat/pipeline.hpp"

#include <algorithm>
#include <filesystem>
#include <regex>
#include <set>
#include <sstream>

#include <json.hpp>

#include "favheat/error.hpp"
#include "favheat/geojson.hpp"
#include "favheat/raster.hpp"
#include "favheat/roadnet.hpp"
#include "favheat/textio.hpp"

namespace favheat::pipeline {

namespace fs = std::filesystem;
using json = nlohmann::json;
using ojson = nlohmann::ordered_json;
using textio::format_double;

namespace {

constexpr const char* kGridFile = "grid.json";
constexpr const char* kCellsFile = "cells.geojson";
constexpr const char* kComplexesFile = "complexes.geojson";
constexpr const char* kFeaturesFile = "features.csv";
constexpr const char* kFeaturesNormFile = "features_normalized.csv";
constexpr const char* kNormalizationFile = "normalization.json";
constexpr const char* kFeaturesSummaryFile = "features_summary.json";
constexpr const char* kModelFile = "model.json";
constexpr const char* kLabeledCellsFile = "cells_labeled.geojson";
constexpr const char* kClusterSummaryFile = "cluster_summary.json";
constexpr const char* kCurveFile = "k_selection.json";
constexpr const char* kReportJsonFile = "heat_report.json";
constexpr const char* kReportCsvFile = "heat_report.csv";
constexpr const char* kBoxplotFile = "lst_boxplot.json";

std::string tagged(const char* tag, const std::exception& e) {
    return std::string("[") + tag + "] " + e.what();
}

// Runs fn, prefixing any library error with a stage tag while keeping its type.
template <typename Fn>
auto stage(const char* tag, Fn&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const InfeasibleError& e) {
        throw InfeasibleError(tagged(tag, e));
    } catch (const ParseError& e) {
        throw ParseError(tagged(tag, e));
    } catch (const ConfigError& e) {
        throw ConfigError(tagged(tag, e));
    } catch (const ValidationError& e) {
        throw ValidationError(tagged(tag, e));
    } catch (const Error& e) {
        throw Error(tagged(tag, e));
    }
}

// Collects artifacts in a staging directory and moves them into place on commit.
class Staging {
public:
    Staging(const std::string& out_dir, const std::string& name) : out_(out_dir) {
        fs::create_directories(out_);
        dir_ = out_ / (".staging-" + name);
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    ~Staging() {
        std::error_code ec;
        fs::remove_all(dir_, ec);
    }
    Staging(const Staging&) = delete;
    Staging& operator=(const Staging&) = delete;

    void add(const std::string& file, const std::string& content) {
        textio::write_file((dir_ / file).string(), content);
        files_.push_back(file);
    }

    std::vector<std::string> commit() {
        for (const auto& f : files_) fs::rename(dir_ / f, out_ / f);
        return files_;
    }

private:
    fs::path out_;
    fs::path dir_;
    std::vector<std::string> files_;
};

std::string output_file(const PipelineConfig& c, const char* name) {
    return (fs::path(c.paths.output) / name).string();
}

std::string resolve(const std::string& base, const std::string& p) {
    if (p.empty()) return p;
    const fs::path path(p);
    return path.is_absolute() ? p : (fs::path(base) / path).lexically_normal().string();
}

void require_file(const std::string& path, const std::string& what) {
    if (path.empty()) throw ConfigError(what + " path is not configured");
    if (!fs::is_regular_file(path)) throw ConfigError(what + " '" + path + "' does not exist");
}

void require_artifact(const PipelineConfig& c, const char* name, const char* producer) {
    const std::string p = output_file(c, name);
    if (!fs::is_regular_file(p)) {
        throw ConfigError("'" + p + "' not found; run the " + producer + " command first");
    }
}

lst::WhiskerRule parse_whisker(const std::string& s) {
    if (s == "iqr1.5") return lst::WhiskerRule::Iqr15;
    if (s == "minmax") return lst::WhiskerRule::MinMax;
    throw ConfigError("unknown whisker rule '" + s + "' (expected iqr1.5 or minmax)");
}

// Optional "<raster>.crs" sidecar must match the configured CRS.
raster::Raster load_raster(const std::string& path, const std::string& crs) {
    raster::Raster r = raster::read_ascii_grid_file(path);
    const std::string sidecar = path + ".crs";
    if (fs::is_regular_file(sidecar)) {
        const std::string declared = textio::trim(textio::read_file(sidecar));
        if (declared != crs) {
            throw ParseError("raster '" + path + "' declares CRS '" + declared + "', expected '" + crs + "'");
        }
    }
    r.set_crs(crs);
    return r;
}

std::vector<geo::GridCell> load_cells(const PipelineConfig& c) {
    const geo::Grid grid = read_grid_json(textio::read_file(output_file(c, kGridFile)));
    std::vector<geo::GridCell> cells;
    for (const auto& rec : geojson::parse_cells(textio::read_file(output_file(c, kCellsFile)))) {
        geo::GridCell cell;
        cell.cell_id = rec.cell_id;
        cell.bbox = grid.cell_bbox(rec.cell_id);
        cell.coverage = rec.coverage;
        cell.complex_id = rec.complex_id;
        cells.push_back(std::move(cell));
    }
    return cells;
}

ojson number_or_null(const std::optional<double>& v) { return v ? ojson(*v) : ojson(nullptr); }

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"') out += '"';
        out += ch;
    }
    return out + "\"";
}

std::vector<std::string> csv_split(const std::string& line, std::size_t line_no) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char ch = line[i];
        if (quoted) {
            if (ch == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += ch;
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            out.push_back(std::move(cur));
            cur.clear();
        } else if (ch != '\r') {
            cur += ch;
        }
    }
    if (quoted) throw ParseError("unterminated quoted field", line_no);
    out.push_back(std::move(cur));
    return out;
}

double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

clustering::PointSet to_points(const features::FeatureTable& normalized) {
    clustering::PointSet pts(features::kFeatureCount);
    for (const auto& r : normalized.rows) pts.push_back(r.features.to_array());
    return pts;
}

features::FeatureTable load_normalized_features(const PipelineConfig& c, features::FeatureTable& raw) {
    raw = read_feature_csv(textio::read_file(output_file(c, kFeaturesFile)));
    std::sort(raw.rows.begin(), raw.rows.end(),
              [](const auto& a, const auto& b) { return a.cell_id < b.cell_id; });
    const auto norm = read_normalization_json(textio::read_file(output_file(c, kNormalizationFile)));
    return features::apply_normalization(raw, norm);
}

clustering::KMeansOptions kmeans_options(const PipelineConfig& c) {
    clustering::KMeansOptions o;
    o.k = c.params.k;
    o.seed = c.params.seed;
    o.restarts = c.params.restarts;
    o.max_iter = c.params.max_iter;
    o.tol = c.params.tol;
    o.threads = c.threads;
    return o;
}

}  // namespace

// ---------------------------------------------------------------- config

PipelineConfig parse_config(const std::string& text, const std::string& base_dir) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw ConfigError("config must be a JSON object");

    PipelineConfig c;
    try {
        for (const auto& [key, value] : doc.items()) {
            if (key == "crs") {
                c.crs = value.get<std::string>();
            } else if (key == "threads") {
                c.threads = value.get<unsigned>();
            } else if (key == "paths") {
                for (const auto& [pk, pv] : value.items()) {
                    const std::string p = pv.get<std::string>();
                    if (pk == "favelas") c.paths.favelas = p;
                    else if (pk == "ndvi") c.paths.ndvi = p;
                    else if (pk == "red") c.paths.red = p;
                    else if (pk == "nir") c.paths.nir = p;
                    else if (pk == "gray") c.paths.gray = p;
                    else if (pk == "dem") c.paths.dem = p;
                    else if (pk == "roads") c.paths.roads = p;
                    else if (pk == "lst_dir") c.paths.lst_dir = p;
                    else if (pk == "output") c.paths.output = p;
                    else throw ConfigError("unknown key paths." + pk);
                }
            } else if (key == "params") {
                auto& p = c.params;
                for (const auto& [pk, pv] : value.items()) {
                    if (pk == "cell_size") p.cell_size = pv.get<double>();
                    else if (pk == "merge_threshold") p.merge_threshold = pv.get<double>();
                    else if (pk == "min_coverage") p.min_coverage = pv.get<double>();
                    else if (pk == "extent") {
                        const auto e = pv.get<std::vector<double>>();
                        if (e.size() != 4) throw ConfigError("params.extent must be [min_x, min_y, max_x, max_y]");
                        p.extent = geo::BBox{e[0], e[1], e[2], e[3]};
                    }
                    else if (pk == "id_property") p.id_property = pv.get<std::string>();
                    else if (pk == "entropy_bins") p.entropy_bins = pv.get<int>();
                    else if (pk == "normalization") p.normalization = pv.get<std::string>();
                    else if (pk == "snap_tol") p.snap_tol = pv.get<double>();
                    else if (pk == "highway_filter") p.highway_filter = pv.get<std::vector<std::string>>();
                    else if (pk == "k") p.k = pv.get<int>();
                    else if (pk == "seed") p.seed = pv.get<std::uint64_t>();
                    else if (pk == "restarts") p.restarts = pv.get<int>();
                    else if (pk == "max_iter") p.max_iter = pv.get<int>();
                    else if (pk == "tol") p.tol = pv.get<double>();
                    else if (pk == "k_min") p.k_min = pv.get<int>();
                    else if (pk == "k_max") p.k_max = pv.get<int>();
                    else if (pk == "heat_threshold") p.heat_threshold = pv.get<double>();
                    else if (pk == "lst_scale") p.lst_scale = pv.get<double>();
                    else if (pk == "lst_offset") p.lst_offset = pv.get<double>();
                    else if (pk == "lst_units") p.lst_units = pv.get<std::string>();
                    else if (pk == "whisker") p.whisker = pv.get<std::string>();
                    else throw ConfigError("unknown key params." + pk);
                }
            } else {
                throw ConfigError("unknown config key '" + key + "'");
            }
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config value has the wrong type: ") + e.what());
    }

    auto& p = c.paths;
    for (std::string* s : {&p.favelas, &p.ndvi, &p.red, &p.nir, &p.gray, &p.dem, &p.roads, &p.lst_dir, &p.output}) {
        *s = resolve(base_dir, *s);
    }
    return c;
}

PipelineConfig load_config(const std::string& path) {
    const std::string base = fs::path(path).parent_path().string();
    return parse_config(textio::read_file(path), base.empty() ? "." : base);
}

std::string command_name(Command c) {
    switch (c) {
        case Command::Grid: return "grid";
        case Command::Features: return "features";
        case Command::Cluster: return "cluster";
        case Command::SelectK: return "select-k";
        case Command::Lst: return "lst";
    }
    return "?";
}

void validate_config(const PipelineConfig& c, Command command) {
    const auto& p = c.params;
    auto check = [](bool ok, const std::string& msg) {
        if (!ok) throw ConfigError(msg);
    };
    check(!c.crs.empty(), "crs must be declared");
    check(p.cell_size > 0.0, "cell_size must be positive");
    check(p.merge_threshold > 0.0, "merge_threshold must be positive");
    check(p.min_coverage >= 0.0 && p.min_coverage <= 1.0, "min_coverage must lie in [0, 1]");
    check(!p.extent || (p.extent->width() > 0.0 && p.extent->height() > 0.0), "extent must have positive area");
    check(p.entropy_bins >= 1, "entropy_bins must be at least 1");
    check(p.snap_tol >= 0.0, "snap_tol must be non-negative");
    check(p.k >= 1, "k must be at least 1");
    check(p.restarts >= 1, "restarts must be at least 1");
    check(p.max_iter >= 1, "max_iter must be at least 1");
    check(p.tol >= 0.0, "tol must be non-negative");
    check(p.k_min >= 1 && p.k_min <= p.k_max, "k range must satisfy 1 <= k_min <= k_max");
    check(p.lst_scale > 0.0, "lst_scale must be positive");
    check(c.threads >= 1, "threads must be at least 1");
    check(!c.paths.output.empty(), "output directory must be set");
    try {
        features::parse_method(p.normalization);
        lst::parse_units(p.lst_units);
    } catch (const ValidationError& e) {
        throw ConfigError(e.what());
    }
    parse_whisker(p.whisker);

    switch (command) {
        case Command::Grid:
            require_file(c.paths.favelas, "favelas");
            break;
        case Command::Features:
            if (c.paths.ndvi.empty()) {
                require_file(c.paths.red, "red band");
                require_file(c.paths.nir, "nir band");
            } else {
                require_file(c.paths.ndvi, "ndvi");
            }
            require_file(c.paths.gray, "gray band");
            require_file(c.paths.dem, "dem");
            require_file(c.paths.roads, "roads");
            require_artifact(c, kGridFile, "grid");
            require_artifact(c, kCellsFile, "grid");
            break;
        case Command::Cluster:
        case Command::SelectK:
            require_artifact(c, kFeaturesFile, "features");
            require_artifact(c, kNormalizationFile, "features");
            break;
        case Command::Lst:
            check(!c.paths.lst_dir.empty() && fs::is_directory(c.paths.lst_dir),
                  "lst_dir '" + c.paths.lst_dir + "' is not a directory");
            require_artifact(c, kGridFile, "grid");
            require_artifact(c, kCellsFile, "grid");
            require_artifact(c, kModelFile, "cluster");
            break;
    }
}

// ---------------------------------------------------------------- formats

std::string write_feature_csv(const features::FeatureTable& table) {
    std::ostringstream out;
    out << "cell_row,cell_col,complex_id";
    for (auto name : features::kFeatureNames) out << ',' << name;
    out << '\n';
    for (const auto& r : table.rows) {
        out << r.cell_id.row << ',' << r.cell_id.col << ',' << csv_field(r.complex_id);
        for (double v : r.features.to_array()) out << ',' << format_double(v);
        out << '\n';
    }
    return out.str();
}

features::FeatureTable read_feature_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    features::FeatureTable table;
    if (!std::getline(in, line)) throw ParseError("feature CSV is empty", 1);
    ++line_no;
    const auto header = csv_split(line, line_no);
    std::vector<std::string> expected{"cell_row", "cell_col", "complex_id"};
    for (auto n : features::kFeatureNames) expected.emplace_back(n);
    if (header != expected) throw ParseError("unexpected feature CSV header", line_no);
    while (std::getline(in, line)) {
        ++line_no;
        if (textio::trim(line).empty()) continue;
        const auto f = csv_split(line, line_no);
        if (f.size() != expected.size()) {
            throw ParseError("expected " + std::to_string(expected.size()) + " fields, found " +
                                 std::to_string(f.size()),
                             line_no);
        }
        features::FeatureRow row;
        const auto r = textio::parse_int(f[0]);
        const auto c = textio::parse_int(f[1]);
        if (!r || !c) throw ParseError("cell_row and cell_col must be integers", line_no);
        row.cell_id = geo::CellId{static_cast<int>(*r), static_cast<int>(*c)};
        row.complex_id = f[2];
        std::array<double, features::kFeatureCount> values{};
        for (std::size_t i = 0; i < values.size(); ++i) {
            const auto v = textio::parse_double(f[3 + i]);
            if (!v) throw ParseError("non-numeric value '" + f[3 + i] + "'", line_no);
            values[i] = *v;
        }
        row.features = features::FeatureVector::from_array(values);
        table.rows.push_back(std::move(row));
    }
    return table;
}

std::string write_normalization_json(const features::Normalization& n) {
    const bool z = n.method == features::NormalizationMethod::ZScore;
    ojson doc;
    doc["method"] = std::string(features::method_name(n.method));
    doc["features"] = ojson::array();
    for (std::size_t f = 0; f < features::kFeatureCount; ++f) {
        ojson e;
        e["name"] = std::string(features::kFeatureNames[f]);
        e[z ? "mean" : "min"] = n.center[f];
        e[z ? "std" : "range"] = n.scale[f];
        e["constant"] = n.constant[f];
        doc["features"].push_back(std::move(e));
    }
    return doc.dump(2) + "\n";
}

features::Normalization read_normalization_json(const std::string& text) {
    try {
        const json doc = json::parse(text);
        features::Normalization n;
        n.method = features::parse_method(doc.at("method").get<std::string>());
        const bool z = n.method == features::NormalizationMethod::ZScore;
        const auto& list = doc.at("features");
        if (!list.is_array() || list.size() != features::kFeatureCount) {
            throw ParseError("normalization must list all nine features");
        }
        for (std::size_t f = 0; f < features::kFeatureCount; ++f) {
            const auto& e = list[f];
            if (e.at("name").get<std::string>() != features::kFeatureNames[f]) {
                throw ParseError("normalization feature order mismatch at index " + std::to_string(f));
            }
            n.center[f] = e.at(z ? "mean" : "min").get<double>();
            n.scale[f] = e.at(z ? "std" : "range").get<double>();
            n.constant[f] = e.at("constant").get<bool>();
        }
        return n;
    } catch (const json::exception& e) {
        throw ParseError(std::string("malformed normalization JSON: ") + e.what());
    } catch (const ValidationError& e) {
        throw ParseError(e.what());
    }
}

std::string write_grid_json(const geo::Grid& grid, const std::string& crs) {
    ojson doc;
    doc["crs"] = crs;
    doc["origin_x"] = grid.origin.x;
    doc["origin_y"] = grid.origin.y;
    doc["cell_size"] = grid.cell_size;
    doc["n_rows"] = grid.n_rows;
    doc["n_cols"] = grid.n_cols;
    return doc.dump(2) + "\n";
}

geo::Grid read_grid_json(const std::string& text) {
    try {
        const json doc = json::parse(text);
        const json& g = doc.contains("grid") ? doc["grid"] : doc;
        geo::Grid grid;
        if (g.is_null()) return grid;
        grid.origin = {g.at("origin_x").get<double>(), g.at("origin_y").get<double>()};
        grid.cell_size = g.at("cell_size").get<double>();
        grid.n_rows = g.at("n_rows").get<int>();
        grid.n_cols = g.at("n_cols").get<int>();
        return grid;
    } catch (const json::exception& e) {
        throw ParseError(std::string("malformed grid JSON: ") + e.what());
    }
}

std::string write_curve_json(const clustering::KSelectionCurve& curve) {
    ojson arr = ojson::array();
    for (const auto& e : curve.entries) {
        ojson o;
        o["k"] = e.k;
        o["inertia"] = e.inertia;
        o["silhouette"] = number_or_null(e.silhouette);
        o["elbow_hint"] = e.elbow_hint;
        arr.push_back(std::move(o));
    }
    return arr.dump(2) + "\n";
}

std::map<geo::CellId, int> read_model_assignments(const std::string& text) {
    try {
        const json doc = json::parse(text);
        std::map<geo::CellId, int> out;
        for (const auto& a : doc.at("assignments")) {
            out[geo::CellId{a.at("cell_row").get<int>(), a.at("cell_col").get<int>()}] = a.at("label").get<int>();
        }
        return out;
    } catch (const json::exception& e) {
        throw ParseError(std::string("malformed model JSON: ") + e.what());
    }
}

namespace {

ojson stats_json(const lst::ClusterStats& s) {
    ojson o;
    o["label"] = s.label;
    o["count"] = s.count;
    o["q25"] = s.q25;
    o["median"] = s.median;
    o["q75"] = s.q75;
    o["mean"] = s.mean;
    return o;
}

}  // namespace

std::string write_report_json(const lst::HeatEventReport& report) {
    ojson doc;
    doc["threshold"] = report.threshold;
    doc["n_scenes"] = report.decisions.size();
    doc["n_events"] = report.events.size();
    doc["decisions"] = ojson::array();
    for (const auto& d : report.decisions) {
        doc["decisions"].push_back({{"date", d.date}, {"median", number_or_null(d.median)}, {"selected", d.selected}});
    }
    doc["events"] = ojson::array();
    for (const auto& e : report.events) {
        ojson o;
        o["date"] = e.date;
        o["scene_median"] = e.scene_median;
        o["clusters"] = ojson::array();
        for (const auto& s : e.clusters) o["clusters"].push_back(stats_json(s));
        if (e.comparison) {
            o["comparison"] = {{"hotter_label", e.comparison->hotter_label},
                               {"cooler_label", e.comparison->cooler_label},
                               {"median_difference", e.comparison->median_difference},
                               {"fraction_cooler_below", e.comparison->fraction_cooler_below}};
        } else {
            o["comparison"] = nullptr;
        }
        o["diagnostics"] = e.diagnostics;
        doc["events"].push_back(std::move(o));
    }
    return doc.dump(2) + "\n";
}

std::string write_report_csv(const lst::HeatEventReport& report) {
    std::ostringstream out;
    out << "date,scene_median,label,count,q25,median,q75,mean,median_difference,fraction_cooler_below\n";
    for (const auto& e : report.events) {
        for (const auto& s : e.clusters) {
            out << e.date << ',' << format_double(e.scene_median) << ',' << s.label << ',' << s.count << ','
                << format_double(s.q25) << ',' << format_double(s.median) << ',' << format_double(s.q75) << ','
                << format_double(s.mean) << ',';
            if (e.comparison) {
                out << format_double(e.comparison->median_difference) << ','
                    << format_double(e.comparison->fraction_cooler_below);
            } else {
                out << ',';
            }
            out << '\n';
        }
    }
    return out.str();
}

std::string write_boxplot_json(const lst::HeatEventReport& report, lst::WhiskerRule rule) {
    ojson doc;
    doc["whisker"] = rule == lst::WhiskerRule::Iqr15 ? "iqr1.5" : "minmax";
    doc["dates"] = ojson::array();
    for (const auto& e : report.events) {
        ojson boxes = ojson::array();
        for (const auto& b : e.boxes) {
            boxes.push_back({{"label", b.label},
                             {"q1", b.q1},
                             {"median", b.median},
                             {"q3", b.q3},
                             {"whisker_low", b.whisker_low},
                             {"whisker_high", b.whisker_high},
                             {"outliers", b.outliers}});
        }
        doc["dates"].push_back({{"date", e.date}, {"boxes", std::move(boxes)}});
    }
    return doc.dump(1) + "\n";
}

std::vector<lst::LstScene> load_scenes(const std::string& dir, lst::Units units, const std::string& crs) {
    static const std::regex scene_name(R"((\d{4}-\d{2}-\d{2})\.asc)");
    std::vector<std::string> dates;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        std::smatch m;
        const std::string name = entry.path().filename().string();
        if (std::regex_match(name, m, scene_name)) dates.push_back(m[1]);
    }
    std::sort(dates.begin(), dates.end());
    std::vector<lst::LstScene> scenes;
    for (const auto& date : dates) {
        lst::LstScene s;
        s.date = date;
        s.units = units;
        s.raster = load_raster((fs::path(dir) / (date + ".asc")).string(), crs);
        const fs::path mask = fs::path(dir) / (date + ".mask.asc");
        if (fs::is_regular_file(mask)) {
            s.mask = load_raster(mask.string(), crs);
            if (!s.mask->same_georeference(s.raster)) {
                throw ParseError("mask '" + mask.string() + "' does not match its scene georeference");
            }
        }
        scenes.push_back(std::move(s));
    }
    return scenes;
}

// ---------------------------------------------------------------- commands

CommandResult run_grid(const PipelineConfig& c) {
    validate_config(c, Command::Grid);
    const auto& p = c.params;
    CommandResult result;

    const auto records = stage("read-favelas", [&] {
        return geojson::parse_favelas(textio::read_file(c.paths.favelas), p.id_property, c.crs);
    });
    const auto complexes =
        stage("merge", [&] { return geo::merge_favelas(records, p.merge_threshold, c.threads); });

    std::optional<geo::Grid> grid;
    std::vector<geo::GridCell> all_cells;
    std::vector<geo::GridCell> retained;
    geo::BBox extent = geo::BBox::empty();
    if (p.extent) {
        extent = *p.extent;
    } else {
        for (const auto& cx : complexes) extent.expand(cx.bounds());
    }
    if (extent.is_empty()) {
        result.warnings.push_back("no favela polygons and no configured extent; zero cells retained");
    } else {
        grid = stage("grid", [&] { return geo::build_grid(extent, p.cell_size); });
        all_cells = stage("coverage", [&] { return geo::compute_coverage(*grid, complexes, c.threads); });
        retained = geo::filter_cells(all_cells, p.min_coverage);
        if (retained.empty()) result.warnings.push_back("no cell reaches the minimum coverage");
    }

    ojson grid_doc;
    grid_doc["crs"] = c.crs;
    if (grid) {
        grid_doc["grid"] = json::parse(write_grid_json(*grid, c.crs));
        grid_doc["grid"].erase("crs");
    } else {
        grid_doc["grid"] = nullptr;
    }
    grid_doc["parameters"] = {{"cell_size", p.cell_size},
                              {"merge_threshold", p.merge_threshold},
                              {"min_coverage", p.min_coverage}};
    grid_doc["summary"] = {{"n_favelas", records.size()},
                           {"n_complexes", complexes.size()},
                           {"n_cells", all_cells.size()},
                           {"n_retained", retained.size()}};
    grid_doc["warnings"] = result.warnings;

    Staging out(c.paths.output, "grid");
    out.add(kGridFile, grid_doc.dump(2) + "\n");
    out.add(kComplexesFile, geojson::write_complexes(complexes, c.crs));
    out.add(kCellsFile, geojson::write_cells(retained, c.crs));
    result.artifacts = out.commit();

    result.summary = {{"cell_size", format_double(p.cell_size)},
                      {"merge_threshold", format_double(p.merge_threshold)},
                      {"min_coverage", format_double(p.min_coverage)},
                      {"favelas", std::to_string(records.size())},
                      {"complexes", std::to_string(complexes.size())},
                      {"cells", std::to_string(all_cells.size())},
                      {"retained_cells", std::to_string(retained.size())}};
    return result;
}

CommandResult run_features(const PipelineConfig& c) {
    validate_config(c, Command::Features);
    const auto& p = c.params;
    CommandResult result;

    const auto cells = stage("read-cells", [&] { return load_cells(c); });
    const auto ndvi = stage("ndvi", [&] {
        if (!c.paths.ndvi.empty()) return load_raster(c.paths.ndvi, c.crs);
        return features::compute_ndvi(load_raster(c.paths.red, c.crs), load_raster(c.paths.nir, c.crs));
    });
    const auto gray = stage("read-gray", [&] { return load_raster(c.paths.gray, c.crs); });
    const auto dem = stage("read-dem", [&] { return load_raster(c.paths.dem, c.crs); });
    const auto slope = stage("slope", [&] { return features::compute_slope(dem); });
    const auto convexity = stage("convexity", [&] { return features::compute_convexity(dem); });

    const auto network = stage("roads", [&] {
        const auto lines = geojson::parse_roads(textio::read_file(c.paths.roads), p.highway_filter, c.crs);
        return roadnet::build_network(lines, p.snap_tol);
    });
    std::vector<geo::BBox> boxes;
    for (const auto& cell : cells) boxes.push_back(cell.bbox);
    const auto metrics = roadnet::cells_road_metrics(network, boxes, c.threads);
    std::map<geo::CellId, roadnet::RoadMetrics> by_cell;
    for (std::size_t i = 0; i < cells.size(); ++i) by_cell[cells[i].cell_id] = metrics[i];

    features::AssembleOptions opts;
    opts.entropy_bins = p.entropy_bins;
    opts.threads = c.threads;
    const auto raw = stage("assemble", [&] {
        return features::assemble_features(cells, ndvi, gray, slope, convexity, by_cell, opts);
    });
    const auto normalized =
        stage("normalize", [&] { return features::normalize(raw, features::parse_method(p.normalization)); });

    for (const auto& d : raw.dropped) {
        result.warnings.push_back("dropped cell (" + std::to_string(d.cell_id.row) + "," +
                                  std::to_string(d.cell_id.col) + "): " + d.reason);
    }

    ojson summary;
    summary["n_cells"] = cells.size();
    summary["n_rows"] = raw.rows.size();
    summary["n_dropped"] = raw.dropped.size();
    summary["dropped"] = ojson::array();
    for (const auto& d : raw.dropped) {
        summary["dropped"].push_back({{"cell_row", d.cell_id.row}, {"cell_col", d.cell_id.col}, {"reason", d.reason}});
    }
    summary["constant_features"] = ojson::array();
    for (std::size_t f = 0; f < features::kFeatureCount; ++f) {
        if (normalized.normalization->constant[f]) {
            summary["constant_features"].push_back(std::string(features::kFeatureNames[f]));
        }
    }
    summary["road_network"] = {{"nodes", network.nodes.size()},
                               {"edges", network.edges.size()},
                               {"total_length", network.total_length()},
                               {"diagnostics", network.diagnostics}};
    summary["entropy_bins"] = p.entropy_bins;
    summary["normalization"] = p.normalization;

    Staging out(c.paths.output, "features");
    out.add(kFeaturesFile, write_feature_csv(raw));
    out.add(kFeaturesNormFile, write_feature_csv(normalized));
    out.add(kNormalizationFile, write_normalization_json(*normalized.normalization));
    out.add(kFeaturesSummaryFile, summary.dump(2) + "\n");
    result.artifacts = out.commit();

    result.summary = {{"cells", std::to_string(cells.size())},
                      {"feature_rows", std::to_string(raw.rows.size())},
                      {"dropped_rows", std::to_string(raw.dropped.size())},
                      {"road_nodes", std::to_string(network.nodes.size())},
                      {"road_edges", std::to_string(network.edges.size())}};
    return result;
}

CommandResult run_cluster(const PipelineConfig& c) {
    validate_config(c, Command::Cluster);
    CommandResult result;

    features::FeatureTable raw;
    const auto normalized = stage("read-features", [&] { return load_normalized_features(c, raw); });
    std::vector<std::string> keys;
    for (const auto& r : normalized.rows) keys.push_back(r.complex_id);
    const auto constraints = clustering::Constraints::from_keys(keys);
    const auto points = to_points(normalized);
    const auto model = stage("cop-kmeans", [&] { return clustering::cop_kmeans(points, constraints, kmeans_options(c)); });

    std::map<geo::CellId, int> labels;
    ojson assignments = ojson::array();
    for (std::size_t i = 0; i < normalized.rows.size(); ++i) {
        const auto& r = normalized.rows[i];
        labels[r.cell_id] = model.labels[i];
        assignments.push_back({{"cell_row", r.cell_id.row},
                               {"cell_col", r.cell_id.col},
                               {"complex_id", r.complex_id},
                               {"label", model.labels[i]}});
    }

    ojson doc;
    doc["k"] = model.k;
    doc["seed"] = model.seed;
    doc["restarts"] = model.restarts;
    doc["best_restart"] = model.best_restart;
    doc["n_iter"] = model.n_iter;
    doc["converged"] = model.converged;
    doc["inertia"] = model.inertia;
    doc["restart_inertias"] = model.restart_inertias;
    doc["features"] = ojson::array();
    for (auto n : features::kFeatureNames) doc["features"].push_back(std::string(n));
    doc["normalization"] = kNormalizationFile;
    doc["centroids"] = ojson::array();
    for (std::size_t j = 0; j < model.centroids.size(); ++j) {
        const auto row = model.centroids[j];
        doc["centroids"].push_back(std::vector<double>(row.begin(), row.end()));
    }
    doc["assignments"] = std::move(assignments);

    // Raw-unit medians per cluster.
    ojson summary;
    summary["k"] = model.k;
    summary["inertia"] = model.inertia;
    summary["clusters"] = ojson::array();
    const auto& norm = *normalized.normalization;
    for (int label = 0; label < model.k; ++label) {
        std::array<std::vector<double>, features::kFeatureCount> cols;
        std::set<std::string> complexes;
        for (std::size_t i = 0; i < raw.rows.size(); ++i) {
            if (model.labels[i] != label) continue;
            const auto a = raw.rows[i].features.to_array();
            for (std::size_t f = 0; f < a.size(); ++f) cols[f].push_back(a[f]);
            complexes.insert(raw.rows[i].complex_id);
        }
        ojson medians;
        ojson centroid;
        for (std::size_t f = 0; f < features::kFeatureCount; ++f) {
            const std::string name(features::kFeatureNames[f]);
            medians[name] = cols[f].empty() ? ojson(nullptr) : ojson(median_of(cols[f]));
            centroid[name] = norm.invert(f, model.centroids[static_cast<std::size_t>(label)][f]);
        }
        summary["clusters"].push_back({{"label", label},
                                       {"n_cells", cols[0].size()},
                                       {"n_complexes", complexes.size()},
                                       {"median", std::move(medians)},
                                       {"centroid", std::move(centroid)}});
    }

    const auto cells = stage("read-cells", [&] {
        std::vector<geo::GridCell> out;
        if (fs::is_regular_file(output_file(c, kGridFile)) && fs::is_regular_file(output_file(c, kCellsFile))) {
            out = load_cells(c);
        }
        return out;
    });
    std::vector<geo::GridCell> labeled;
    for (const auto& cell : cells) {
        if (labels.count(cell.cell_id)) labeled.push_back(cell);
    }

    Staging out(c.paths.output, "cluster");
    out.add(kModelFile, doc.dump(1) + "\n");
    out.add(kClusterSummaryFile, summary.dump(2) + "\n");
    out.add(kLabeledCellsFile, geojson::write_cells(labeled, c.crs, &labels));
    result.artifacts = out.commit();

    result.summary = {{"k", std::to_string(model.k)},
                      {"rows", std::to_string(points.size())},
                      {"groups", std::to_string(clustering::distinct_groups(constraints))},
                      {"inertia", format_double(model.inertia)},
                      {"iterations", std::to_string(model.n_iter)}};
    return result;
}

CommandResult run_select_k(const PipelineConfig& c) {
    validate_config(c, Command::SelectK);
    CommandResult result;
    features::FeatureTable raw;
    const auto normalized = stage("read-features", [&] { return load_normalized_features(c, raw); });
    std::vector<std::string> keys;
    for (const auto& r : normalized.rows) keys.push_back(r.complex_id);
    const auto constraints = clustering::Constraints::from_keys(keys);
    const auto points = to_points(normalized);
    const auto curve = stage("select-k", [&] {
        return clustering::select_k(points, constraints, c.params.k_min, c.params.k_max, kmeans_options(c));
    });

    Staging out(c.paths.output, "select-k");
    out.add(kCurveFile, write_curve_json(curve));
    result.artifacts = out.commit();
    for (const auto& e : curve.entries) {
        result.summary.emplace_back("k=" + std::to_string(e.k),
                                    "inertia " + format_double(e.inertia) + ", silhouette " +
                                        (e.silhouette ? format_double(*e.silhouette) : std::string("n/a")) +
                                        (e.elbow_hint ? " (elbow hint)" : ""));
    }
    return result;
}

CommandResult run_lst(const PipelineConfig& c) {
    validate_config(c, Command::Lst);
    const auto& p = c.params;
    CommandResult result;
    const auto units = lst::parse_units(p.lst_units);
    const auto rule = parse_whisker(p.whisker);

    const auto cells = stage("read-cells", [&] { return load_cells(c); });
    const auto labels =
        stage("read-model", [&] { return read_model_assignments(textio::read_file(output_file(c, kModelFile))); });
    const auto scenes = stage("read-scenes", [&] {
        std::vector<lst::LstScene> out;
        const lst::ThermalScale scale{p.lst_scale, p.lst_offset};
        for (const auto& s : load_scenes(c.paths.lst_dir, units, c.crs)) out.push_back(lst::to_celsius(s, scale));
        return out;
    });
    const auto report = stage("heat-events", [&] {
        return lst::analyze_heat_events(scenes, cells, labels, p.heat_threshold, rule, c.threads);
    });
    if (report.events.empty()) result.warnings.push_back("0 heat events selected");

    Staging out(c.paths.output, "lst");
    out.add(kReportJsonFile, write_report_json(report));
    out.add(kReportCsvFile, write_report_csv(report));
    out.add(kBoxplotFile, write_boxplot_json(report, rule));
    result.artifacts = out.commit();

    result.summary = {{"heat_threshold", format_double(p.heat_threshold)},
                      {"scenes", std::to_string(report.decisions.size())},
                      {"heat_events", std::to_string(report.events.size())}};
    for (const auto& d : report.decisions) {
        result.summary.emplace_back(d.date, (d.median ? "median " + format_double(*d.median) : std::string("no valid pixels")) +
                                                (d.selected ? " -> selected" : " -> rejected"));
    }
    return result;
}

CommandResult run(Command command, const PipelineConfig& config) {
    switch (command) {
        case Command::Grid: return run_grid(config);
        case Command::Features: return run_features(config);
        case Command::Cluster: return run_cluster(config);
        case Command::SelectK: return run_select_k(config);
        case Command::Lst: return run_lst(config);
    }
    throw ValidationError("unknown command");
}

}  // namespace favheat::pipeline
