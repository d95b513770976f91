#include <doctest.h>

#include <filesystem>
#include <map>
#include <string>

#include <json.hpp>

#include "favheat/error.hpp"
#include "favheat/geojson.hpp"
#include "favheat/pipeline.hpp"
#include "favheat/textio.hpp"
#include "synthetic.hpp"

using namespace favheat;
using namespace favheat::pipeline;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::string summary_value(const CommandResult& r, const std::string& key) {
    for (const auto& [k, v] : r.summary) {
        if (k == key) return v;
    }
    return {};
}

json read_json(const std::string& path) { return json::parse(textio::read_file(path)); }

std::string write_favelas(const std::string& dir, const std::string& features) {
    const std::string path = dir + "/favelas.geojson";
    textio::write_file(path, R"({"type":"FeatureCollection","features":[)" + features + "]}");
    return path;
}

std::string square_feature(const std::string& id, double x0, double y0, double side) {
    const auto n = [](double v) { return textio::format_double(v); };
    return R"({"type":"Feature","properties":{"favela_id":")" + id +
           R"("},"geometry":{"type":"Polygon","coordinates":[[[)" + n(x0) + "," + n(y0) + "],[" + n(x0 + side) +
           "," + n(y0) + "],[" + n(x0 + side) + "," + n(y0 + side) + "],[" + n(x0) + "," + n(y0 + side) + "],[" +
           n(x0) + "," + n(y0) + "]]]}}";
}

bool has_staging_leftovers(const std::string& dir) {
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.path().filename().string().rfind(".staging", 0) == 0) return true;
    }
    return false;
}

}  // namespace

TEST_CASE("grid command echoes its parameters and merges complexes") {
    const std::string dir = testing::fresh_dir("pipeline-grid");
    PipelineConfig c;
    c.crs = "EPSG:31983";
    // A and B are 15 m apart, C is 100 m away from both
    c.paths.favelas = write_favelas(dir, square_feature("A", 0, 0, 100) + "," + square_feature("B", 115, 0, 100) +
                                             "," + square_feature("C", 315, 0, 100));
    c.paths.output = dir + "/out";
    const CommandResult r = run_grid(c);
    CHECK(summary_value(r, "cell_size") == "150");
    CHECK(summary_value(r, "merge_threshold") == "20");
    CHECK(summary_value(r, "min_coverage") == "0.7");
    CHECK(summary_value(r, "favelas") == "3");
    CHECK(summary_value(r, "complexes") == "2");
    const json grid = read_json(c.paths.output + "/grid.json");
    CHECK(grid["parameters"]["cell_size"] == 150.0);
    CHECK(grid["summary"]["n_complexes"] == 2);
    const json complexes = read_json(c.paths.output + "/complexes.geojson");
    CHECK(complexes["features"].size() == 2);
    CHECK_FALSE(has_staging_leftovers(c.paths.output));
}

TEST_CASE("grid command with no polygons warns and retains nothing") {
    const std::string dir = testing::fresh_dir("pipeline-empty");
    PipelineConfig c;
    c.crs = "EPSG:31983";
    c.paths.favelas = write_favelas(dir, "");
    c.paths.output = dir + "/out";
    const CommandResult r = run_grid(c);
    CHECK(summary_value(r, "retained_cells") == "0");
    REQUIRE(r.warnings.size() == 1);
    CHECK(geojson::parse_cells(textio::read_file(c.paths.output + "/cells.geojson")).empty());
}

TEST_CASE("a failing command leaves the output directory untouched") {
    const std::string dir = testing::fresh_dir("pipeline-fail");
    PipelineConfig c;
    c.crs = "EPSG:31983";
    c.paths.favelas = dir + "/favelas.geojson";
    textio::write_file(c.paths.favelas, "{\"type\":\"FeatureCollection\",\"features\":[{]}");
    c.paths.output = dir + "/out";
    CHECK_THROWS_AS(run_grid(c), ParseError);
    CHECK_FALSE(fs::exists(c.paths.output + "/grid.json"));
    if (fs::exists(c.paths.output)) CHECK_FALSE(has_staging_leftovers(c.paths.output));
}

TEST_CASE("commands check their prerequisites") {
    const std::string dir = testing::fresh_dir("pipeline-prereq");
    PipelineConfig c;
    c.crs = "EPSG:31983";
    c.paths.favelas = write_favelas(dir, square_feature("A", 0, 0, 100));
    c.paths.output = dir + "/out";
    CHECK_THROWS_AS(run_features(c), ConfigError);  // no raster layers
    CHECK_THROWS_AS(run_cluster(c), ConfigError);   // no features yet
    CHECK_THROWS_AS(run_lst(c), ConfigError);
}

TEST_CASE("end-to-end on a small planted fixture") {
    const std::string dir = testing::fresh_dir("pipeline-planted");
    testing::PlantedOptions opts;
    opts.n_rows = 12;
    opts.n_cols = 32;
    const auto f = testing::write_planted_fixture(dir + "/in", opts);
    PipelineConfig c = testing::planted_config(f, dir + "/out");
    c.params.restarts = 3;

    const auto g = run_grid(c);
    CHECK(summary_value(g, "favelas") == std::to_string(f.n_favelas));
    CHECK(summary_value(g, "complexes") == std::to_string(f.n_complexes));

    const auto fe = run_features(c);
    CHECK(summary_value(fe, "dropped_rows") == "0");
    const auto csv = read_feature_csv(textio::read_file(c.paths.output + "/features.csv"));
    CHECK(csv.rows.size() == f.planted.size());
    CHECK(fs::exists(c.paths.output + "/normalization.json"));

    const auto cl = run_cluster(c);
    CHECK(summary_value(cl, "k") == "2");
    const json summary = read_json(c.paths.output + "/cluster_summary.json");
    REQUIRE(summary["clusters"].size() == 2);
    for (const auto& cluster : summary["clusters"]) CHECK(cluster["median"].size() == features::kFeatureCount);
    const json& a = summary["clusters"][0]["median"];
    const json& b = summary["clusters"][1]["median"];
    const bool a_steeper = a["slope"].get<double>() > b["slope"].get<double>();
    const json& steep = a_steeper ? a : b;
    const json& flat = a_steeper ? b : a;
    CHECK(steep["road_length"].get<double>() < flat["road_length"].get<double>());
    CHECK(steep["nodes"].get<double>() < flat["nodes"].get<double>());

    // every complex is monochromatic
    const auto labels = read_model_assignments(textio::read_file(c.paths.output + "/model.json"));
    std::map<std::string, int> complex_label;
    for (const auto& row : csv.rows) {
        const int l = labels.at(row.cell_id);
        const auto [it, inserted] = complex_label.emplace(row.complex_id, l);
        CHECK(it->second == l);
    }

    c.params.k_min = 2;
    c.params.k_max = 4;
    run_select_k(c);
    const json curve = read_json(c.paths.output + "/k_selection.json");
    REQUIRE(curve.size() == 3);
    CHECK(curve[0]["k"] == 2);

    const auto ls = run_lst(c);
    CHECK(summary_value(ls, "scenes") == std::to_string(f.hot_dates.size() + f.cool_dates.size()));
    CHECK(summary_value(ls, "heat_events") == std::to_string(f.hot_dates.size()));
    const json report = read_json(c.paths.output + "/heat_report.json");
    CHECK(report["decisions"].size() == f.hot_dates.size() + f.cool_dates.size());
    CHECK(report["events"].size() == f.hot_dates.size());
    CHECK(fs::exists(c.paths.output + "/heat_report.csv"));
    CHECK(fs::exists(c.paths.output + "/lst_boxplot.json"));

    c.params.heat_threshold = 80.0;
    const auto none = run_lst(c);
    CHECK(summary_value(none, "heat_events") == "0");
    REQUIRE(none.warnings.size() == 1);
    CHECK(none.warnings[0] == "0 heat events selected");
    CHECK_FALSE(has_staging_leftovers(c.paths.output));

    c.params.k = 1000;
    CHECK_THROWS_AS(run_cluster(c), InfeasibleError);
}
