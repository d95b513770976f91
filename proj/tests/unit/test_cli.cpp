#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <string>
#include <sys/wait.h>

#include <json.hpp>

#include "favheat/textio.hpp"
#include "synthetic.hpp"

using namespace favheat;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

int run_cli(const std::string& args, const std::string& log) {
    const std::string cmd = std::string("\"") + FAVHEAT_CLI_PATH + "\" " + args + " >\"" + log + "\" 2>&1";
    const int status = std::system(cmd.c_str());
    REQUIRE(status != -1);
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

json planted_config_json(const testing::PlantedFixture& f, const std::string& out) {
    const auto e = f.grid.extent();
    return {{"crs", f.crs},
            {"paths",
             {{"favelas", "favelas.geojson"},
              {"red", "red.asc"},
              {"nir", "nir.asc"},
              {"gray", "gray.asc"},
              {"dem", "dem.asc"},
              {"roads", "roads.geojson"},
              {"lst_dir", "lst"},
              {"output", out}}},
            {"params", {{"extent", {e.min_x, e.min_y, e.max_x, e.max_y}}, {"k", 2}, {"restarts", 2}}}};
}

}  // namespace

TEST_CASE("cli runs the pipeline and maps errors to exit codes") {
    const std::string dir = testing::fresh_dir("cli");
    testing::PlantedOptions opts;
    opts.n_rows = 8;
    opts.n_cols = 30;
    const auto f = testing::write_planted_fixture(dir, opts);
    const std::string log = dir + "/log.txt";
    const std::string config = dir + "/config.json";
    textio::write_file(config, planted_config_json(f, "out").dump(2));

    CHECK(run_cli("--help", log) == 0);
    CHECK(run_cli("", log) == 2);
    CHECK(run_cli("--config " + config + " bogus", log) == 2);
    CHECK(run_cli("--config " + dir + "/missing.json grid", log) == 2);

    CHECK(run_cli("--config " + config + " grid", log) == 0);
    CHECK(textio::read_file(log).find("complexes: " + std::to_string(f.n_complexes)) != std::string::npos);
    CHECK(fs::exists(dir + "/out/cells.geojson"));
    CHECK(run_cli("--config " + config + " --threads 2 features", log) == 0);
    CHECK(run_cli("--config " + config + " --seed 5 cluster", log) == 0);
    CHECK(json::parse(textio::read_file(dir + "/out/model.json"))["seed"] == 5);
    CHECK(run_cli("--config " + config + " lst", log) == 0);
    CHECK(textio::read_file(log).find("heat_events: " + std::to_string(f.hot_dates.size())) != std::string::npos);

    // flags override the config
    CHECK(run_cli("--config " + config + " --out " + dir + "/other grid", log) == 0);
    CHECK(fs::exists(dir + "/other/grid.json"));

    SUBCASE("infeasible k") {
        json c = planted_config_json(f, "out");
        c["params"]["k"] = 100000;
        textio::write_file(config, c.dump());
        CHECK(run_cli("--config " + config + " cluster", log) == 4);
    }
    SUBCASE("unknown config key") {
        json c = planted_config_json(f, "out");
        c["params"]["clusters"] = 3;
        textio::write_file(config, c.dump());
        CHECK(run_cli("--config " + config + " grid", log) == 2);
    }
    SUBCASE("missing layer") {
        json c = planted_config_json(f, "out");
        c["paths"]["dem"] = "nowhere.asc";
        textio::write_file(config, c.dump());
        CHECK(run_cli("--config " + config + " features", log) == 2);
    }
    SUBCASE("malformed raster") {
        textio::write_file(dir + "/gray_bad.asc", "ncols 2\nnrows 1\nxllcorner 0\nyllcorner 0\ncellsize 30\n1 x\n");
        json c = planted_config_json(f, "out");
        c["paths"]["gray"] = "gray_bad.asc";
        textio::write_file(config, c.dump());
        CHECK(run_cli("--config " + config + " features", log) == 3);
        CHECK(textio::read_file(log).find("line 6") != std::string::npos);
    }
}
