#pragma once

// Batch pipeline: config handling and the grid / features / cluster /
// select-k / lst commands. Every command validates its config, stages its
// artifacts in a temporary directory and moves them into the output
// directory only on success.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "favheat/clustering.hpp"
#include "favheat/features.hpp"
#include "favheat/geometry.hpp"
#include "favheat/lst.hpp"

namespace favheat::pipeline {

struct Paths {
    std::string favelas;
    std::string ndvi;  // optional precomputed NDVI; otherwise red + nir
    std::string red;
    std::string nir;
    std::string gray;
    std::string dem;
    std::string roads;
    std::string lst_dir;
    std::string output = "out";
};

struct Parameters {
    double cell_size = geo::kDefaultCellSize;
    double merge_threshold = geo::kDefaultMergeThreshold;
    double min_coverage = geo::kDefaultMinCoverage;
    std::optional<geo::BBox> extent;
    std::string id_property = "favela_id";

    int entropy_bins = features::kDefaultEntropyBins;
    std::string normalization = "zscore";
    double snap_tol = roadnet::kDefaultSnapTolerance;
    std::vector<std::string> highway_filter;

    int k = 2;
    std::uint64_t seed = 0;
    int restarts = 10;
    int max_iter = 300;
    double tol = 1e-6;
    int k_min = 2;
    int k_max = 10;

    double heat_threshold = lst::kDefaultHeatThreshold;
    double lst_scale = lst::ThermalScale{}.scale;
    double lst_offset = lst::ThermalScale{}.offset;
    std::string lst_units = "dn";
    std::string whisker = "iqr1.5";
};

struct PipelineConfig {
    std::string crs;
    Paths paths;
    Parameters params;
    unsigned threads = 1;
    bool verbose = false;
};

/// Parses a JSON config. Relative paths are resolved against base_dir.
/// Throws ConfigError on malformed content or unknown keys.
PipelineConfig parse_config(const std::string& text, const std::string& base_dir = ".");
PipelineConfig load_config(const std::string& path);

enum class Command { Grid, Features, Cluster, SelectK, Lst };

std::string command_name(Command c);

/// Range checks and existence of every input path the command reads.
/// Throws ConfigError.
void validate_config(const PipelineConfig& config, Command command);

struct CommandResult {
    std::vector<std::string> artifacts;                        // file names written
    std::vector<std::pair<std::string, std::string>> summary;  // key, value
    std::vector<std::string> warnings;
};

CommandResult run_grid(const PipelineConfig& config);
CommandResult run_features(const PipelineConfig& config);
CommandResult run_cluster(const PipelineConfig& config);
CommandResult run_select_k(const PipelineConfig& config);
CommandResult run_lst(const PipelineConfig& config);
CommandResult run(Command command, const PipelineConfig& config);

// Artifact formats, exposed for tests and downstream tools.

std::string write_feature_csv(const features::FeatureTable& table);
/// Throws ParseError with the line number on malformed rows.
features::FeatureTable read_feature_csv(const std::string& text);

std::string write_normalization_json(const features::Normalization& n);
features::Normalization read_normalization_json(const std::string& text);

std::string write_grid_json(const geo::Grid& grid, const std::string& crs);
geo::Grid read_grid_json(const std::string& text);

std::string write_curve_json(const clustering::KSelectionCurve& curve);

/// Reads the cell -> label mapping of a model JSON.
std::map<geo::CellId, int> read_model_assignments(const std::string& text);

std::string write_report_json(const lst::HeatEventReport& report);
std::string write_report_csv(const lst::HeatEventReport& report);
std::string write_boxplot_json(const lst::HeatEventReport& report, lst::WhiskerRule rule);

/// Scenes named YYYY-MM-DD.asc (with optional YYYY-MM-DD.mask.asc), sorted by
/// date.
std::vector<lst::LstScene> load_scenes(const std::string& dir, lst::Units units, const std::string& crs);

}  // namespace favheat::pipeline
