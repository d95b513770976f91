#pragma once

// Per-cell descriptors used for the settlement typology: spectral and
// terrain layers aggregated to grid cells, road-network metrics, and the
// normalized feature table fed to the clusterer.

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "favheat/geometry.hpp"
#include "favheat/raster.hpp"
#include "favheat/roadnet.hpp"

namespace favheat::features {

using geo::CellId;
using raster::Raster;

inline constexpr std::size_t kFeatureCount = 9;

/// Column order of every feature table, CSV and centroid vector.
inline constexpr std::array<std::string_view, kFeatureCount> kFeatureNames = {
    "ndvi", "entropy", "slope", "convexity", "nodes",
    "road_length", "mean_conn", "min_conn", "max_conn"};

struct FeatureVector {
    double ndvi = 0.0;
    double entropy = 0.0;
    double slope = 0.0;
    double convexity = 0.0;
    double nodes = 0.0;
    double road_length = 0.0;
    double mean_conn = 0.0;
    double min_conn = 0.0;
    double max_conn = 0.0;

    std::array<double, kFeatureCount> to_array() const noexcept;
    static FeatureVector from_array(const std::array<double, kFeatureCount>& a) noexcept;
};

enum class NormalizationMethod { ZScore, MinMax };

/// normalized = (raw - center) / scale. For z-score center is the mean and
/// scale the population standard deviation; for min-max, the minimum and the
/// range. Constant features map to 0 and are flagged.
struct Normalization {
    NormalizationMethod method = NormalizationMethod::ZScore;
    std::array<double, kFeatureCount> center{};
    std::array<double, kFeatureCount> scale{};
    std::array<bool, kFeatureCount> constant{};

    double apply(std::size_t feature, double raw) const noexcept;
    double invert(std::size_t feature, double normalized) const noexcept;
};

struct FeatureRow {
    CellId cell_id;
    std::string complex_id;
    FeatureVector features;
};

struct DroppedRow {
    CellId cell_id;
    std::string reason;
};

struct FeatureTable {
    std::vector<FeatureRow> rows;
    std::optional<Normalization> normalization;
    std::vector<DroppedRow> dropped;
};

/// Derived rasters (NDVI, slope, convexity) use this sentinel.
inline constexpr double kDerivedNodata = -9999.0;
inline constexpr int kDefaultEntropyBins = 32;

/// (nir - red) / (nir + red); nodata where either input is missing or the
/// denominator is zero.
Raster compute_ndvi(const Raster& red, const Raster& nir);

/// Shannon entropy in bits of a histogram with n_bins equal-width bins over
/// [lo, hi]. Values outside the range go to the end bins.
double shannon_entropy(std::span<const double> values, int n_bins, double lo, double hi);

/// Slope in degrees from Horn's 3x3 gradient. Border pixels and pixels with a
/// missing neighbour are nodata.
Raster compute_slope(const Raster& dem);

/// Center elevation minus the mean of its 8 neighbours; positive on ridges.
Raster compute_convexity(const Raster& dem);

struct AssembleOptions {
    int entropy_bins = kDefaultEntropyBins;
    /// Histogram range; defaults to the global min/max of the gray band.
    std::optional<std::pair<double, double>> entropy_range;
    unsigned threads = 1;
};

/// One row per cell with complete features; incomplete cells are reported in
/// `dropped`. Cells without an entry in road_metrics get zero road metrics.
FeatureTable assemble_features(std::span<const geo::GridCell> cells, const Raster& ndvi,
                               const Raster& gray, const Raster& slope, const Raster& convexity,
                               const std::map<CellId, roadnet::RoadMetrics>& road_metrics,
                               const AssembleOptions& options = {});

/// Fits per-feature parameters over the rows and returns the normalized table.
/// A table that is already normalized gets composed parameters, so the stored
/// normalization always maps raw values to the current ones.
/// Throws ValidationError for fewer than 2 rows.
FeatureTable normalize(const FeatureTable& table,
                       NormalizationMethod method = NormalizationMethod::ZScore);

/// Applies stored parameters to a raw table.
FeatureTable apply_normalization(const FeatureTable& raw, const Normalization& n);

std::string_view method_name(NormalizationMethod m) noexcept;
NormalizationMethod parse_method(std::string_view name);

}  // namespace favheat::features
