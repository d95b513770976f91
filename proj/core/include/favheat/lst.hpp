#pragma once

// Land surface temperature: thermal-band conversion, heat-event selection
// and per-cluster distribution comparison.

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "favheat/geometry.hpp"
#include "favheat/raster.hpp"

namespace favheat::lst {

using raster::Raster;

enum class Units { DigitalNumber, Kelvin, Celsius };

Units parse_units(const std::string& name);
std::string units_name(Units u);

/// Landsat Collection 2 Level-2 surface temperature scaling.
struct ThermalScale {
    double scale = 0.00341802;
    double offset = 149.0;
};

inline constexpr double kKelvinOffset = 273.15;
inline constexpr double kDefaultHeatThreshold = 40.0;

double dn_to_celsius(double dn, const ThermalScale& s = {}) noexcept;

struct LstScene {
    std::string date;  // ISO-8601
    Raster raster;
    Units units = Units::DigitalNumber;
    std::optional<Raster> mask;  // nonzero or nodata = invalid pixel

    /// Whether pixel i holds a usable temperature.
    bool usable(std::size_t i) const noexcept;
};

/// Converts the raster to degrees Celsius, preserving nodata. Throws
/// ValidationError if the mask georeference differs from the raster.
LstScene to_celsius(const LstScene& scene, const ThermalScale& s = {});

/// Median of usable pixels (mean of the two central values for even counts);
/// nullopt with no usable pixel.
std::optional<double> scene_median(const LstScene& scene);

struct SceneDecision {
    std::string date;
    std::optional<double> median;
    bool selected = false;
};

struct HeatEventSelection {
    std::vector<LstScene> selected;
    std::vector<SceneDecision> log;  // one entry per input scene, input order
};

/// Keeps scenes whose median is >= threshold, in input order.
HeatEventSelection select_heat_events(std::span<const LstScene> scenes,
                                      double threshold = kDefaultHeatThreshold);

/// Type-7 quantile (linear interpolation between order statistics) of sorted
/// values. Throws ValidationError on empty input.
double quantile_sorted(std::span<const double> sorted, double p);

struct ClusterStats {
    int label = 0;
    std::size_t count = 0;
    double q25 = 0.0;
    double median = 0.0;
    double q75 = 0.0;
    double mean = 0.0;
};

struct ClusterDistribution {
    std::vector<ClusterStats> stats;                // ascending label, empty clusters omitted
    std::map<int, std::vector<double>> values;      // sorted pooled pixels per label
    std::vector<std::string> diagnostics;
};

/// Pools usable pixels whose centers fall in each labeled cell. Labels
/// expected in the output are those in `labels`; any with no pixels are
/// omitted with a diagnostic.
ClusterDistribution cluster_lst_distribution(const LstScene& scene,
                                             std::span<const geo::GridCell> cells,
                                             const std::map<geo::CellId, int>& labels);

/// Fraction of values strictly below reference_median. Throws
/// ValidationError on empty input.
double fraction_below(std::span<const double> values, double reference_median);

struct ClusterComparison {
    int hotter_label = 0;
    int cooler_label = 0;
    double median_difference = 0.0;    // hotter median - cooler median, >= 0
    double fraction_cooler_below = 0.0;  // cooler pixels below the hotter median
};

/// Compares the clusters with the highest and lowest median; nullopt with
/// fewer than two clusters.
std::optional<ClusterComparison> compare_clusters(const ClusterDistribution& dist);

enum class WhiskerRule { Iqr15, MinMax };

struct BoxplotData {
    int label = 0;
    double q1 = 0.0;
    double median = 0.0;
    double q3 = 0.0;
    double whisker_low = 0.0;
    double whisker_high = 0.0;
    std::vector<double> outliers;
};

BoxplotData boxplot(int label, std::span<const double> sorted, WhiskerRule rule = WhiskerRule::Iqr15);

struct DateReport {
    std::string date;
    double scene_median = 0.0;
    std::vector<ClusterStats> clusters;
    std::optional<ClusterComparison> comparison;
    std::vector<BoxplotData> boxes;
    std::vector<std::string> diagnostics;
};

struct HeatEventReport {
    double threshold = kDefaultHeatThreshold;
    std::vector<SceneDecision> decisions;
    std::vector<DateReport> events;
};

/// Full heat-event analysis over scenes already in Celsius.
HeatEventReport analyze_heat_events(std::span<const LstScene> scenes_celsius,
                                    std::span<const geo::GridCell> cells,
                                    const std::map<geo::CellId, int>& labels, double threshold,
                                    WhiskerRule rule = WhiskerRule::Iqr15, unsigned threads = 1);

}  // namespace favheat::lst
