#include "favheat/lst.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "favheat/error.hpp"
#include "favheat/parallel.hpp"

namespace favheat::lst {

Units parse_units(const std::string& name) {
    if (name == "dn") return Units::DigitalNumber;
    if (name == "kelvin") return Units::Kelvin;
    if (name == "celsius") return Units::Celsius;
    throw ValidationError("unknown LST units '" + name + "' (expected dn, kelvin or celsius)");
}

std::string units_name(Units u) {
    switch (u) {
        case Units::DigitalNumber: return "dn";
        case Units::Kelvin: return "kelvin";
        case Units::Celsius: return "celsius";
    }
    return "dn";
}

double dn_to_celsius(double dn, const ThermalScale& s) noexcept {
    const double kelvin = dn * s.scale + s.offset;
    return kelvin - kKelvinOffset;
}

bool LstScene::usable(std::size_t i) const noexcept {
    if (!raster.valid(i)) return false;
    if (mask) {
        const double m = mask->values()[i];
        if (mask->is_nodata(m) || m != 0.0) return false;
    }
    return true;
}

LstScene to_celsius(const LstScene& scene, const ThermalScale& s) {
    if (scene.mask && !scene.mask->same_georeference(scene.raster)) {
        throw ValidationError("mask for " + scene.date + " does not match the scene georeference");
    }
    LstScene out = scene;
    out.units = Units::Celsius;
    if (scene.units == Units::Celsius) return out;
    const Raster& in = scene.raster;
    for (int row = 0; row < in.n_rows(); ++row) {
        for (int col = 0; col < in.n_cols(); ++col) {
            const double v = in.at(row, col);
            if (in.is_nodata(v)) continue;
            out.raster.at(row, col) =
                scene.units == Units::Kelvin ? v - kKelvinOffset : dn_to_celsius(v, s);
        }
    }
    return out;
}

namespace {

double median_sorted(std::span<const double> sorted) {
    const std::size_t n = sorted.size();
    return n % 2 == 1 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
}

}  // namespace

std::optional<double> scene_median(const LstScene& scene) {
    std::vector<double> v;
    v.reserve(scene.raster.size());
    for (std::size_t i = 0; i < scene.raster.size(); ++i) {
        if (scene.usable(i)) v.push_back(scene.raster.values()[i]);
    }
    if (v.empty()) return std::nullopt;
    std::sort(v.begin(), v.end());
    return median_sorted(v);
}

HeatEventSelection select_heat_events(std::span<const LstScene> scenes, double threshold) {
    HeatEventSelection sel;
    for (const auto& s : scenes) {
        if (s.units != Units::Celsius) {
            throw ValidationError("scene " + s.date + " must be converted to Celsius before selection");
        }
        SceneDecision d{s.date, scene_median(s), false};
        d.selected = d.median && *d.median >= threshold;
        if (d.selected) sel.selected.push_back(s);
        sel.log.push_back(std::move(d));
    }
    return sel;
}

double quantile_sorted(std::span<const double> sorted, double p) {
    if (sorted.empty()) throw ValidationError("quantile of an empty set");
    const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

ClusterDistribution cluster_lst_distribution(const LstScene& scene, std::span<const geo::GridCell> cells,
                                             const std::map<geo::CellId, int>& labels) {
    ClusterDistribution dist;
    std::set<int> expected;
    for (const auto& [cell, label] : labels) expected.insert(label);

    for (const auto& cell : cells) {
        auto it = labels.find(cell.cell_id);
        if (it == labels.end()) continue;
        auto& pool = dist.values[it->second];
        for (const auto& px : raster::pixels_in_cell(scene.raster, cell.bbox)) {
            if (scene.usable(px.index)) pool.push_back(px.value);
        }
    }
    for (int label : expected) {
        auto it = dist.values.find(label);
        if (it == dist.values.end() || it->second.empty()) {
            dist.values.erase(label);
            dist.diagnostics.push_back(scene.date + ": cluster " + std::to_string(label) +
                                       " has no valid pixels");
            continue;
        }
        auto& v = it->second;
        std::sort(v.begin(), v.end());
        ClusterStats s;
        s.label = label;
        s.count = v.size();
        s.q25 = quantile_sorted(v, 0.25);
        s.median = quantile_sorted(v, 0.5);
        s.q75 = quantile_sorted(v, 0.75);
        double sum = 0.0;
        for (double x : v) sum += x;
        s.mean = sum / static_cast<double>(v.size());
        dist.stats.push_back(s);
    }
    return dist;
}

double fraction_below(std::span<const double> values, double reference_median) {
    if (values.empty()) throw ValidationError("fraction_below of an empty pixel set");
    std::size_t below = 0;
    for (double v : values) {
        if (v < reference_median) ++below;
    }
    return static_cast<double>(below) / static_cast<double>(values.size());
}

std::optional<ClusterComparison> compare_clusters(const ClusterDistribution& dist) {
    if (dist.stats.size() < 2) return std::nullopt;
    const ClusterStats* hot = &dist.stats.front();
    const ClusterStats* cool = &dist.stats.front();
    for (const auto& s : dist.stats) {
        if (s.median > hot->median) hot = &s;
        if (s.median < cool->median) cool = &s;
    }
    if (hot == cool) cool = &dist.stats.back();
    ClusterComparison c;
    c.hotter_label = hot->label;
    c.cooler_label = cool->label;
    c.median_difference = hot->median - cool->median;
    c.fraction_cooler_below = fraction_below(dist.values.at(cool->label), hot->median);
    return c;
}

BoxplotData boxplot(int label, std::span<const double> sorted, WhiskerRule rule) {
    BoxplotData b;
    b.label = label;
    b.q1 = quantile_sorted(sorted, 0.25);
    b.median = quantile_sorted(sorted, 0.5);
    b.q3 = quantile_sorted(sorted, 0.75);
    if (rule == WhiskerRule::MinMax) {
        b.whisker_low = sorted.front();
        b.whisker_high = sorted.back();
        return b;
    }
    const double iqr = b.q3 - b.q1;
    const double lo_fence = b.q1 - 1.5 * iqr;
    const double hi_fence = b.q3 + 1.5 * iqr;
    b.whisker_low = b.q1;
    b.whisker_high = b.q3;
    for (double v : sorted) {
        if (v >= lo_fence) {
            b.whisker_low = std::min(v, b.q1);
            break;
        }
    }
    for (auto it = sorted.rbegin(); it != sorted.rend(); ++it) {
        if (*it <= hi_fence) {
            b.whisker_high = std::max(*it, b.q3);
            break;
        }
    }
    for (double v : sorted) {
        if (v < lo_fence || v > hi_fence) b.outliers.push_back(v);
    }
    return b;
}

HeatEventReport analyze_heat_events(std::span<const LstScene> scenes_celsius, std::span<const geo::GridCell> cells,
                                    const std::map<geo::CellId, int>& labels, double threshold,
                                    WhiskerRule rule, unsigned threads) {
    HeatEventReport report;
    report.threshold = threshold;
    HeatEventSelection sel = select_heat_events(scenes_celsius, threshold);
    report.decisions = std::move(sel.log);
    report.events.resize(sel.selected.size());
    parallel_for(sel.selected.size(), threads, [&](std::size_t i) {
        const LstScene& scene = sel.selected[i];
        DateReport& d = report.events[i];
        d.date = scene.date;
        d.scene_median = *scene_median(scene);
        const ClusterDistribution dist = cluster_lst_distribution(scene, cells, labels);
        d.clusters = dist.stats;
        d.comparison = compare_clusters(dist);
        d.diagnostics = dist.diagnostics;
        for (const auto& [label, values] : dist.values) d.boxes.push_back(boxplot(label, values, rule));
    });
    return report;
}

}  // namespace favheat::lst
