#include "favheat/features.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "favheat/error.hpp"
#include "favheat/parallel.hpp"

namespace favheat::features {

std::array<double, kFeatureCount> FeatureVector::to_array() const noexcept {
    return {ndvi, entropy, slope, convexity, nodes, road_length, mean_conn, min_conn, max_conn};
}

FeatureVector FeatureVector::from_array(const std::array<double, kFeatureCount>& a) noexcept {
    return FeatureVector{a[0], a[1], a[2], a[3], a[4], a[5], a[6], a[7], a[8]};
}

double Normalization::apply(std::size_t f, double raw) const noexcept {
    if (constant[f]) return 0.0;
    return (raw - center[f]) / scale[f];
}

double Normalization::invert(std::size_t f, double normalized) const noexcept {
    if (constant[f]) return center[f];
    return normalized * scale[f] + center[f];
}

Raster compute_ndvi(const Raster& red, const Raster& nir) {
    if (!red.same_georeference(nir)) {
        throw ValidationError("red and nir rasters differ in shape or georeference");
    }
    Raster out = Raster::like(red, kDerivedNodata, kDerivedNodata);
    for (std::size_t i = 0; i < red.size(); ++i) {
        if (!red.valid(i) || !nir.valid(i)) continue;
        const double r = red.values()[i];
        const double n = nir.values()[i];
        const double denom = n + r;
        if (denom == 0.0) continue;
        out.at(static_cast<int>(i / red.n_cols()), static_cast<int>(i % red.n_cols())) = (n - r) / denom;
    }
    return out;
}

double shannon_entropy(std::span<const double> values, int n_bins, double lo, double hi) {
    if (values.empty()) throw ValidationError("entropy of an empty pixel set is undefined");
    if (n_bins < 1) throw ValidationError("entropy needs at least one bin");
    if (!(lo < hi)) throw ValidationError("entropy range requires lo < hi");
    std::vector<std::size_t> counts(static_cast<std::size_t>(n_bins), 0);
    const double width = hi - lo;
    for (double v : values) {
        if (std::isnan(v)) throw ValidationError("entropy input contains NaN");
        const double pos = std::floor((v - lo) / width * n_bins);
        const auto bin = static_cast<std::size_t>(std::clamp(pos, 0.0, static_cast<double>(n_bins - 1)));
        ++counts[bin];
    }
    const double n = static_cast<double>(values.size());
    double h = 0.0;
    for (std::size_t c : counts) {
        if (c == 0) continue;
        const double p = static_cast<double>(c) / n;
        h -= p * std::log2(p);
    }
    return h == 0.0 ? 0.0 : h;
}

namespace {

void require_3x3(const Raster& dem) {
    if (dem.n_rows() < 3 || dem.n_cols() < 3) {
        throw ValidationError("DEM must be at least 3x3 pixels");
    }
}

// Calls fn(row, col, window) for interior pixels whose 3x3 window is complete.
// window is row-major: a b c / d e f / g h i.
template <typename Fn>
Raster map_windows(const Raster& dem, Fn&& fn) {
    require_3x3(dem);
    Raster out = Raster::like(dem, kDerivedNodata, kDerivedNodata);
    for (int row = 1; row + 1 < dem.n_rows(); ++row) {
        for (int col = 1; col + 1 < dem.n_cols(); ++col) {
            std::array<double, 9> w{};
            bool complete = true;
            for (int dr = -1; dr <= 1 && complete; ++dr) {
                for (int dc = -1; dc <= 1; ++dc) {
                    const double v = dem.at(row + dr, col + dc);
                    if (dem.is_nodata(v)) {
                        complete = false;
                        break;
                    }
                    w[static_cast<std::size_t>((dr + 1) * 3 + (dc + 1))] = v;
                }
            }
            if (complete) out.at(row, col) = fn(w);
        }
    }
    return out;
}

}  // namespace

Raster compute_slope(const Raster& dem) {
    const double eight_px = 8.0 * dem.pixel_size();
    return map_windows(dem, [eight_px](const std::array<double, 9>& w) {
        const double gx = ((w[2] + 2.0 * w[5] + w[8]) - (w[0] + 2.0 * w[3] + w[6])) / eight_px;
        const double gy = ((w[6] + 2.0 * w[7] + w[8]) - (w[0] + 2.0 * w[1] + w[2])) / eight_px;
        return std::atan(std::sqrt(gx * gx + gy * gy)) * 180.0 / std::numbers::pi;
    });
}

Raster compute_convexity(const Raster& dem) {
    return map_windows(dem, [](const std::array<double, 9>& w) {
        const double neighbours = w[0] + w[1] + w[2] + w[3] + w[5] + w[6] + w[7] + w[8];
        return w[4] - neighbours / 8.0;
    });
}

FeatureTable assemble_features(std::span<const geo::GridCell> cells, const Raster& ndvi,
                               const Raster& gray, const Raster& slope, const Raster& convexity,
                               const std::map<CellId, roadnet::RoadMetrics>& road_metrics,
                               const AssembleOptions& options) {
    std::pair<double, double> range;
    if (options.entropy_range) {
        range = *options.entropy_range;
    } else {
        double lo = std::numeric_limits<double>::infinity();
        double hi = -lo;
        for (std::size_t i = 0; i < gray.size(); ++i) {
            if (!gray.valid(i)) continue;
            lo = std::min(lo, gray.values()[i]);
            hi = std::max(hi, gray.values()[i]);
        }
        if (lo > hi) {
            lo = 0.0;
            hi = 1.0;
        } else if (lo == hi) {
            hi = lo + 1.0;
        }
        range = {lo, hi};
    }

    struct Outcome {
        std::optional<FeatureRow> row;
        std::string reason;
    };
    std::vector<Outcome> outcomes(cells.size());
    parallel_for(cells.size(), options.threads, [&](std::size_t i) {
        const geo::GridCell& cell = cells[i];
        Outcome& out = outcomes[i];
        std::string missing;
        auto note = [&](const char* what) {
            if (!missing.empty()) missing += ", ";
            missing += what;
        };
        if (!cell.complex_id) note("complex_id");
        const auto v_ndvi = raster::zonal_mean(ndvi, cell.bbox);
        if (!v_ndvi) note("ndvi");
        const auto v_slope = raster::zonal_mean(slope, cell.bbox);
        if (!v_slope) note("slope");
        const auto v_conv = raster::zonal_mean(convexity, cell.bbox);
        if (!v_conv) note("convexity");
        const auto gray_px = raster::pixels_in_cell(gray, cell.bbox);
        if (gray_px.empty()) note("entropy");
        if (!missing.empty()) {
            out.reason = "no valid data for " + missing;
            return;
        }
        std::vector<double> gv;
        gv.reserve(gray_px.size());
        for (const auto& p : gray_px) gv.push_back(p.value);

        FeatureRow row;
        row.cell_id = cell.cell_id;
        row.complex_id = *cell.complex_id;
        row.features.ndvi = *v_ndvi;
        row.features.slope = *v_slope;
        row.features.convexity = *v_conv;
        row.features.entropy = shannon_entropy(gv, options.entropy_bins, range.first, range.second);
        if (auto it = road_metrics.find(cell.cell_id); it != road_metrics.end()) {
            row.features.nodes = it->second.nodes;
            row.features.road_length = it->second.road_length;
            row.features.mean_conn = it->second.mean_conn;
            row.features.min_conn = it->second.min_conn;
            row.features.max_conn = it->second.max_conn;
        }
        out.row = std::move(row);
    });

    FeatureTable table;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (outcomes[i].row) {
            table.rows.push_back(std::move(*outcomes[i].row));
        } else {
            table.dropped.push_back({cells[i].cell_id, outcomes[i].reason});
        }
    }
    return table;
}

namespace {

Normalization fit(const FeatureTable& table, NormalizationMethod method) {
    Normalization n;
    n.method = method;
    const double count = static_cast<double>(table.rows.size());
    for (std::size_t f = 0; f < kFeatureCount; ++f) {
        double center = 0.0;
        double scale = 0.0;
        if (method == NormalizationMethod::ZScore) {
            double sum = 0.0;
            for (const auto& r : table.rows) sum += r.features.to_array()[f];
            center = sum / count;
            double ss = 0.0;
            for (const auto& r : table.rows) {
                const double d = r.features.to_array()[f] - center;
                ss += d * d;
            }
            scale = std::sqrt(ss / count);
        } else {
            double lo = std::numeric_limits<double>::infinity();
            double hi = -lo;
            for (const auto& r : table.rows) {
                lo = std::min(lo, r.features.to_array()[f]);
                hi = std::max(hi, r.features.to_array()[f]);
            }
            center = lo;
            scale = hi - lo;
        }
        n.center[f] = center;
        n.scale[f] = scale;
        n.constant[f] = !(scale > 0.0);
        if (n.constant[f]) n.scale[f] = 0.0;
    }
    return n;
}

}  // namespace

FeatureTable apply_normalization(const FeatureTable& raw, const Normalization& n) {
    FeatureTable out = raw;
    for (auto& r : out.rows) {
        auto a = r.features.to_array();
        for (std::size_t f = 0; f < kFeatureCount; ++f) a[f] = n.apply(f, a[f]);
        r.features = FeatureVector::from_array(a);
    }
    out.normalization = n;
    return out;
}

FeatureTable normalize(const FeatureTable& table, NormalizationMethod method) {
    if (table.rows.size() < 2) throw ValidationError("normalization needs at least 2 rows");
    const Normalization step = fit(table, method);
    FeatureTable out = apply_normalization(table, step);
    if (table.normalization) {
        const Normalization& prev = *table.normalization;
        Normalization composed = prev;
        for (std::size_t f = 0; f < kFeatureCount; ++f) {
            if (prev.constant[f]) continue;
            if (step.constant[f]) {
                composed.constant[f] = true;
                composed.center[f] = prev.invert(f, step.center[f]);
                composed.scale[f] = 0.0;
                continue;
            }
            composed.center[f] = prev.center[f] + prev.scale[f] * step.center[f];
            composed.scale[f] = prev.scale[f] * step.scale[f];
        }
        out.normalization = composed;
    }
    return out;
}

std::string_view method_name(NormalizationMethod m) noexcept {
    return m == NormalizationMethod::ZScore ? "zscore" : "minmax";
}

NormalizationMethod parse_method(std::string_view name) {
    if (name == "zscore") return NormalizationMethod::ZScore;
    if (name == "minmax") return NormalizationMethod::MinMax;
    throw ValidationError("unknown normalization method '" + std::string(name) + "'");
}

}  // namespace favheat::features
