#pragma once

// Single-band rasters in the ESRI ASCII grid interchange format, point
// sampling and zonal aggregation over grid cells.

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "favheat/geometry.hpp"

namespace favheat::raster {

using geo::BBox;
using geo::Point2D;

/// Row-major single-band raster. Row 0 is the northernmost row.
class Raster {
public:
    Raster() = default;
    /// Throws ValidationError when the value count does not match the shape
    /// or the pixel size is not positive.
    Raster(int n_rows, int n_cols, Point2D origin, double pixel_size, double nodata,
           std::vector<double> values, std::string crs = {});

    /// Raster of the same shape and georeference filled with `fill`.
    static Raster like(const Raster& other, double fill, double nodata);

    int n_rows() const noexcept { return n_rows_; }
    int n_cols() const noexcept { return n_cols_; }
    std::size_t size() const noexcept { return values_.size(); }
    Point2D origin() const noexcept { return origin_; }
    double pixel_size() const noexcept { return pixel_size_; }
    double nodata() const noexcept { return nodata_; }
    const std::string& crs() const noexcept { return crs_; }
    void set_crs(std::string crs) { crs_ = std::move(crs); }

    const std::vector<double>& values() const noexcept { return values_; }
    double at(int row, int col) const noexcept { return values_[index(row, col)]; }
    double& at(int row, int col) noexcept { return values_[index(row, col)]; }
    std::size_t index(int row, int col) const noexcept {
        return static_cast<std::size_t>(row) * static_cast<std::size_t>(n_cols_) +
               static_cast<std::size_t>(col);
    }

    /// NaN and the nodata sentinel are both treated as missing.
    bool is_nodata(double v) const noexcept { return v != v || v == nodata_; }
    bool valid(std::size_t i) const noexcept { return !is_nodata(values_[i]); }

    Point2D pixel_center(int row, int col) const noexcept {
        return Point2D{origin_.x + (col + 0.5) * pixel_size_, origin_.y - (row + 0.5) * pixel_size_};
    }
    BBox extent() const noexcept {
        return BBox{origin_.x, origin_.y - n_rows_ * pixel_size_, origin_.x + n_cols_ * pixel_size_,
                    origin_.y};
    }

    /// Same shape, origin and pixel size.
    bool same_georeference(const Raster& other) const noexcept;

private:
    int n_rows_ = 0;
    int n_cols_ = 0;
    Point2D origin_{};
    double pixel_size_ = 1.0;
    double nodata_ = -9999.0;
    std::vector<double> values_;
    std::string crs_;
};

/// Parses ncols, nrows, xllcorner, yllcorner, cellsize and NODATA_value
/// (case-insensitive, any order) followed by nrows*ncols numbers. Throws
/// ParseError with the offending line number.
Raster read_ascii_grid(std::istream& in);
Raster read_ascii_grid_file(const std::string& path);

/// Writes with shortest round-trip number formatting.
void write_ascii_grid(std::ostream& out, const Raster& r);
void write_ascii_grid_file(const std::string& path, const Raster& r);

/// Value of the pixel whose half-open footprint contains p; nullopt outside
/// the extent or on nodata.
std::optional<double> sample(const Raster& r, Point2D p);

struct PixelValue {
    std::size_t index;
    double value;
};

/// Valid pixels whose centers fall in the half-open cell footprint, in
/// row-major order.
std::vector<PixelValue> pixels_in_cell(const Raster& r, const BBox& cell);

/// Mean of pixels_in_cell; nullopt when the zone has no valid pixel.
std::optional<double> zonal_mean(const Raster& r, const BBox& cell);

}  // namespace favheat::raster
