#include "favheat/raster.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "favheat/error.hpp"
#include "favheat/textio.hpp"

namespace favheat::raster {

Raster::Raster(int n_rows, int n_cols, Point2D origin, double pixel_size, double nodata,
               std::vector<double> values, std::string crs)
    : n_rows_(n_rows),
      n_cols_(n_cols),
      origin_(origin),
      pixel_size_(pixel_size),
      nodata_(nodata),
      values_(std::move(values)),
      crs_(std::move(crs)) {
    if (n_rows <= 0 || n_cols <= 0) throw ValidationError("raster dimensions must be positive");
    if (!(pixel_size > 0.0) || !std::isfinite(pixel_size)) {
        throw ValidationError("raster pixel size must be positive");
    }
    if (values_.size() != static_cast<std::size_t>(n_rows) * static_cast<std::size_t>(n_cols)) {
        throw ValidationError("raster value count does not match nrows*ncols");
    }
}

Raster Raster::like(const Raster& other, double fill, double nodata) {
    return Raster(other.n_rows_, other.n_cols_, other.origin_, other.pixel_size_, nodata,
                  std::vector<double>(other.values_.size(), fill), other.crs_);
}

bool Raster::same_georeference(const Raster& other) const noexcept {
    return n_rows_ == other.n_rows_ && n_cols_ == other.n_cols_ && origin_ == other.origin_ &&
           pixel_size_ == other.pixel_size_;
}

Raster read_ascii_grid(std::istream& in) {
    static constexpr std::array<const char*, 6> kRequired = {
        "ncols", "nrows", "xllcorner", "yllcorner", "cellsize", "nodata_value"};

    std::map<std::string, double> header;
    std::vector<double> values;
    std::string line;
    std::size_t line_no = 0;
    bool in_body = false;
    std::size_t expected = 0;

    while (std::getline(in, line)) {
        ++line_no;
        std::istringstream tokens(line);
        std::string first;
        if (!(tokens >> first)) continue;

        if (!in_body && !textio::parse_double(first)) {
            const std::string key = textio::to_lower(first);
            if (std::find(kRequired.begin(), kRequired.end(), key) == kRequired.end()) {
                throw ParseError("unknown header key '" + first + "'", line_no);
            }
            std::string value_tok;
            if (!(tokens >> value_tok)) throw ParseError("header key '" + first + "' has no value", line_no);
            const auto value = textio::parse_double(value_tok);
            if (!value) throw ParseError("non-numeric header value '" + value_tok + "'", line_no);
            if (header.count(key)) throw ParseError("duplicate header key '" + first + "'", line_no);
            header[key] = *value;
            continue;
        }

        if (!in_body) {
            for (const char* key : kRequired) {
                if (!header.count(key)) {
                    throw ParseError(std::string("missing header key '") + key + "'", line_no);
                }
            }
            const double rows = header["nrows"];
            const double cols = header["ncols"];
            if (rows < 1 || cols < 1 || rows != std::floor(rows) || cols != std::floor(cols)) {
                throw ParseError("nrows and ncols must be positive integers", line_no);
            }
            expected = static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols);
            values.reserve(expected);
            in_body = true;
        }

        std::string tok = first;
        do {
            const auto v = textio::parse_double(tok);
            if (!v) throw ParseError("non-numeric value '" + tok + "'", line_no);
            if (values.size() == expected) {
                throw ParseError("more values than nrows*ncols (" + std::to_string(expected) + ")",
                                 line_no);
            }
            values.push_back(*v);
        } while (tokens >> tok);
    }

    if (!in_body) {
        for (const char* key : kRequired) {
            if (!header.count(key)) {
                throw ParseError(std::string("missing header key '") + key + "'", line_no);
            }
        }
    }
    if (values.size() != expected || expected == 0) {
        throw ParseError("expected " + std::to_string(expected) + " values, found " +
                             std::to_string(values.size()),
                         line_no);
    }
    const int n_rows = static_cast<int>(header["nrows"]);
    const int n_cols = static_cast<int>(header["ncols"]);
    const double cell = header["cellsize"];
    if (!(cell > 0.0)) throw ParseError("cellsize must be positive", 0);
    const Point2D upper_left{header["xllcorner"], header["yllcorner"] + n_rows * cell};
    return Raster(n_rows, n_cols, upper_left, cell, header["nodata_value"], std::move(values));
}

Raster read_ascii_grid_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open raster '" + path + "'");
    try {
        return read_ascii_grid(in);
    } catch (const ParseError& e) {
        throw ParseError(path + ": " + e.what());
    }
}

void write_ascii_grid(std::ostream& out, const Raster& r) {
    using textio::format_double;
    const double yll = r.origin().y - r.n_rows() * r.pixel_size();
    out << "ncols " << r.n_cols() << '\n'
        << "nrows " << r.n_rows() << '\n'
        << "xllcorner " << format_double(r.origin().x) << '\n'
        << "yllcorner " << format_double(yll) << '\n'
        << "cellsize " << format_double(r.pixel_size()) << '\n'
        << "NODATA_value " << format_double(r.nodata()) << '\n';
    for (int row = 0; row < r.n_rows(); ++row) {
        for (int col = 0; col < r.n_cols(); ++col) {
            if (col) out << ' ';
            const double v = r.at(row, col);
            out << format_double(v != v ? r.nodata() : v);
        }
        out << '\n';
    }
}

void write_ascii_grid_file(const std::string& path, const Raster& r) {
    std::ostringstream ss;
    write_ascii_grid(ss, r);
    textio::write_file(path, ss.str());
}

std::optional<double> sample(const Raster& r, Point2D p) {
    const double fx = std::floor((p.x - r.origin().x) / r.pixel_size());
    const double fy = std::floor((r.origin().y - p.y) / r.pixel_size());
    if (!(fx >= 0.0 && fx < r.n_cols() && fy >= 0.0 && fy < r.n_rows())) return std::nullopt;
    const double v = r.at(static_cast<int>(fy), static_cast<int>(fx));
    if (r.is_nodata(v)) return std::nullopt;
    return v;
}

namespace {

// Index range [lo, hi) of pixels whose centers may fall in [a, b] along one
// axis; widened by one on each side, callers test centers exactly.
std::pair<int, int> candidate_range(double a, double b, double pixel, int n) {
    const double lo = std::floor(a / pixel - 0.5) - 1.0;
    const double hi = std::ceil(b / pixel - 0.5) + 2.0;
    const int ilo = static_cast<int>(std::clamp(lo, 0.0, static_cast<double>(n)));
    const int ihi = static_cast<int>(std::clamp(hi, 0.0, static_cast<double>(n)));
    return {ilo, ihi};
}

}  // namespace

std::vector<PixelValue> pixels_in_cell(const Raster& r, const BBox& cell) {
    std::vector<PixelValue> out;
    if (!cell.intersects(r.extent())) return out;
    const auto [c0, c1] =
        candidate_range(cell.min_x - r.origin().x, cell.max_x - r.origin().x, r.pixel_size(), r.n_cols());
    const auto [r0, r1] =
        candidate_range(r.origin().y - cell.max_y, r.origin().y - cell.min_y, r.pixel_size(), r.n_rows());
    for (int row = r0; row < r1; ++row) {
        for (int col = c0; col < c1; ++col) {
            if (!cell.contains(r.pixel_center(row, col))) continue;
            const std::size_t i = r.index(row, col);
            if (r.valid(i)) out.push_back({i, r.values()[i]});
        }
    }
    return out;
}

std::optional<double> zonal_mean(const Raster& r, const BBox& cell) {
    const auto pixels = pixels_in_cell(r, cell);
    if (pixels.empty()) return std::nullopt;
    double sum = 0.0;
    for (const auto& p : pixels) sum += p.value;
    return sum / static_cast<double>(pixels.size());
}

}  // namespace favheat::raster
