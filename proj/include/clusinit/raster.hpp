#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <string>
#include <vector>

#include "clusinit/core.hpp"
#include "clusinit/datagen.hpp"

namespace clusinit {

/// Data space <-> pixel space. pixel = data * scale + offset, per axis.
/// Pixel (c, r) covers [c, c+1) x [r, r+1); its center is (c+0.5, r+0.5).
struct AffineMap {
    double scale_x = 1.0;
    double scale_y = 1.0;
    double offset_x = 0.0;
    double offset_y = 0.0;
    int width = 1;
    int height = 1;

    [[nodiscard]] Point2 to_pixel(Point2 p) const { return {p.x * scale_x + offset_x, p.y * scale_y + offset_y}; }
    [[nodiscard]] Point2 to_data(Point2 px) const { return {(px.x - offset_x) / scale_x, (px.y - offset_y) / scale_y}; }
    // Data-space extent of one pixel along each axis.
    [[nodiscard]] double bin_width_x() const { return 1.0 / scale_x; }
    [[nodiscard]] double bin_width_y() const { return 1.0 / scale_y; }
};

inline Point2 to_data_space(Point2 px, const AffineMap& map) { return map.to_data(px); }
inline Point2 to_pixel_space(Point2 p, const AffineMap& map) { return map.to_pixel(p); }

/// Row-major height x width density image.
struct RasterFrame {
    std::vector<double> grid;
    AffineMap map;
    std::size_t total_points = 0;
    // Sum of the grid before normalization divided by the sum after; lets
    // callers convert grid mass back to point counts.
    double normalizer = 1.0;

    [[nodiscard]] int width() const { return map.width; }
    [[nodiscard]] int height() const { return map.height; }
    [[nodiscard]] double at(int col, int row) const {
        return grid[static_cast<std::size_t>(row) * static_cast<std::size_t>(map.width) + static_cast<std::size_t>(col)];
    }
    [[nodiscard]] double grid_sum() const {
        double s = 0.0;
        for (double v : grid) s += v;
        return s;
    }
};

struct BoxLabel {
    int class_id = 0;
    double cx = 0.0, cy = 0.0, w = 0.0, h = 0.0;
};

/// Frame geometry covering `points`: bounding box grown by margin_frac of its
/// span on every side. A zero-span axis is widened to one data unit.
inline AffineMap fit_map(PointSpan points, int width, int height, double margin_frac) {
    if (points.empty()) throw Error("cannot rasterize empty dataset");
    if (width < 1 || height < 1) throw Error("resolution must be positive");
    Bounds2 b = bounds_of(points);
    auto axis = [&](double lo, double hi, int pixels, double& scale, double& offset) {
        double span = hi - lo;
        if (!(span > 0.0)) {
            const double mid = 0.5 * (lo + hi);
            lo = mid - 0.5;
            hi = mid + 0.5;
            span = 1.0;
        }
        lo -= margin_frac * span;
        hi += margin_frac * span;
        scale = pixels / (hi - lo);
        offset = -lo * scale;
    };
    AffineMap map;
    map.width = width;
    map.height = height;
    axis(b.min_x, b.max_x, width, map.scale_x, map.offset_x);
    axis(b.min_y, b.max_y, height, map.scale_y, map.offset_y);
    return map;
}

inline int pixel_index(double px, int pixels) {
    return std::clamp(static_cast<int>(std::floor(px)), 0, pixels - 1);
}

/// Per-bin point counts under `map`, not normalized. Bin sum equals points.size().
inline std::vector<double> histogram(PointSpan points, const AffineMap& map) {
    std::vector<double> counts(static_cast<std::size_t>(map.width) * static_cast<std::size_t>(map.height), 0.0);
    for (const auto& p : points) {
        const Point2 px = map.to_pixel(p);
        const int c = pixel_index(px.x, map.width);
        const int r = pixel_index(px.y, map.height);
        counts[static_cast<std::size_t>(r) * static_cast<std::size_t>(map.width) + static_cast<std::size_t>(c)] += 1.0;
    }
    return counts;
}

inline RasterFrame rasterize(PointSpan points, int resolution = 640, double margin_frac = 0.05) {
    RasterFrame frame;
    frame.map = fit_map(points, resolution, resolution, margin_frac);
    frame.grid = histogram(points, frame.map);
    frame.total_points = points.size();
    const double peak = *std::max_element(frame.grid.begin(), frame.grid.end());
    for (double& v : frame.grid) v /= peak;
    frame.normalizer = peak;
    return frame;
}

inline RasterFrame rasterize(const Dataset2D& ds, int resolution = 640, double margin_frac = 0.05) {
    return rasterize(PointSpan(ds.points), resolution, margin_frac);
}

namespace raster_detail {

// Linear-interpolated quantile of a sorted sample.
inline double quantile_sorted(const std::vector<double>& v, double q) {
    if (v.size() == 1) return v.front();
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace raster_detail

/// One box per true cluster spanning the [1-q, q] per-axis quantiles of its
/// points, normalized to the image and clamped to [0, 1].
inline std::vector<BoxLabel> make_labels(const Dataset2D& ds, const RasterFrame& frame, double coverage_quantile = 0.995) {
    const auto k = static_cast<std::size_t>(ds.k_true);
    std::vector<std::vector<double>> xs(k), ys(k);
    for (std::size_t i = 0; i < ds.points.size(); ++i) {
        const Point2 px = frame.map.to_pixel(ds.points[i]);
        const auto l = static_cast<std::size_t>(ds.labels[i]);
        xs[l].push_back(px.x);
        ys[l].push_back(px.y);
    }
    const double lo_q = std::min(coverage_quantile, 1.0 - coverage_quantile);
    const double hi_q = std::max(coverage_quantile, 1.0 - coverage_quantile);
    const double W = frame.width(), H = frame.height();

    auto extent = [&](std::vector<double>& v, double pixels, double& center, double& size) {
        std::sort(v.begin(), v.end());
        double lo = 0.0, hi = 0.0;
        if (v.size() < 2) {
            lo = std::floor(v.empty() ? pixels / 2 : v.front());
            hi = lo + 1.0;
        } else {
            lo = raster_detail::quantile_sorted(v, lo_q);
            hi = raster_detail::quantile_sorted(v, hi_q);
            if (hi - lo < 1.0) {
                const double mid = std::floor(0.5 * (lo + hi));
                lo = mid;
                hi = mid + 1.0;
            }
        }
        lo = std::clamp(lo / pixels, 0.0, 1.0);
        hi = std::clamp(hi / pixels, 0.0, 1.0);
        if (hi <= lo) {
            lo = std::max(0.0, hi - 1.0 / pixels);
            hi = lo + 1.0 / pixels;
        }
        center = 0.5 * (lo + hi);
        size = hi - lo;
    };

    std::vector<BoxLabel> labels(k);
    for (std::size_t l = 0; l < k; ++l) {
        extent(xs[l], W, labels[l].cx, labels[l].w);
        extent(ys[l], H, labels[l].cy, labels[l].h);
    }
    return labels;
}

/// Binary PGM (P5), value = round(255 * density).
inline void write_pgm(std::ostream& out, const RasterFrame& frame) {
    out << "P5\n" << frame.width() << ' ' << frame.height() << "\n255\n";
    std::vector<char> bytes(frame.grid.size());
    for (std::size_t i = 0; i < frame.grid.size(); ++i)
        bytes[i] = static_cast<char>(static_cast<unsigned char>(std::lround(255.0 * std::clamp(frame.grid[i], 0.0, 1.0))));
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

/// One line per box: `class_id cx cy w h`, six decimals.
inline void write_labels(std::ostream& out, const std::vector<BoxLabel>& labels) {
    char line[128];
    for (const auto& b : labels) {
        std::snprintf(line, sizeof line, "%d %.6f %.6f %.6f %.6f\n", b.class_id, b.cx, b.cy, b.w, b.h);
        out << line;
    }
}

}  // namespace clusinit
