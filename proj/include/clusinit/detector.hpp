#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

#include "clusinit/core.hpp"
#include "clusinit/raster.hpp"
#include "clusinit/types.hpp"

namespace clusinit {

/// Axis-aligned box in pixel coordinates of the frame it was detected on.
struct DetectionBox {
    double x_min = 0.0, y_min = 0.0, x_max = 0.0, y_max = 0.0;
    double confidence = 0.0;

    [[nodiscard]] double area() const { return std::max(0.0, x_max - x_min) * std::max(0.0, y_max - y_min); }
    [[nodiscard]] Point2 center() const { return {0.5 * (x_min + x_max), 0.5 * (y_min + y_max)}; }
    friend bool operator==(const DetectionBox&, const DetectionBox&) = default;
};

struct DetectorSettings {
    double confidence_threshold = 0.25;
    double nms_iou_threshold = 0.45;
    double smoothing_sigma_px = 3.0;
    double density_threshold_frac = 0.08;
    int min_box_area_px = 25;
    /// Components holding less than this share of the frame's raw mass are
    /// discarded; these are tail outliers clumped together by the blur.
    double min_mass_frac = 0.005;
    /// A box with at least this share of its area inside a larger box is
    /// dropped (sparse, flat regions can break into nested pieces).
    double nested_overlap_frac = 0.9;

    void validate() const {
        if (!(confidence_threshold >= 0.0 && confidence_threshold <= 1.0))
            throw Error("confidence_threshold must lie in [0, 1]");
        if (!(nms_iou_threshold > 0.0 && nms_iou_threshold < 1.0)) throw Error("nms_iou_threshold must lie in (0, 1)");
        if (!(smoothing_sigma_px >= 0.0)) throw Error("smoothing_sigma_px must be non-negative");
        if (!(density_threshold_frac > 0.0 && density_threshold_frac < 1.0))
            throw Error("density_threshold_frac must lie in (0, 1)");
        if (min_box_area_px < 1) throw Error("min_box_area_px must be positive");
        if (!(min_mass_frac >= 0.0 && min_mass_frac < 1.0)) throw Error("min_mass_frac must lie in [0, 1)");
        if (!(nested_overlap_frac > 0.0 && nested_overlap_frac <= 1.0)) throw Error("nested_overlap_frac must lie in (0, 1]");
    }
};

inline double iou(const DetectionBox& a, const DetectionBox& b) {
    const double ix = std::max(0.0, std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min));
    const double iy = std::max(0.0, std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min));
    const double inter = ix * iy;
    const double uni = a.area() + b.area() - inter;
    return uni > 0.0 ? inter / uni : 0.0;
}

/// Greedy non-maximum suppression. Output is ordered by descending
/// confidence; equal confidences order by x_min, then y_min.
inline std::vector<DetectionBox> nms(std::vector<DetectionBox> boxes, double iou_threshold) {
    std::stable_sort(boxes.begin(), boxes.end(), [](const DetectionBox& a, const DetectionBox& b) {
        if (a.confidence != b.confidence) return a.confidence > b.confidence;
        if (a.x_min != b.x_min) return a.x_min < b.x_min;
        return a.y_min < b.y_min;
    });
    std::vector<DetectionBox> kept;
    std::vector<char> removed(boxes.size(), 0);
    for (std::size_t i = 0; i < boxes.size(); ++i) {
        if (removed[i]) continue;
        kept.push_back(boxes[i]);
        for (std::size_t j = i + 1; j < boxes.size(); ++j)
            if (!removed[j] && iou(boxes[i], boxes[j]) > iou_threshold) removed[j] = 1;
    }
    return kept;
}

/// Removes every box that has at least `overlap_frac` of its area inside a
/// strictly larger box; order of the survivors is preserved.
inline std::vector<DetectionBox> drop_nested(const std::vector<DetectionBox>& boxes, double overlap_frac) {
    std::vector<DetectionBox> kept;
    for (std::size_t j = 0; j < boxes.size(); ++j) {
        const auto& b = boxes[j];
        bool nested = false;
        for (std::size_t i = 0; i < boxes.size() && !nested; ++i) {
            const auto& a = boxes[i];
            if (i == j || !(a.area() > b.area())) continue;
            const double ix = std::max(0.0, std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min));
            const double iy = std::max(0.0, std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min));
            nested = ix * iy >= overlap_frac * b.area();
        }
        if (!nested) kept.push_back(b);
    }
    return kept;
}

/// Separable Gaussian blur, kernel truncated at 3 sigma, zero padding.
inline std::vector<double> gaussian_smooth(const std::vector<double>& grid, int width, int height, double sigma) {
    if (sigma <= 0.0) return grid;
    const int radius = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
    for (int i = -radius; i <= radius; ++i)
        kernel[static_cast<std::size_t>(i + radius)] = std::exp(-0.5 * (i * i) / (sigma * sigma));
    const double norm = std::accumulate(kernel.begin(), kernel.end(), 0.0);
    for (double& v : kernel) v /= norm;

    const auto W = static_cast<std::size_t>(width);
    std::vector<double> tmp(grid.size(), 0.0), out(grid.size(), 0.0);
    for (int r = 0; r < height; ++r) {
        const double* row = grid.data() + static_cast<std::size_t>(r) * W;
        double* dst = tmp.data() + static_cast<std::size_t>(r) * W;
        for (int c = 0; c < width; ++c) {
            const int lo = std::max(0, c - radius), hi = std::min(width - 1, c + radius);
            double s = 0.0;
            for (int q = lo; q <= hi; ++q) s += kernel[static_cast<std::size_t>(q - c + radius)] * row[q];
            dst[c] = s;
        }
    }
    for (int r = 0; r < height; ++r) {
        const int lo = std::max(0, r - radius), hi = std::min(height - 1, r + radius);
        double* dst = out.data() + static_cast<std::size_t>(r) * W;
        for (int q = lo; q <= hi; ++q) {
            const double w = kernel[static_cast<std::size_t>(q - r + radius)];
            const double* src = tmp.data() + static_cast<std::size_t>(q) * W;
            for (int c = 0; c < width; ++c) dst[c] += w * src[c];
        }
    }
    return out;
}

/// Classical density-blob detector: smooth, threshold against the image
/// maximum, label 8-connected components, box each, then suppress overlaps.
inline std::vector<DetectionBox> density_blob_detect(const RasterFrame& frame, const DetectorSettings& settings = {}) {
    settings.validate();
    const int W = frame.width(), H = frame.height();
    const auto smoothed = gaussian_smooth(frame.grid, W, H, settings.smoothing_sigma_px);
    const double peak = smoothed.empty() ? 0.0 : *std::max_element(smoothed.begin(), smoothed.end());
    if (!(peak > 0.0)) return {};
    const double threshold = settings.density_threshold_frac * peak;

    std::vector<int> component(smoothed.size(), -1);
    std::vector<std::size_t> stack;
    const double min_mass = settings.min_mass_frac * frame.grid_sum();
    std::vector<DetectionBox> boxes;
    std::vector<char> light;
    for (std::size_t seed = 0; seed < smoothed.size(); ++seed) {
        if (component[seed] >= 0 || smoothed[seed] < threshold) continue;
        const int id = static_cast<int>(boxes.size());
        int c_min = W, c_max = -1, r_min = H, r_max = -1;
        double mass = 0.0, raw_mass = 0.0;
        std::size_t pixels = 0;
        component[seed] = id;
        stack.push_back(seed);
        while (!stack.empty()) {
            const std::size_t at = stack.back();
            stack.pop_back();
            const int r = static_cast<int>(at / static_cast<std::size_t>(W));
            const int c = static_cast<int>(at % static_cast<std::size_t>(W));
            c_min = std::min(c_min, c);
            c_max = std::max(c_max, c);
            r_min = std::min(r_min, r);
            r_max = std::max(r_max, r);
            mass += smoothed[at];
            raw_mass += frame.grid[at];
            ++pixels;
            for (int dr = -1; dr <= 1; ++dr) {
                for (int dc = -1; dc <= 1; ++dc) {
                    const int rr = r + dr, cc = c + dc;
                    if ((dr == 0 && dc == 0) || rr < 0 || rr >= H || cc < 0 || cc >= W) continue;
                    const std::size_t nb = static_cast<std::size_t>(rr) * static_cast<std::size_t>(W) + static_cast<std::size_t>(cc);
                    if (component[nb] >= 0 || smoothed[nb] < threshold) continue;
                    component[nb] = id;
                    stack.push_back(nb);
                }
            }
        }
        boxes.push_back({static_cast<double>(c_min), static_cast<double>(r_min), static_cast<double>(c_max + 1),
                         static_cast<double>(r_max + 1), mass / static_cast<double>(pixels) / peak});
        light.push_back(raw_mass < min_mass);
    }
    std::vector<DetectionBox> kept;
    for (std::size_t i = 0; i < boxes.size(); ++i)
        if (!light[i] && boxes[i].area() >= settings.min_box_area_px) kept.push_back(boxes[i]);
    return drop_nested(nms(std::move(kept), settings.nms_iou_threshold), settings.nested_overlap_frac);
}

/// Initialization parameters from boxes: one centroid per box at the box
/// center mapped to data space, and a point-count estimate from the density
/// mass under the box. A pixel under several boxes counts toward the first
/// (highest-confidence) one only, so estimates never exceed the point total.
inline InitParams boxes_to_init(const std::vector<DetectionBox>& boxes, const RasterFrame& frame) {
    InitParams params;
    params.k = static_cast<int>(boxes.size());
    const int W = frame.width(), H = frame.height();
    const double grid_sum = frame.grid_sum();
    const double to_points = grid_sum > 0.0 ? static_cast<double>(frame.total_points) / grid_sum : 0.0;
    std::vector<char> claimed(frame.grid.size(), 0);
    for (const auto& b : boxes) {
        if (b.x_min < 0.0 || b.y_min < 0.0 || b.x_max > W || b.y_max > H) throw Error("box outside frame");
        params.centroids.push_back(frame.map.to_data(b.center()));
        params.confidences.push_back(b.confidence);
        // Pixels whose centers fall inside the box.
        const int c0 = std::max(0, static_cast<int>(std::ceil(b.x_min - 0.5)));
        const int c1 = std::min(W - 1, static_cast<int>(std::ceil(b.x_max - 0.5)) - 1);
        const int r0 = std::max(0, static_cast<int>(std::ceil(b.y_min - 0.5)));
        const int r1 = std::min(H - 1, static_cast<int>(std::ceil(b.y_max - 0.5)) - 1);
        double mass = 0.0;
        for (int r = r0; r <= r1; ++r) {
            for (int c = c0; c <= c1; ++c) {
                const std::size_t at = static_cast<std::size_t>(r) * static_cast<std::size_t>(W) + static_cast<std::size_t>(c);
                if (claimed[at]) continue;
                claimed[at] = 1;
                mass += frame.grid[at];
            }
        }
        params.size_estimates.push_back(mass * to_points);
    }
    return params;
}

/// Interchangeable source of detections for a frame.
class DetectorBackend {
public:
    virtual ~DetectorBackend() = default;
    [[nodiscard]] virtual std::vector<DetectionBox> detect(const RasterFrame& frame, const DetectorSettings& settings) const = 0;
    [[nodiscard]] virtual std::string name() const = 0;
};

class BlobBackend final : public DetectorBackend {
public:
    [[nodiscard]] std::vector<DetectionBox> detect(const RasterFrame& frame, const DetectorSettings& settings) const override {
        return density_blob_detect(frame, settings);
    }
    [[nodiscard]] std::string name() const override { return "blob"; }
};

}  // namespace clusinit
