#pragma once

#include <cstdint>
#include <functional>
#include <variant>
#include <vector>

#include "clusinit/core.hpp"

namespace clusinit {

/// Initialization parameters recovered from a detector: cluster count,
/// data-space centroids, and estimated point counts per cluster.
struct InitParams {
    int k = 0;
    std::vector<Point2> centroids;
    std::vector<double> size_estimates;
    std::vector<double> confidences;
};

/// k = 0 detections fall back to a single cluster at the global mean.
inline InitParams init_or_fallback(const InitParams& params, PointSpan points) {
    if (params.k > 0) return params;
    InitParams fallback;
    fallback.k = 1;
    fallback.centroids = {mean_of(points)};
    fallback.size_estimates = {static_cast<double>(points.size())};
    fallback.confidences = {0.0};
    return fallback;
}

struct RandomInit {
    int k = 1;
    std::uint64_t seed = 0;
};
struct PlusPlusInit {
    int k = 1;
    std::uint64_t seed = 0;
};
struct DetectedInit {
    InitParams params;
};
struct ExplicitInit {
    std::vector<Point2> centroids;
};

using InitSpec = std::variant<RandomInit, PlusPlusInit, DetectedInit, ExplicitInit>;

struct ClusteringResult {
    std::vector<int> assignments;
    std::vector<Point2> centroids;
    int iterations = 0;
    bool converged = false;
    double inertia = 0.0;
    double elapsed_seconds = 0.0;
    // Per-iteration objective: inertia for k-means, mean log-likelihood for
    // EM. Empty for algorithms without a monotone objective.
    std::vector<double> trace;

    [[nodiscard]] int k() const { return static_cast<int>(centroids.size()); }
};

/// Procedure used by index sweeps: cluster `points` into exactly k groups.
using Clusterer = std::function<ClusteringResult(PointSpan points, int k, std::uint64_t seed)>;

/// Within-cluster sum of squared distances.
inline double sse(PointSpan points, LabelSpan assignments, PointSpan centroids) {
    double total = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i)
        total += squared_distance(points[i], centroids[static_cast<std::size_t>(assignments[i])]);
    return total;
}

}  // namespace clusinit
