#pragma once

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "clusinit/assignment.hpp"
#include "clusinit/core.hpp"

namespace clusinit {

inline double euclidean(Point2 p, Point2 q) { return std::sqrt((q.x - p.x) * (q.x - p.x) + (q.y - p.y) * (q.y - p.y)); }

struct MatchReport {
    std::vector<std::pair<int, int>> pairs;  // (true_index, detected_index)
    std::vector<double> distances;
    std::vector<int> unmatched_true;
    std::vector<int> unmatched_detected;
    double mean_distance = 0.0;
    double max_distance = 0.0;

    [[nodiscard]] double total_distance() const {
        double s = 0.0;
        for (double d : distances) s += d;
        return s;
    }
};

/// Optimal (minimum total distance) one-to-one pairing of true and detected
/// centroids; pairs are ordered by true index.
inline MatchReport match_centroids(PointSpan true_centroids, PointSpan detected) {
    CostMatrix cost(true_centroids.size(), detected.size());
    for (std::size_t i = 0; i < true_centroids.size(); ++i)
        for (std::size_t j = 0; j < detected.size(); ++j) cost(i, j) = euclidean(true_centroids[i], detected[j]);
    const auto row_to_col = solve_assignment(cost);

    MatchReport report;
    std::vector<char> detected_used(detected.size(), 0);
    for (std::size_t i = 0; i < row_to_col.size(); ++i) {
        const int j = row_to_col[i];
        if (j < 0) {
            report.unmatched_true.push_back(static_cast<int>(i));
            continue;
        }
        detected_used[static_cast<std::size_t>(j)] = 1;
        report.pairs.emplace_back(static_cast<int>(i), j);
        report.distances.push_back(cost(i, static_cast<std::size_t>(j)));
    }
    for (std::size_t j = 0; j < detected.size(); ++j)
        if (!detected_used[j]) report.unmatched_detected.push_back(static_cast<int>(j));
    if (!report.distances.empty()) {
        report.mean_distance = report.total_distance() / static_cast<double>(report.distances.size());
        report.max_distance = *std::max_element(report.distances.begin(), report.distances.end());
    }
    return report;
}

/// Fraction of points whose predicted cluster maps to their true class under
/// the cluster-to-class correspondence that maximizes the matched count.
inline double accuracy_rate(LabelSpan labels_true, LabelSpan labels_pred) {
    if (labels_true.size() != labels_pred.size()) throw Error("label length mismatch");
    if (labels_true.empty()) throw Error("empty labeling");
    for (std::size_t i = 0; i < labels_true.size(); ++i)
        if (labels_true[i] < 0 || labels_pred[i] < 0) throw Error("negative label");
    const auto kt = static_cast<std::size_t>(count_labels(labels_true));
    const auto kp = static_cast<std::size_t>(count_labels(labels_pred));
    CostMatrix table(kt, kp, 0.0);
    for (std::size_t i = 0; i < labels_true.size(); ++i)
        table(static_cast<std::size_t>(labels_true[i]), static_cast<std::size_t>(labels_pred[i])) -= 1.0;
    const auto row_to_col = solve_assignment(table);
    double matched = 0.0;
    for (std::size_t r = 0; r < kt; ++r)
        if (row_to_col[r] >= 0) matched -= table(r, static_cast<std::size_t>(row_to_col[r]));
    return matched / static_cast<double>(labels_true.size());
}

}  // namespace clusinit
