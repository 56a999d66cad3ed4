#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <string_view>
#include <vector>

#include "clusinit/core.hpp"
#include "clusinit/types.hpp"

namespace clusinit {

enum class IndexKind { BIC, AIC, Dunn, DaviesBouldin, Silhouette, CalinskiHarabasz, GapStatistic };
enum class SelectionRule { Minimize, Maximize, GapRule };

inline constexpr std::array<IndexKind, 7> all_index_kinds = {
    IndexKind::BIC,        IndexKind::AIC,
    IndexKind::Dunn,       IndexKind::DaviesBouldin,
    IndexKind::Silhouette, IndexKind::CalinskiHarabasz,
    IndexKind::GapStatistic};

constexpr SelectionRule selection_rule(IndexKind kind) {
    switch (kind) {
        case IndexKind::BIC:
        case IndexKind::AIC:
        case IndexKind::DaviesBouldin: return SelectionRule::Minimize;
        case IndexKind::Dunn:
        case IndexKind::Silhouette:
        case IndexKind::CalinskiHarabasz: return SelectionRule::Maximize;
        case IndexKind::GapStatistic: return SelectionRule::GapRule;
    }
    return SelectionRule::Minimize;
}

/// Smallest k at which the index is defined.
constexpr int min_k(IndexKind kind) {
    switch (kind) {
        case IndexKind::BIC:
        case IndexKind::AIC:
        case IndexKind::GapStatistic: return 1;
        default: return 2;
    }
}

inline std::string_view to_string(IndexKind kind) {
    switch (kind) {
        case IndexKind::BIC: return "bic";
        case IndexKind::AIC: return "aic";
        case IndexKind::Dunn: return "dunn";
        case IndexKind::DaviesBouldin: return "davies_bouldin";
        case IndexKind::Silhouette: return "silhouette";
        case IndexKind::CalinskiHarabasz: return "calinski_harabasz";
        case IndexKind::GapStatistic: return "gap";
    }
    return "unknown";
}

inline std::optional<IndexKind> parse_index_kind(std::string_view s) {
    for (auto k : all_index_kinds)
        if (to_string(k) == s) return k;
    if (s == "db") return IndexKind::DaviesBouldin;
    if (s == "sw") return IndexKind::Silhouette;
    if (s == "ch") return IndexKind::CalinskiHarabasz;
    return std::nullopt;
}

namespace indices_detail {

[[noreturn]] inline void undefined() { throw Error("index undefined for k"); }

inline void check_partition(PointSpan points, LabelSpan assignments, PointSpan centroids) {
    if (centroids.empty()) throw Error("index requires k >= 1");
    if (points.size() != assignments.size()) throw Error("assignment length mismatch");
    for (int a : assignments)
        if (a < 0 || static_cast<std::size_t>(a) >= centroids.size()) throw Error("assignment out of range");
}

inline std::vector<int> cluster_sizes(LabelSpan assignments, std::size_t k) {
    std::vector<int> sizes(k, 0);
    for (int a : assignments) ++sizes[static_cast<std::size_t>(a)];
    return sizes;
}

}  // namespace indices_detail

/// Hard-assignment log-likelihood of a spherical Gaussian mixture in 2D:
/// per-cluster variance MLE around the given centroid, mixing weight n_i/n.
struct Likelihood {
    double log_likelihood = 0.0;
    int free_parameters = 0;  // k * (2 means + 1 variance) + (k - 1) weights
    std::size_t n = 0;

    [[nodiscard]] double bic() const {
        return -2.0 * log_likelihood + free_parameters * std::log(static_cast<double>(n));
    }
    [[nodiscard]] double aic() const { return -2.0 * log_likelihood + 2.0 * free_parameters; }
};

inline Likelihood spherical_likelihood(PointSpan points, LabelSpan assignments, PointSpan centroids) {
    indices_detail::check_partition(points, assignments, centroids);
    const std::size_t k = centroids.size();
    std::vector<double> ss(k, 0.0);
    const auto sizes = indices_detail::cluster_sizes(assignments, k);
    for (std::size_t i = 0; i < points.size(); ++i) {
        const auto a = static_cast<std::size_t>(assignments[i]);
        ss[a] += squared_distance(points[i], centroids[a]);
    }
    const auto n = static_cast<double>(points.size());
    Likelihood out;
    out.n = points.size();
    out.free_parameters = static_cast<int>(4 * k - 1);
    for (std::size_t c = 0; c < k; ++c) {
        if (sizes[c] == 0 || !(ss[c] > 0.0)) indices_detail::undefined();
        const double ni = sizes[c];
        const double var = ss[c] / (2.0 * ni);
        // sum over members of log(n_i/n) - log(2 pi var) - |x - c|^2 / (2 var)
        out.log_likelihood += ni * std::log(ni / n) - ni * std::log(2.0 * std::numbers::pi * var) - ni;
    }
    return out;
}

/// Minimum cross-cluster point distance over maximum cluster diameter.
inline double dunn_index(PointSpan points, LabelSpan assignments) {
    double min_inter = std::numeric_limits<double>::infinity();
    double max_diam_sq = 0.0;
    double min_inter_sq = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < points.size(); ++i) {
        for (std::size_t j = i + 1; j < points.size(); ++j) {
            const double d2 = squared_distance(points[i], points[j]);
            if (assignments[i] == assignments[j])
                max_diam_sq = std::max(max_diam_sq, d2);
            else
                min_inter_sq = std::min(min_inter_sq, d2);
        }
    }
    if (std::isinf(min_inter_sq) || !(max_diam_sq > 0.0)) indices_detail::undefined();
    min_inter = std::sqrt(min_inter_sq);
    return min_inter / std::sqrt(max_diam_sq);
}

inline double davies_bouldin(PointSpan points, LabelSpan assignments, PointSpan centroids) {
    const std::size_t k = centroids.size();
    const auto sizes = indices_detail::cluster_sizes(assignments, k);
    std::vector<double> scatter(k, 0.0);
    for (std::size_t i = 0; i < points.size(); ++i) {
        const auto a = static_cast<std::size_t>(assignments[i]);
        scatter[a] += distance(points[i], centroids[a]);
    }
    for (std::size_t c = 0; c < k; ++c) {
        if (sizes[c] == 0) indices_detail::undefined();
        scatter[c] /= sizes[c];
    }
    double total = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        double worst = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
            if (i == j) continue;
            const double sep = distance(centroids[i], centroids[j]);
            if (!(sep > 0.0)) indices_detail::undefined();
            worst = std::max(worst, (scatter[i] + scatter[j]) / sep);
        }
        total += worst;
    }
    return total / static_cast<double>(k);
}

/// Mean silhouette width; points in singleton clusters contribute 0.
inline double silhouette(PointSpan points, LabelSpan assignments, std::size_t k) {
    const auto sizes = indices_detail::cluster_sizes(assignments, k);
    if (std::count_if(sizes.begin(), sizes.end(), [](int s) { return s > 0; }) < 2) indices_detail::undefined();
    std::vector<double> sums(k);
    double total = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
        const auto own = static_cast<std::size_t>(assignments[i]);
        if (sizes[own] == 1) continue;
        std::fill(sums.begin(), sums.end(), 0.0);
        for (std::size_t j = 0; j < points.size(); ++j)
            sums[static_cast<std::size_t>(assignments[j])] += distance(points[i], points[j]);
        const double a = sums[own] / (sizes[own] - 1);
        double b = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < k; ++c)
            if (c != own && sizes[c] > 0) b = std::min(b, sums[c] / sizes[c]);
        const double denom = std::max(a, b);
        if (denom > 0.0) total += (b - a) / denom;
    }
    return total / static_cast<double>(points.size());
}

inline double calinski_harabasz(PointSpan points, LabelSpan assignments, PointSpan centroids) {
    const std::size_t k = centroids.size();
    const std::size_t n = points.size();
    if (n <= k) indices_detail::undefined();
    const auto sizes = indices_detail::cluster_sizes(assignments, k);
    const Point2 grand = mean_of(points);
    double between = 0.0;
    for (std::size_t c = 0; c < k; ++c) between += sizes[c] * squared_distance(centroids[c], grand);
    const double within = sse(points, assignments, centroids);
    if (!(within > 0.0)) indices_detail::undefined();
    return (between / static_cast<double>(k - 1)) / (within / static_cast<double>(n - k));
}

/// Value of a partition-based index. GapStatistic needs a clusterer and is
/// computed by gap_statistic instead.
inline double score(IndexKind kind, PointSpan points, LabelSpan assignments, PointSpan centroids) {
    indices_detail::check_partition(points, assignments, centroids);
    if (centroids.size() < static_cast<std::size_t>(min_k(kind))) indices_detail::undefined();
    switch (kind) {
        case IndexKind::BIC: return spherical_likelihood(points, assignments, centroids).bic();
        case IndexKind::AIC: return spherical_likelihood(points, assignments, centroids).aic();
        case IndexKind::Dunn: return dunn_index(points, assignments);
        case IndexKind::DaviesBouldin: return davies_bouldin(points, assignments, centroids);
        case IndexKind::Silhouette: return silhouette(points, assignments, centroids.size());
        case IndexKind::CalinskiHarabasz: return calinski_harabasz(points, assignments, centroids);
        case IndexKind::GapStatistic: throw Error("gap statistic requires a clusterer");
    }
    indices_detail::undefined();
}

struct GapValue {
    double gap = 0.0;
    double std_err = 0.0;
};

/// Uniform reference sample over `box` for gap replicate `replicate`.
inline std::vector<Point2> gap_reference_sample(const Bounds2& box, std::size_t n, std::uint64_t seed,
                                                std::size_t replicate) {
    std::mt19937_64 rng(derive_seed(seed, replicate + 1));
    std::uniform_real_distribution<double> ux(box.min_x, box.max_x > box.min_x ? box.max_x : box.min_x + 1e-12);
    std::uniform_real_distribution<double> uy(box.min_y, box.max_y > box.min_y ? box.max_y : box.min_y + 1e-12);
    std::vector<Point2> ref(n);
    for (auto& p : ref) {
        p.x = ux(rng);
        p.y = uy(rng);
    }
    return ref;
}

/// Seed handed to the clusterer for replicate b (b = -1 for the data itself).
inline std::uint64_t gap_clusterer_seed(std::uint64_t seed, long replicate) {
    return derive_seed(seed ^ 0xc1057e5ULL, static_cast<std::uint64_t>(replicate + 1));
}

inline GapValue gap_statistic(PointSpan points, int k, const Clusterer& clusterer, int b_refs = 10,
                              std::uint64_t seed = 0) {
    if (k < 1) throw Error("index requires k >= 1");
    if (b_refs < 1) throw Error("b_refs must be positive");
    const double w_data = clusterer(points, k, gap_clusterer_seed(seed, -1)).inertia;
    if (!(w_data > 0.0)) throw Error("degenerate dispersion");
    const Bounds2 box = bounds_of(points);
    std::vector<double> logs;
    logs.reserve(static_cast<std::size_t>(b_refs));
    for (int b = 0; b < b_refs; ++b) {
        const auto ref = gap_reference_sample(box, points.size(), seed, static_cast<std::size_t>(b));
        const double w_ref = clusterer(ref, k, gap_clusterer_seed(seed, b)).inertia;
        if (!(w_ref > 0.0)) throw Error("degenerate dispersion");
        logs.push_back(std::log(w_ref));
    }
    double mean = 0.0;
    for (double l : logs) mean += l;
    mean /= b_refs;
    double var = 0.0;
    for (double l : logs) var += (l - mean) * (l - mean);
    var /= b_refs;
    return {mean - std::log(w_data), std::sqrt(var) * std::sqrt(1.0 + 1.0 / b_refs)};
}

struct IndexReport {
    IndexKind kind = IndexKind::BIC;
    std::map<int, double> values;
    std::map<int, double> std_errs;  // gap statistic only
    int k_selected = 0;
    double elapsed_seconds = 0.0;
};

/// Choice of k implied by the recorded values under the kind's selection
/// rule; ties go to the smaller k.
inline int select_k(IndexKind kind, const std::map<int, double>& values, const std::map<int, double>& std_errs) {
    if (values.empty()) throw Error("sweep failed");
    switch (selection_rule(kind)) {
        case SelectionRule::Minimize:
        case SelectionRule::Maximize: {
            const bool minimize = selection_rule(kind) == SelectionRule::Minimize;
            auto best = values.begin();
            for (auto it = std::next(values.begin()); it != values.end(); ++it)
                if (minimize ? it->second < best->second : it->second > best->second) best = it;
            return best->first;
        }
        case SelectionRule::GapRule: {
            for (const auto& [k, gap] : values) {
                const auto next = values.find(k + 1);
                if (next == values.end()) continue;
                const double se = std_errs.count(k + 1) ? std_errs.at(k + 1) : 0.0;
                if (gap >= next->second - se) return k;
            }
            return values.rbegin()->first;
        }
    }
    return values.begin()->first;
}

/// Index sweep: cluster for every k in [min_k(kind), k_max], score, select.
inline IndexReport estimate_k(PointSpan points, IndexKind kind, int k_max, const Clusterer& clusterer,
                              std::uint64_t seed = 0, int b_refs = 10) {
    if (k_max < 2) throw Error("k_max must be at least 2");
    IndexReport report;
    report.kind = kind;
    const int k_hi = std::min<int>(k_max, static_cast<int>(points.size()));
    for (int k = min_k(kind); k <= k_hi; ++k) {
        Stopwatch watch;
        try {
            const std::uint64_t k_seed = derive_seed(seed, static_cast<std::uint64_t>(k));
            if (kind == IndexKind::GapStatistic) {
                const auto g = gap_statistic(points, k, clusterer, b_refs, k_seed);
                if (std::isfinite(g.gap)) {
                    report.values[k] = g.gap;
                    report.std_errs[k] = g.std_err;
                }
            } else {
                const auto result = clusterer(points, k, k_seed);
                const double v = score(kind, points, result.assignments, result.centroids);
                if (std::isfinite(v)) report.values[k] = v;
            }
        } catch (const Error&) {
            // k omitted from the report
        }
        report.elapsed_seconds += watch.seconds();
    }
    report.k_selected = select_k(kind, report.values, report.std_errs);
    return report;
}

}  // namespace clusinit
