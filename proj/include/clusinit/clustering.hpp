#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>
#include <random>
#include <string_view>
#include <variant>
#include <vector>

#include "clusinit/core.hpp"
#include "clusinit/indices.hpp"
#include "clusinit/types.hpp"

namespace clusinit {

namespace clustering_detail {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

inline std::vector<Point2> random_points(PointSpan points, int k, std::uint64_t seed) {
    std::vector<std::size_t> idx(points.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::mt19937_64 rng(mix64(seed));
    // Partial Fisher-Yates: the first k slots are a uniform sample.
    for (std::size_t i = 0; i < static_cast<std::size_t>(k); ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
        std::swap(idx[i], idx[pick(rng)]);
    }
    std::vector<Point2> out;
    for (int i = 0; i < k; ++i) out.push_back(points[idx[static_cast<std::size_t>(i)]]);
    return out;
}

inline std::vector<Point2> plus_plus(PointSpan points, int k, std::uint64_t seed) {
    std::mt19937_64 rng(mix64(seed));
    std::uniform_int_distribution<std::size_t> first(0, points.size() - 1);
    std::vector<Point2> centers{points[first(rng)]};
    std::vector<double> d2(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) d2[i] = squared_distance(points[i], centers[0]);
    while (centers.size() < static_cast<std::size_t>(k)) {
        const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
        std::size_t chosen = 0;
        if (total > 0.0) {
            std::uniform_real_distribution<double> u(0.0, total);
            double target = u(rng);
            for (chosen = 0; chosen + 1 < d2.size(); ++chosen) {
                target -= d2[chosen];
                if (target <= 0.0 && d2[chosen] > 0.0) break;
            }
        } else {
            chosen = first(rng);
        }
        centers.push_back(points[chosen]);
        for (std::size_t i = 0; i < points.size(); ++i)
            d2[i] = std::min(d2[i], squared_distance(points[i], centers.back()));
    }
    return centers;
}

inline int nearest(Point2 p, const std::vector<Point2>& centroids, double* best_d2 = nullptr) {
    int best = 0;
    double best_dist = squared_distance(p, centroids[0]);
    for (std::size_t c = 1; c < centroids.size(); ++c) {
        const double d = squared_distance(p, centroids[c]);
        if (d < best_dist) {
            best_dist = d;
            best = static_cast<int>(c);
        }
    }
    if (best_d2) *best_d2 = best_dist;
    return best;
}

inline std::vector<int> assign_nearest(PointSpan points, const std::vector<Point2>& centroids) {
    std::vector<int> out(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) out[i] = nearest(points[i], centroids);
    return out;
}

inline double max_displacement(const std::vector<Point2>& a, const std::vector<Point2>& b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, distance(a[i], b[i]));
    return worst;
}

}  // namespace clustering_detail

/// Starting centroids for an InitSpec. Detected parameters with k = 0 fall
/// back to one centroid at the global mean.
inline std::vector<Point2> initial_centroids(PointSpan points, const InitSpec& init) {
    using namespace clustering_detail;
    if (points.empty()) throw Error("cannot cluster empty point set");
    auto check_k = [&](std::size_t k) {
        if (k < 1) throw Error("k must be at least 1");
        if (k > points.size()) throw Error("more clusters than points");
    };
    return std::visit(
        overloaded{
            [&](const RandomInit& r) {
                check_k(static_cast<std::size_t>(std::max(r.k, 0)));
                return random_points(points, r.k, r.seed);
            },
            [&](const PlusPlusInit& r) {
                check_k(static_cast<std::size_t>(std::max(r.k, 0)));
                return plus_plus(points, r.k, r.seed);
            },
            [&](const DetectedInit& d) {
                auto params = init_or_fallback(d.params, points);
                check_k(params.centroids.size());
                return params.centroids;
            },
            [&](const ExplicitInit& e) {
                check_k(e.centroids.size());
                return e.centroids;
            }},
        init);
}

/// Lloyd's algorithm. Stops when no centroid moves by `tol` or more.
inline ClusteringResult kmeans(PointSpan points, const InitSpec& init, int max_iter = 300, double tol = 1e-6) {
    using namespace clustering_detail;
    Stopwatch watch;
    ClusteringResult r;
    r.centroids = initial_centroids(points, init);
    const std::size_t k = r.centroids.size();
    std::vector<Point2> sums(k);
    std::vector<int> counts(k);
    std::vector<double> d2(points.size());
    r.assignments.assign(points.size(), 0);

    while (r.iterations < max_iter) {
        ++r.iterations;
        std::fill(sums.begin(), sums.end(), Point2{});
        std::fill(counts.begin(), counts.end(), 0);
        for (std::size_t i = 0; i < points.size(); ++i) {
            const int c = nearest(points[i], r.centroids);
            r.assignments[i] = c;
            sums[static_cast<std::size_t>(c)] = sums[static_cast<std::size_t>(c)] + points[i];
            ++counts[static_cast<std::size_t>(c)];
        }
        std::vector<Point2> next(k);
        for (std::size_t c = 0; c < k; ++c)
            next[c] = counts[c] > 0 ? (1.0 / counts[c]) * sums[c] : r.centroids[c];

        // Empty clusters take the point farthest from its assigned centroid.
        std::vector<char> taken(points.size(), 0);
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] > 0) continue;
            std::size_t far = 0;
            double far_d = -1.0;
            for (std::size_t i = 0; i < points.size(); ++i) {
                const auto a = static_cast<std::size_t>(r.assignments[i]);
                if (taken[i] || counts[a] <= 1) continue;
                const double d = squared_distance(points[i], next[a]);
                if (d > far_d) {
                    far_d = d;
                    far = i;
                }
            }
            if (far_d < 0.0) continue;
            taken[far] = 1;
            const auto old = static_cast<std::size_t>(r.assignments[far]);
            // Move the point and refresh the donor cluster's mean.
            sums[old] = sums[old] - points[far];
            --counts[old];
            next[old] = (1.0 / counts[old]) * sums[old];
            r.assignments[far] = static_cast<int>(c);
            sums[c] = points[far];
            counts[c] = 1;
            next[c] = points[far];
        }

        const double moved = max_displacement(r.centroids, next);
        r.centroids = std::move(next);
        r.trace.push_back(sse(points, r.assignments, r.centroids));
        if (moved < tol) {
            r.converged = true;
            break;
        }
    }
    r.inertia = sse(points, r.assignments, r.centroids);
    r.elapsed_seconds = watch.seconds();
    return r;
}

/// Best-of-`restarts` k-means++ runs by inertia; the default index-sweep clusterer.
inline ClusteringResult kmeans_best_of(PointSpan points, int k, std::uint64_t seed, int restarts = 5,
                                       int max_iter = 300) {
    ClusteringResult best;
    bool have = false;
    for (int r = 0; r < restarts; ++r) {
        auto run = kmeans(points, PlusPlusInit{k, derive_seed(seed, static_cast<std::uint64_t>(r))}, max_iter);
        if (!have || run.inertia < best.inertia) {
            best = std::move(run);
            have = true;
        }
    }
    return best;
}

inline Clusterer make_kmeans_clusterer(int restarts = 5, int max_iter = 300) {
    return [restarts, max_iter](PointSpan points, int k, std::uint64_t seed) {
        return kmeans_best_of(points, k, seed, restarts, max_iter);
    };
}

namespace clustering_detail {

// Children for a trial split: parent centroid -/+ the principal axis scaled
// to the half-normal mean sqrt(2 lambda / pi).
inline std::vector<Point2> split_seeds(PointSpan members, Point2 center) {
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (const auto& p : members) {
        const Point2 d = p - center;
        sxx += d.x * d.x;
        syy += d.y * d.y;
        sxy += d.x * d.y;
    }
    const auto n = static_cast<double>(members.size());
    sxx /= n;
    syy /= n;
    sxy /= n;
    const double tr = sxx + syy;
    const double disc = std::sqrt(std::max(0.0, 0.25 * (sxx - syy) * (sxx - syy) + sxy * sxy));
    const double lambda = 0.5 * tr + disc;
    Point2 axis{1.0, 0.0};
    if (std::abs(sxy) > 1e-300)
        axis = {lambda - syy, sxy};
    else if (syy > sxx)
        axis = {0.0, 1.0};
    const double len = std::hypot(axis.x, axis.y);
    const double reach = std::sqrt(2.0 * lambda / std::numbers::pi);
    const Point2 step = (reach / len) * axis;
    return {center - step, center + step};
}

inline double bic_or_inf(PointSpan points, LabelSpan assignments, PointSpan centroids) {
    try {
        return spherical_likelihood(points, assignments, centroids).bic();
    } catch (const Error&) {
        return std::numeric_limits<double>::infinity();
    }
}

}  // namespace clustering_detail

/// X-means: grow k from k_min by BIC-tested 2-means splits of individual
/// clusters, re-running global k-means after each round of accepted splits.
/// When no local split pays off, the most promising one is forced so the
/// search still reaches k_max; the model with the best global BIC wins.
inline ClusteringResult xmeans(PointSpan points, int k_min = 1, int k_max = 20, std::uint64_t seed = 0) {
    using namespace clustering_detail;
    Stopwatch watch;
    if (k_min < 1 || k_min > k_max) throw Error("invalid x-means bounds");
    if (static_cast<std::size_t>(k_min) > points.size()) throw Error("more clusters than points");
    k_max = std::min<int>(k_max, static_cast<int>(points.size()));

    ClusteringResult current = kmeans(points, PlusPlusInit{k_min, seed});
    ClusteringResult best = current;
    double best_bic = bic_or_inf(points, current.assignments, current.centroids);
    while (current.k() < k_max) {
        struct Split {
            std::size_t parent;
            double gain;
            std::array<Point2, 2> children;
        };
        std::vector<Split> accepted;
        std::optional<Split> fallback;
        std::vector<std::vector<Point2>> members(current.centroids.size());
        for (std::size_t i = 0; i < points.size(); ++i)
            members[static_cast<std::size_t>(current.assignments[i])].push_back(points[i]);

        for (std::size_t c = 0; c < members.size(); ++c) {
            const auto& m = members[c];
            if (m.size() < 4) continue;
            const std::vector<int> one(m.size(), 0);
            const Point2 parent_center = mean_of(m);
            const double parent_bic = bic_or_inf(m, one, std::vector<Point2>{parent_center});
            const auto child = kmeans(m, ExplicitInit{split_seeds(m, parent_center)});
            const double child_bic = bic_or_inf(m, child.assignments, child.centroids);
            if (!std::isfinite(child_bic)) continue;
            const Split split{c, parent_bic - child_bic, {child.centroids[0], child.centroids[1]}};
            if (child_bic < parent_bic)
                accepted.push_back(split);
            else if (!fallback || split.gain > fallback->gain)
                fallback = split;
        }
        if (accepted.empty()) {
            if (!fallback) break;
            accepted.push_back(*fallback);
        }

        std::stable_sort(accepted.begin(), accepted.end(), [](const Split& a, const Split& b) { return a.gain > b.gain; });
        const std::size_t room = static_cast<std::size_t>(k_max - current.k());
        if (accepted.size() > room) accepted.resize(room);

        std::vector<char> replaced(current.centroids.size(), 0);
        std::vector<Point2> next;
        for (const auto& s : accepted) {
            replaced[s.parent] = 1;
            next.push_back(s.children[0]);
            next.push_back(s.children[1]);
        }
        for (std::size_t c = 0; c < current.centroids.size(); ++c)
            if (!replaced[c]) next.push_back(current.centroids[c]);
        // Keep the surviving centroids first for stable labeling.
        std::rotate(next.begin(), next.begin() + static_cast<std::ptrdiff_t>(2 * accepted.size()), next.end());
        current = kmeans(points, ExplicitInit{next});
        const double bic = bic_or_inf(points, current.assignments, current.centroids);
        if (bic < best_bic) {
            best = current;
            best_bic = bic;
        }
    }
    best.elapsed_seconds = watch.seconds();
    return best;
}

struct RfcmOptions {
    double fuzzifier_m = 2.0;
    double delta_threshold = 0.95;
    double w_lower = 0.95;
    int max_iter = 100;
    double tol = 1e-5;
};

namespace clustering_detail {

// Fuzzy memberships of one point; a point on a centroid belongs to it alone.
inline void memberships(Point2 p, const std::vector<Point2>& centroids, double m, std::vector<double>& u) {
    const std::size_t k = centroids.size();
    std::vector<double> d(k);
    for (std::size_t c = 0; c < k; ++c) {
        d[c] = distance(p, centroids[c]);
        if (d[c] == 0.0) {
            std::fill(u.begin(), u.end(), 0.0);
            u[c] = 1.0;
            return;
        }
    }
    const double power = 2.0 / (m - 1.0);
    for (std::size_t c = 0; c < k; ++c) {
        double s = 0.0;
        for (std::size_t l = 0; l < k; ++l) s += std::pow(d[c] / d[l], power);
        u[c] = 1.0 / s;
    }
}

}  // namespace clustering_detail

/// Rough-fuzzy c-means. A point is a certain (lower-approximation) member of
/// its best cluster when its second-best membership is below delta times the
/// best; otherwise it is a boundary member of every cluster whose membership
/// reaches delta times the best.
inline ClusteringResult rfcm(PointSpan points, const InitSpec& init, const RfcmOptions& opt = {}) {
    using namespace clustering_detail;
    if (!(opt.fuzzifier_m > 1.0)) throw Error("fuzzifier must exceed 1");
    if (!(opt.delta_threshold > 0.0 && opt.delta_threshold < 1.0)) throw Error("delta_threshold must lie in (0, 1)");
    if (!(opt.w_lower > 0.0 && opt.w_lower <= 1.0)) throw Error("w_lower must lie in (0, 1]");
    Stopwatch watch;
    ClusteringResult r;
    r.centroids = initial_centroids(points, init);
    const std::size_t k = r.centroids.size();
    std::vector<double> u(k);
    std::vector<Point2> lower_sum(k), boundary_sum(k);
    std::vector<double> lower_count(k), boundary_weight(k);

    while (r.iterations < opt.max_iter) {
        ++r.iterations;
        std::fill(lower_sum.begin(), lower_sum.end(), Point2{});
        std::fill(boundary_sum.begin(), boundary_sum.end(), Point2{});
        std::fill(lower_count.begin(), lower_count.end(), 0.0);
        std::fill(boundary_weight.begin(), boundary_weight.end(), 0.0);
        for (const auto& p : points) {
            memberships(p, r.centroids, opt.fuzzifier_m, u);
            std::size_t top = 0;
            for (std::size_t c = 1; c < k; ++c)
                if (u[c] > u[top]) top = c;
            double second = 0.0;
            for (std::size_t c = 0; c < k; ++c)
                if (c != top) second = std::max(second, u[c]);
            if (k == 1 || second < opt.delta_threshold * u[top]) {
                lower_sum[top] = lower_sum[top] + p;
                lower_count[top] += 1.0;
            } else {
                for (std::size_t c = 0; c < k; ++c) {
                    if (u[c] < opt.delta_threshold * u[top]) continue;
                    const double w = std::pow(u[c], opt.fuzzifier_m);
                    boundary_sum[c] = boundary_sum[c] + w * p;
                    boundary_weight[c] += w;
                }
            }
        }
        std::vector<Point2> next(k);
        for (std::size_t c = 0; c < k; ++c) {
            const bool has_lower = lower_count[c] > 0.0;
            const bool has_boundary = boundary_weight[c] > 0.0;
            const Point2 lower_mean = has_lower ? (1.0 / lower_count[c]) * lower_sum[c] : Point2{};
            const Point2 boundary_mean = has_boundary ? (1.0 / boundary_weight[c]) * boundary_sum[c] : Point2{};
            if (has_lower && has_boundary)
                next[c] = opt.w_lower * lower_mean + (1.0 - opt.w_lower) * boundary_mean;
            else if (has_lower)
                next[c] = lower_mean;
            else if (has_boundary)
                next[c] = boundary_mean;
            else
                next[c] = r.centroids[c];
        }
        const double moved = max_displacement(r.centroids, next);
        r.centroids = std::move(next);
        if (moved < opt.tol) {
            r.converged = true;
            break;
        }
    }
    r.assignments = assign_nearest(points, r.centroids);
    r.inertia = sse(points, r.assignments, r.centroids);
    r.elapsed_seconds = watch.seconds();
    return r;
}

enum class CovarianceType { Spherical, Diagonal, Full };

inline std::string_view to_string(CovarianceType c) {
    switch (c) {
        case CovarianceType::Spherical: return "spherical";
        case CovarianceType::Diagonal: return "diagonal";
        case CovarianceType::Full: return "full";
    }
    return "full";
}

/// Symmetric 2x2 covariance.
struct Cov2 {
    double xx = 1.0, xy = 0.0, yy = 1.0;
    [[nodiscard]] double det() const { return xx * yy - xy * xy; }
};

struct GmmOptions {
    CovarianceType covariance = CovarianceType::Full;
    int max_iter = 200;
    double tol = 1e-6;
    double reg = 1e-6;
};

struct GmmResult : ClusteringResult {
    std::vector<double> weights;
    std::vector<Cov2> covariances;
    double mean_log_likelihood = 0.0;
};

namespace clustering_detail {

inline Cov2 constrain(Cov2 c, CovarianceType type, double reg) {
    switch (type) {
        case CovarianceType::Spherical: {
            const double v = 0.5 * (c.xx + c.yy);
            c = {v, 0.0, v};
            break;
        }
        case CovarianceType::Diagonal: c.xy = 0.0; break;
        case CovarianceType::Full: break;
    }
    c.xx += reg;
    c.yy += reg;
    return c;
}

inline double log_gaussian(Point2 p, Point2 mean, const Cov2& c) {
    const double det = c.det();
    const double dx = p.x - mean.x, dy = p.y - mean.y;
    const double maha = (c.yy * dx * dx - 2.0 * c.xy * dx * dy + c.xx * dy * dy) / det;
    return -std::log(2.0 * std::numbers::pi) - 0.5 * std::log(det) - 0.5 * maha;
}

}  // namespace clustering_detail

/// EM for a k-component 2D Gaussian mixture. Means come from `init`,
/// covariances start at the pooled data covariance, weights start uniform
/// (proportional to size estimates for detected initialization).
inline GmmResult gmm_em(PointSpan points, const InitSpec& init, const GmmOptions& opt = {}) {
    using namespace clustering_detail;
    Stopwatch watch;
    GmmResult r;
    r.centroids = initial_centroids(points, init);
    const std::size_t k = r.centroids.size();
    const std::size_t n = points.size();

    const Point2 mu = mean_of(points);
    Cov2 pooled{0.0, 0.0, 0.0};
    for (const auto& p : points) {
        const Point2 d = p - mu;
        pooled.xx += d.x * d.x;
        pooled.xy += d.x * d.y;
        pooled.yy += d.y * d.y;
    }
    pooled.xx /= static_cast<double>(n);
    pooled.xy /= static_cast<double>(n);
    pooled.yy /= static_cast<double>(n);
    r.covariances.assign(k, constrain(pooled, opt.covariance, opt.reg));

    r.weights.assign(k, 1.0 / static_cast<double>(k));
    if (const auto* detected = std::get_if<DetectedInit>(&init); detected && detected->params.k > 0) {
        const auto& sizes = detected->params.size_estimates;
        const double total = std::accumulate(sizes.begin(), sizes.end(), 0.0);
        if (sizes.size() == k && total > 0.0 &&
            std::all_of(sizes.begin(), sizes.end(), [](double s) { return s > 0.0; }))
            for (std::size_t c = 0; c < k; ++c) r.weights[c] = sizes[c] / total;
    }

    std::vector<double> resp(n * k);
    std::vector<double> logp(k);
    auto e_step = [&]() {
        for (const auto& c : r.covariances)
            if (!(c.det() > 0.0) || !std::isfinite(c.det())) throw Error("degenerate component");
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double top = -std::numeric_limits<double>::infinity();
            for (std::size_t c = 0; c < k; ++c) {
                logp[c] = std::log(r.weights[c]) + log_gaussian(points[i], r.centroids[c], r.covariances[c]);
                top = std::max(top, logp[c]);
            }
            double s = 0.0;
            for (std::size_t c = 0; c < k; ++c) s += std::exp(logp[c] - top);
            const double lse = top + std::log(s);
            total += lse;
            for (std::size_t c = 0; c < k; ++c) resp[i * k + c] = std::exp(logp[c] - lse);
        }
        return total / static_cast<double>(n);
    };
    auto m_step = [&]() {
        for (std::size_t c = 0; c < k; ++c) {
            double nk = 0.0;
            Point2 s{};
            for (std::size_t i = 0; i < n; ++i) {
                nk += resp[i * k + c];
                s = s + resp[i * k + c] * points[i];
            }
            if (!(nk > 1e-10)) throw Error("degenerate component");
            const Point2 mean = (1.0 / nk) * s;
            Cov2 cov{0.0, 0.0, 0.0};
            for (std::size_t i = 0; i < n; ++i) {
                const double w = resp[i * k + c];
                const Point2 d = points[i] - mean;
                cov.xx += w * d.x * d.x;
                cov.xy += w * d.x * d.y;
                cov.yy += w * d.y * d.y;
            }
            cov.xx /= nk;
            cov.xy /= nk;
            cov.yy /= nk;
            r.centroids[c] = mean;
            r.covariances[c] = constrain(cov, opt.covariance, opt.reg);
            r.weights[c] = nk / static_cast<double>(n);
        }
    };

    double ll = e_step();
    r.trace.push_back(ll);
    while (r.iterations < opt.max_iter) {
        m_step();
        ++r.iterations;
        const double next = e_step();
        r.trace.push_back(next);
        const double gain = next - ll;
        ll = next;
        if (gain < opt.tol) {
            r.converged = true;
            break;
        }
    }
    r.mean_log_likelihood = ll;
    r.assignments.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t best = 0;
        for (std::size_t c = 1; c < k; ++c)
            if (resp[i * k + c] > resp[i * k + best]) best = c;
        r.assignments[i] = static_cast<int>(best);
    }
    r.inertia = sse(points, r.assignments, r.centroids);
    r.elapsed_seconds = watch.seconds();
    return r;
}

}  // namespace clusinit
