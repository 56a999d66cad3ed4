#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "clusinit/core.hpp"

namespace clusinit {

enum class ShapeFamily { GaussianBlobs, VariedVarianceBlobs, Anisotropic, NoisyMoons, NoisyCircles, NoStructure };
enum class Balance { Equal, RandomProportions };

inline constexpr std::array<ShapeFamily, 6> all_shape_families = {
    ShapeFamily::GaussianBlobs, ShapeFamily::VariedVarianceBlobs, ShapeFamily::Anisotropic,
    ShapeFamily::NoisyMoons,    ShapeFamily::NoisyCircles,        ShapeFamily::NoStructure};

inline std::string_view to_string(ShapeFamily f) {
    switch (f) {
        case ShapeFamily::GaussianBlobs: return "gaussian_blobs";
        case ShapeFamily::VariedVarianceBlobs: return "varied_variance_blobs";
        case ShapeFamily::Anisotropic: return "anisotropic";
        case ShapeFamily::NoisyMoons: return "noisy_moons";
        case ShapeFamily::NoisyCircles: return "noisy_circles";
        case ShapeFamily::NoStructure: return "no_structure";
    }
    return "unknown";
}

inline std::optional<ShapeFamily> parse_shape_family(std::string_view s) {
    for (auto f : all_shape_families)
        if (to_string(f) == s) return f;
    return std::nullopt;
}

inline std::string_view to_string(Balance b) { return b == Balance::Equal ? "equal" : "random_proportions"; }

inline std::optional<Balance> parse_balance(std::string_view s) {
    if (s == "equal") return Balance::Equal;
    if (s == "random_proportions") return Balance::RandomProportions;
    return std::nullopt;
}

struct GeneratorConfig {
    ShapeFamily shape_family = ShapeFamily::GaussianBlobs;
    int k = 3;
    int n_total = 1000;
    std::pair<double, double> variance_range{1.0, 2.0};  // std-dev bounds, data units
    double separation_min = 6.0;                         // in units of the larger std-dev
    Balance balance = Balance::Equal;
    double noise_level = 0.05;
    std::uint64_t seed = 0;
};

struct Dataset2D {
    std::vector<Point2> points;
    std::vector<int> labels;
    std::vector<Point2> centroids_true;
    int k_true = 0;
    GeneratorConfig config;
    // Generator std-dev per true cluster (data units, before any linear
    // transform). Empty for moons, circles and uniform data.
    std::vector<double> sigmas;
};

namespace datagen_detail {

inline constexpr double kCenterBoxSize = 100.0;
inline constexpr int kMaxCenterAttempts = 10000;
// RandomProportions weights are drawn uniformly from this range.
inline constexpr double kProportionLow = 1.0;
inline constexpr double kProportionHigh = 2.0;

inline int effective_k(const GeneratorConfig& c) {
    switch (c.shape_family) {
        case ShapeFamily::NoisyMoons:
        case ShapeFamily::NoisyCircles: return 2;
        case ShapeFamily::NoStructure: return 1;
        default: return c.k;
    }
}

inline void validate(const GeneratorConfig& c) {
    if (c.k < 1 || c.n_total < effective_k(c) || c.n_total < c.k) throw Error("invalid config");
    const auto [lo, hi] = c.variance_range;
    if (!(lo > 0.0) || !(hi >= lo)) throw Error("invalid config");
    if (!(c.separation_min >= 0.0)) throw Error("invalid config");
    if (!(c.noise_level >= 0.0 && c.noise_level < 1.0)) throw Error("invalid config");
}

// Every cluster gets at least one point; the remaining n - k are split by
// largest remainder so the counts always sum to n.
inline std::vector<int> cluster_counts(int n, int k, Balance balance, std::mt19937_64& rng) {
    std::vector<int> counts(static_cast<std::size_t>(k), 0);
    if (balance == Balance::Equal) {
        for (int i = 0; i < k; ++i) counts[static_cast<std::size_t>(i)] = n / k + (i < n % k ? 1 : 0);
        return counts;
    }
    std::uniform_real_distribution<double> weight(kProportionLow, kProportionHigh);
    std::vector<double> w(static_cast<std::size_t>(k));
    double total = 0.0;
    for (auto& x : w) total += (x = weight(rng));
    const int spare = n - k;
    std::vector<std::pair<double, int>> remainders;
    int assigned = 0;
    for (int i = 0; i < k; ++i) {
        const double share = spare * w[static_cast<std::size_t>(i)] / total;
        const int whole = static_cast<int>(std::floor(share));
        counts[static_cast<std::size_t>(i)] = 1 + whole;
        assigned += whole;
        remainders.emplace_back(share - whole, i);
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (int r = 0; r < spare - assigned; ++r) ++counts[static_cast<std::size_t>(remainders[static_cast<std::size_t>(r)].second)];
    return counts;
}

struct Linear2 {
    double a = 1, b = 0, c = 0, d = 1;  // [[a b] [c d]]
    [[nodiscard]] Point2 apply(Point2 p) const { return {a * p.x + b * p.y, c * p.x + d * p.y}; }
    [[nodiscard]] double determinant() const { return a * d - b * c; }
};

// R(theta) * diag(s1, s2) * R(phi); determinant s1*s2 in [0.3, 1.7] and
// singular-value ratio s1/s2 in [1.5, 3].
inline Linear2 random_anisotropy(std::mt19937_64& rng, double& largest_singular) {
    std::uniform_real_distribution<double> angle(0.0, std::numbers::pi);
    std::uniform_real_distribution<double> det_dist(0.3, 1.7);
    std::uniform_real_distribution<double> ratio_dist(1.5, 3.0);
    const double theta = angle(rng), phi = angle(rng);
    const double det = det_dist(rng), ratio = ratio_dist(rng);
    const double s1 = std::sqrt(det * ratio), s2 = std::sqrt(det / ratio);
    largest_singular = s1;
    const double ct = std::cos(theta), st = std::sin(theta), cp = std::cos(phi), sp = std::sin(phi);
    // [ct -st; st ct] * [s1 0; 0 s2] * [cp -sp; sp cp]
    const double m00 = ct * s1, m01 = -st * s2, m10 = st * s1, m11 = ct * s2;
    return {m00 * cp + m01 * sp, -m00 * sp + m01 * cp, m10 * cp + m11 * sp, -m10 * sp + m11 * cp};
}

inline std::vector<Point2> place_centers(const std::vector<double>& spread, double separation_min,
                                         std::mt19937_64& rng) {
    std::uniform_real_distribution<double> coord(0.0, kCenterBoxSize);
    std::vector<Point2> centers;
    centers.reserve(spread.size());
    int attempts = 0;
    while (centers.size() < spread.size()) {
        if (attempts++ >= kMaxCenterAttempts) throw Error("infeasible separation");
        const Point2 candidate{coord(rng), coord(rng)};
        const double s_new = spread[centers.size()];
        bool ok = true;
        for (std::size_t j = 0; j < centers.size() && ok; ++j)
            ok = distance(candidate, centers[j]) >= separation_min * std::max(s_new, spread[j]);
        if (ok) centers.push_back(candidate);
    }
    return centers;
}

inline Dataset2D blobs(const GeneratorConfig& cfg, std::mt19937_64& rng) {
    Dataset2D ds;
    ds.config = cfg;
    ds.k_true = cfg.k;
    const auto k = static_cast<std::size_t>(cfg.k);
    std::uniform_real_distribution<double> sigma_dist(cfg.variance_range.first, cfg.variance_range.second);

    std::vector<double> sigmas(k);
    if (cfg.shape_family == ShapeFamily::VariedVarianceBlobs) {
        for (auto& s : sigmas) s = sigma_dist(rng);
    } else {
        std::fill(sigmas.begin(), sigmas.end(), sigma_dist(rng));
    }

    Linear2 transform;
    double stretch = 1.0;
    if (cfg.shape_family == ShapeFamily::Anisotropic) transform = random_anisotropy(rng, stretch);

    // Separation is enforced in output space against the transformed spread.
    std::vector<double> spread(k);
    for (std::size_t i = 0; i < k; ++i) spread[i] = sigmas[i] * stretch;
    ds.centroids_true = place_centers(spread, cfg.separation_min, rng);
    ds.sigmas = sigmas;

    const auto counts = cluster_counts(cfg.n_total, cfg.k, cfg.balance, rng);
    ds.points.reserve(static_cast<std::size_t>(cfg.n_total));
    ds.labels.reserve(static_cast<std::size_t>(cfg.n_total));
    std::normal_distribution<double> z(0.0, 1.0);
    for (std::size_t i = 0; i < k; ++i) {
        for (int j = 0; j < counts[i]; ++j) {
            const Point2 offset{sigmas[i] * z(rng), sigmas[i] * z(rng)};
            ds.points.push_back(ds.centroids_true[i] + transform.apply(offset));
            ds.labels.push_back(static_cast<int>(i));
        }
    }
    return ds;
}

inline void finish_component_means(Dataset2D& ds) {
    std::vector<Point2> sums(static_cast<std::size_t>(ds.k_true));
    std::vector<int> counts(static_cast<std::size_t>(ds.k_true), 0);
    for (std::size_t i = 0; i < ds.points.size(); ++i) {
        const auto l = static_cast<std::size_t>(ds.labels[i]);
        sums[l] = sums[l] + ds.points[i];
        ++counts[l];
    }
    ds.centroids_true.resize(sums.size());
    for (std::size_t l = 0; l < sums.size(); ++l)
        ds.centroids_true[l] = (1.0 / counts[l]) * sums[l];
}

inline Dataset2D two_component(const GeneratorConfig& cfg, std::mt19937_64& rng) {
    Dataset2D ds;
    ds.config = cfg;
    ds.k_true = 2;
    const int n_out = cfg.n_total / 2;
    const int n_in = cfg.n_total - n_out;
    const bool moons = cfg.shape_family == ShapeFamily::NoisyMoons;
    std::normal_distribution<double> noise(0.0, 1.0);
    auto add = [&](Point2 p, int label) {
        if (cfg.noise_level > 0.0) p = p + Point2{cfg.noise_level * noise(rng), cfg.noise_level * noise(rng)};
        ds.points.push_back(p);
        ds.labels.push_back(label);
    };
    auto angle = [&](int i, int count) {
        // Moons sweep [0, pi] inclusive; circles [0, 2pi) exclusive.
        if (moons) return count > 1 ? std::numbers::pi * i / (count - 1) : 0.0;
        return 2.0 * std::numbers::pi * i / count;
    };
    constexpr double kInnerRadius = 0.5;
    for (int i = 0; i < n_out; ++i) {
        const double t = angle(i, n_out);
        add({std::cos(t), std::sin(t)}, 0);
    }
    for (int i = 0; i < n_in; ++i) {
        const double t = angle(i, n_in);
        if (moons)
            add({1.0 - std::cos(t), 1.0 - std::sin(t) - 0.5}, 1);
        else
            add({kInnerRadius * std::cos(t), kInnerRadius * std::sin(t)}, 1);
    }
    finish_component_means(ds);
    return ds;
}

inline Dataset2D uniform_box(const GeneratorConfig& cfg, std::mt19937_64& rng) {
    Dataset2D ds;
    ds.config = cfg;
    ds.k_true = 1;
    std::uniform_real_distribution<double> coord(0.0, kCenterBoxSize);
    ds.points.reserve(static_cast<std::size_t>(cfg.n_total));
    for (int i = 0; i < cfg.n_total; ++i) ds.points.push_back({coord(rng), coord(rng)});
    ds.labels.assign(static_cast<std::size_t>(cfg.n_total), 0);
    finish_component_means(ds);
    return ds;
}

}  // namespace datagen_detail

/// Draw a labeled synthetic dataset. Deterministic in `config` (seed included).
inline Dataset2D generate(const GeneratorConfig& config) {
    datagen_detail::validate(config);
    std::mt19937_64 rng(mix64(config.seed));
    switch (config.shape_family) {
        case ShapeFamily::GaussianBlobs:
        case ShapeFamily::VariedVarianceBlobs:
        case ShapeFamily::Anisotropic: return datagen_detail::blobs(config, rng);
        case ShapeFamily::NoisyMoons:
        case ShapeFamily::NoisyCircles: return datagen_detail::two_component(config, rng);
        case ShapeFamily::NoStructure: return datagen_detail::uniform_box(config, rng);
    }
    throw Error("invalid config");
}

/// Randomization bounds for a generated suite. Defaults follow the published
/// experiment: 2..12 clusters and 20000..50000 points per dataset.
struct SuiteSpec {
    std::vector<std::pair<ShapeFamily, double>> family_mix{
        {ShapeFamily::GaussianBlobs, 1.0},     {ShapeFamily::VariedVarianceBlobs, 1.0},
        {ShapeFamily::Anisotropic, 1.0},       {ShapeFamily::NoisyMoons, 1.0},
        {ShapeFamily::NoisyCircles, 1.0},      {ShapeFamily::NoStructure, 1.0}};
    std::pair<int, int> k_range{2, 12};
    std::pair<int, int> n_range{20000, 50000};
    std::pair<double, double> variance_range{1.0, 2.0};
    std::pair<double, double> separation_range{6.0, 10.0};
    std::pair<double, double> noise_range{0.03, 0.08};
    // Probability that a dataset uses RandomProportions instead of Equal.
    double random_balance_probability = 0.5;
};

/// Config of dataset `index` in the suite; depends only on (spec, master_seed, index).
inline GeneratorConfig suite_config(const SuiteSpec& spec, std::uint64_t master_seed, std::size_t index) {
    if (spec.family_mix.empty()) throw Error("invalid config");
    const std::uint64_t child = derive_seed(master_seed, index);
    std::mt19937_64 rng(mix64(child ^ 0x5eedULL));

    std::vector<double> weights;
    for (const auto& [family, w] : spec.family_mix) weights.push_back(w);
    std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
    std::uniform_int_distribution<int> k_dist(spec.k_range.first, spec.k_range.second);
    std::uniform_int_distribution<int> n_dist(spec.n_range.first, spec.n_range.second);
    std::uniform_real_distribution<double> sep_dist(spec.separation_range.first, spec.separation_range.second);
    std::uniform_real_distribution<double> noise_dist(spec.noise_range.first, spec.noise_range.second);
    std::bernoulli_distribution random_balance(spec.random_balance_probability);

    GeneratorConfig cfg;
    cfg.shape_family = spec.family_mix[pick(rng)].first;
    cfg.k = k_dist(rng);
    cfg.n_total = n_dist(rng);
    cfg.variance_range = spec.variance_range;
    cfg.separation_min = sep_dist(rng);
    cfg.noise_level = noise_dist(rng);
    cfg.balance = random_balance(rng) ? Balance::RandomProportions : Balance::Equal;
    cfg.seed = child;
    return cfg;
}

inline std::vector<Dataset2D> generate_suite(std::size_t count, std::uint64_t master_seed, const SuiteSpec& spec = {}) {
    if (count == 0) throw Error("invalid config");
    std::vector<Dataset2D> suite;
    suite.reserve(count);
    for (std::size_t i = 0; i < count; ++i) suite.push_back(generate(suite_config(spec, master_seed, i)));
    return suite;
}

}  // namespace clusinit
