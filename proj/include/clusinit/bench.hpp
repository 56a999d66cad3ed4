#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <filesystem>
#include <iomanip>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "clusinit/clustering.hpp"
#include "clusinit/datagen.hpp"
#include "clusinit/detector.hpp"
#include "clusinit/eval.hpp"
#include "clusinit/indices.hpp"
#include "clusinit/io.hpp"
#include "clusinit/raster.hpp"
#include "clusinit/svg.hpp"

namespace clusinit {

enum class Algo { KMeans, XMeans, Rfcm, Gmm };

inline constexpr std::array<Algo, 4> all_algos = {Algo::KMeans, Algo::XMeans, Algo::Rfcm, Algo::Gmm};

inline std::string_view to_string(Algo a) {
    switch (a) {
        case Algo::KMeans: return "kmeans";
        case Algo::XMeans: return "xmeans";
        case Algo::Rfcm: return "rfcm";
        case Algo::Gmm: return "gmm";
    }
    return "unknown";
}

inline std::optional<Algo> parse_algo(std::string_view s) {
    for (auto a : all_algos)
        if (to_string(a) == s) return a;
    return std::nullopt;
}

/// One algorithm run twice on a dataset: seeded from the detector and from
/// k_true random data points (single restart).
struct AlgoOutcome {
    double ar_detected_init = 0.0;
    double ar_random_init = 0.0;
    int iterations_detected = 0;
    int iterations_random = 0;
    int k_final_detected = 0;
    int k_final_random = 0;
    double time_cluster_detected_s = 0.0;
    double time_cluster_random_s = 0.0;
};

struct BenchRecord {
    std::string dataset_id;
    ShapeFamily shape_family = ShapeFamily::GaussianBlobs;
    std::size_t n_points = 0;
    int k_true = 0;
    int k_detected = 0;
    std::map<IndexKind, int> k_by_index;
    MatchReport centroid_match;
    double bbox_diagonal = 0.0;
    std::map<Algo, AlgoOutcome> by_algo;
    double time_raster_s = 0.0;
    double time_detect_s = 0.0;
    double time_index_sweep_s = 0.0;
    /// Empty on success; otherwise the reason this dataset was skipped.
    std::string error;

    [[nodiscard]] bool ok() const { return error.empty(); }
};

struct BenchOptions {
    std::vector<Algo> algorithms{Algo::KMeans};
    std::vector<IndexKind> indices{all_index_kinds.begin(), all_index_kinds.end()};
    int k_max = 12;
    std::uint64_t seed = 0;
    DetectorSettings settings;
    int resolution = 640;
    /// Worker threads; record contents do not depend on it.
    int jobs = 1;
    /// Index sweeps run on a seeded subsample of at most this many points
    /// (0 = all points).
    std::size_t index_sample_max = 2000;
    /// Share of the points the detector sees (a seeded subsample); size
    /// estimates are scaled back to the full dataset.
    double detect_fraction = 1.0;
    int index_restarts = 3;
    int gap_refs = 10;
    int max_iter = 300;
};

namespace bench_detail {

inline std::vector<Point2> subsample(PointSpan points, std::size_t max_n, std::uint64_t seed) {
    if (max_n == 0 || points.size() <= max_n) return {points.begin(), points.end()};
    std::vector<std::size_t> idx(points.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i < max_n; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
        std::swap(idx[i], idx[pick(rng)]);
    }
    idx.resize(max_n);
    std::sort(idx.begin(), idx.end());
    std::vector<Point2> out;
    out.reserve(max_n);
    for (auto i : idx) out.push_back(points[i]);
    return out;
}

inline ClusteringResult run_algo(Algo algo, PointSpan points, const InitSpec& init, int k_max, std::uint64_t seed, int max_iter) {
    switch (algo) {
        case Algo::KMeans: return kmeans(points, init, max_iter);
        case Algo::Rfcm: {
            RfcmOptions opt;
            opt.max_iter = max_iter;
            return rfcm(points, init, opt);
        }
        case Algo::Gmm: {
            GmmOptions opt;
            opt.max_iter = max_iter;
            return gmm_em(points, init, opt);
        }
        case Algo::XMeans: {
            // x-means takes no centroids; the detected k becomes its lower bound.
            int k_min = 1;
            if (const auto* d = std::get_if<DetectedInit>(&init)) k_min = std::max(1, d->params.k);
            return xmeans(points, k_min, std::max(k_min, k_max), seed);
        }
    }
    throw Error("unknown algorithm");
}

}  // namespace bench_detail

inline std::string dataset_id(std::size_t index) {
    std::ostringstream s;
    s << "ds" << std::setw(4) << std::setfill('0') << index;
    return s.str();
}

/// The full per-dataset experiment. Every random choice derives from
/// (opts.seed, index), so the record does not depend on scheduling.
inline BenchRecord bench_one(const Dataset2D& ds, std::size_t index, const DetectorBackend& backend, const BenchOptions& opts) {
    BenchRecord rec;
    rec.dataset_id = dataset_id(index);
    rec.shape_family = ds.config.shape_family;
    rec.n_points = ds.points.size();
    rec.k_true = ds.k_true;
    try {
        const std::uint64_t base = derive_seed(opts.seed, index);
        rec.bbox_diagonal = bounds_of(ds.points).diagonal();

        std::vector<Point2> partial;
        PointSpan seen = ds.points;
        if (opts.detect_fraction < 1.0) {
            const auto want = static_cast<std::size_t>(std::ceil(opts.detect_fraction * static_cast<double>(ds.points.size())));
            partial = bench_detail::subsample(ds.points, std::max<std::size_t>(want, 1), derive_seed(base, 5));
            seen = partial;
        }

        Stopwatch raster_watch;
        const RasterFrame frame = rasterize(seen, opts.resolution);
        rec.time_raster_s = raster_watch.seconds();

        Stopwatch detect_watch;
        const auto boxes = backend.detect(frame, opts.settings);
        InitParams params = boxes_to_init(boxes, frame);
        rec.time_detect_s = detect_watch.seconds();
        const double scale = static_cast<double>(ds.points.size()) / static_cast<double>(seen.size());
        for (double& s : params.size_estimates) s *= scale;
        rec.k_detected = params.k;
        rec.centroid_match = match_centroids(ds.centroids_true, params.centroids);

        if (!opts.indices.empty()) {
            const auto sample = bench_detail::subsample(ds.points, opts.index_sample_max, derive_seed(base, 3));
            const Clusterer clusterer = make_kmeans_clusterer(opts.index_restarts, opts.max_iter);
            Stopwatch sweep_watch;
            for (IndexKind kind : opts.indices) {
                const auto report = estimate_k(sample, kind, opts.k_max, clusterer, derive_seed(base, 4), opts.gap_refs);
                rec.k_by_index[kind] = report.k_selected;
            }
            rec.time_index_sweep_s = sweep_watch.seconds();
        }

        const InitParams detected = init_or_fallback(params, ds.points);
        for (Algo algo : opts.algorithms) {
            const std::uint64_t algo_seed = derive_seed(base, 10 + static_cast<std::uint64_t>(algo));
            AlgoOutcome out;
            Stopwatch det_watch;
            const auto with_detected = bench_detail::run_algo(algo, ds.points, DetectedInit{detected}, opts.k_max, algo_seed, opts.max_iter);
            out.time_cluster_detected_s = det_watch.seconds();
            Stopwatch rnd_watch;
            const auto with_random =
                bench_detail::run_algo(algo, ds.points, RandomInit{ds.k_true, algo_seed}, opts.k_max, algo_seed, opts.max_iter);
            out.time_cluster_random_s = rnd_watch.seconds();
            out.ar_detected_init = accuracy_rate(ds.labels, with_detected.assignments);
            out.ar_random_init = accuracy_rate(ds.labels, with_random.assignments);
            out.iterations_detected = with_detected.iterations;
            out.iterations_random = with_random.iterations;
            out.k_final_detected = with_detected.k();
            out.k_final_random = with_random.k();
            rec.by_algo[algo] = out;
        }
    } catch (const std::exception& e) {
        rec.error = e.what();
    }
    return rec;
}

/// Runs the experiment over a suite with `opts.jobs` workers. Failed
/// datasets keep their error in the record; if every dataset fails the
/// first error is thrown.
inline std::vector<BenchRecord> run_bench(const std::vector<Dataset2D>& suite, const DetectorBackend& backend, const BenchOptions& opts) {
    if (suite.empty()) throw Error("bench suite is empty");
    opts.settings.validate();
    if (opts.k_max < 2) throw Error("k_max must be at least 2");
    if (opts.jobs < 1) throw Error("jobs must be at least 1");
    if (!(opts.detect_fraction > 0.0 && opts.detect_fraction <= 1.0)) throw Error("detect_fraction must lie in (0, 1]");
    std::vector<BenchRecord> records(suite.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < suite.size();) records[i] = bench_one(suite[i], i, backend, opts);
    };
    const auto workers = std::min<std::size_t>(static_cast<std::size_t>(opts.jobs), suite.size());
    if (workers <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    }
    if (std::none_of(records.begin(), records.end(), [](const BenchRecord& r) { return r.ok(); }))
        throw Error("every bench dataset failed; first error: " + records.front().error);
    return records;
}

// ---- bench.csv -----------------------------------------------------------
//
// Columns, in order:
//   dataset_id, shape_family, n_points, k_true, k_detected,
//   k_<index> for each selected index,
//   centroid_mean_distance, centroid_max_distance, centroid_unmatched_true,
//   centroid_unmatched_detected, bbox_diagonal,
//   per selected algorithm: ar_detected_init_<algo>, ar_random_init_<algo>,
//     iterations_detected_<algo>, iterations_random_<algo>,
//   time_raster_s, time_detect_s, time_index_sweep_s,
//   per selected algorithm: time_cluster_detected_s_<algo>, time_cluster_random_s_<algo>,
//   error.
// Every wall-clock column starts with "time_".

inline std::vector<std::string> bench_csv_header(const BenchOptions& opts) {
    std::vector<std::string> h{"dataset_id", "shape_family", "n_points", "k_true", "k_detected"};
    for (auto kind : opts.indices) h.push_back("k_" + std::string(to_string(kind)));
    for (const char* c : {"centroid_mean_distance", "centroid_max_distance", "centroid_unmatched_true", "centroid_unmatched_detected", "bbox_diagonal"})
        h.emplace_back(c);
    for (auto a : opts.algorithms)
        for (const char* c : {"ar_detected_init_", "ar_random_init_", "iterations_detected_", "iterations_random_"})
            h.push_back(c + std::string(to_string(a)));
    for (const char* c : {"time_raster_s", "time_detect_s", "time_index_sweep_s"}) h.emplace_back(c);
    for (auto a : opts.algorithms)
        for (const char* c : {"time_cluster_detected_s_", "time_cluster_random_s_"}) h.push_back(c + std::string(to_string(a)));
    h.emplace_back("error");
    return h;
}

inline std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c == '\n' ? ' ' : c);
    return out + "\"";
}

inline std::string bench_csv(const std::vector<BenchRecord>& records, const BenchOptions& opts) {
    std::ostringstream out;
    const auto header = bench_csv_header(opts);
    for (std::size_t c = 0; c < header.size(); ++c) out << (c ? "," : "") << header[c];
    out << '\n';
    for (const auto& r : records) {
        std::vector<std::string> row{r.dataset_id, std::string(to_string(r.shape_family)), std::to_string(r.n_points),
                                     std::to_string(r.k_true), std::to_string(r.k_detected)};
        for (auto kind : opts.indices) row.push_back(r.k_by_index.contains(kind) ? std::to_string(r.k_by_index.at(kind)) : "");
        row.push_back(format_double(r.centroid_match.mean_distance));
        row.push_back(format_double(r.centroid_match.max_distance));
        row.push_back(std::to_string(r.centroid_match.unmatched_true.size()));
        row.push_back(std::to_string(r.centroid_match.unmatched_detected.size()));
        row.push_back(format_double(r.bbox_diagonal));
        for (auto a : opts.algorithms) {
            const auto it = r.by_algo.find(a);
            if (it == r.by_algo.end()) {
                row.insert(row.end(), 4, "");
                continue;
            }
            row.push_back(format_double(it->second.ar_detected_init));
            row.push_back(format_double(it->second.ar_random_init));
            row.push_back(std::to_string(it->second.iterations_detected));
            row.push_back(std::to_string(it->second.iterations_random));
        }
        row.push_back(format_double(r.time_raster_s));
        row.push_back(format_double(r.time_detect_s));
        row.push_back(format_double(r.time_index_sweep_s));
        for (auto a : opts.algorithms) {
            const auto it = r.by_algo.find(a);
            row.push_back(it == r.by_algo.end() ? "" : format_double(it->second.time_cluster_detected_s));
            row.push_back(it == r.by_algo.end() ? "" : format_double(it->second.time_cluster_random_s));
        }
        row.push_back(csv_field(r.error));
        for (std::size_t c = 0; c < row.size(); ++c) out << (c ? "," : "") << row[c];
        out << '\n';
    }
    return out.str();
}

// ---- summary -------------------------------------------------------------

inline double mean_value(const std::vector<double>& v) {
    return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

inline double median_value(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

/// Aggregates per reported figure: k-detection rate per method, centroid
/// distances, accuracy and iterations per algorithm and init, time against
/// n, and the detected-vs-index time ratio.
inline json bench_summary(const std::vector<BenchRecord>& records, const BenchOptions& opts) {
    std::vector<const BenchRecord*> ok;
    for (const auto& r : records)
        if (r.ok()) ok.push_back(&r);
    const double n_ok = static_cast<double>(std::max<std::size_t>(ok.size(), 1));
    json s;
    s["datasets"] = records.size();
    s["failed"] = records.size() - ok.size();

    json rate;
    rate["detector"] = static_cast<double>(std::count_if(ok.begin(), ok.end(), [](auto* r) { return r->k_detected == r->k_true; })) / n_ok;
    for (auto kind : opts.indices)
        rate[std::string(to_string(kind))] = static_cast<double>(std::count_if(ok.begin(), ok.end(), [&](auto* r) {
                                                 return r->k_by_index.contains(kind) && r->k_by_index.at(kind) == r->k_true;
                                             })) /
                                             n_ok;
    s["k_detection_rate"] = rate;

    std::vector<double> dist, norm;
    std::size_t unmatched = 0;
    for (auto* r : ok) {
        for (double d : r->centroid_match.distances) dist.push_back(d);
        if (!r->centroid_match.distances.empty() && r->bbox_diagonal > 0.0) norm.push_back(r->centroid_match.mean_distance / r->bbox_diagonal);
        unmatched += r->centroid_match.unmatched_true.size() + r->centroid_match.unmatched_detected.size();
    }
    s["centroid_distance"] = {{"pairs", dist.size()},
                              {"mean", mean_value(dist)},
                              {"median", median_value(dist)},
                              {"max", dist.empty() ? 0.0 : *std::max_element(dist.begin(), dist.end())},
                              {"mean_over_diagonal", mean_value(norm)},
                              {"max_dataset_mean_over_diagonal", norm.empty() ? 0.0 : *std::max_element(norm.begin(), norm.end())},
                              {"unmatched", unmatched}};

    json acc, iters, ratio;
    for (auto a : opts.algorithms) {
        std::vector<double> ar_d, ar_r, it_d, it_r, t_d, t_r, with_detect, with_sweep;
        for (auto* r : ok) {
            const auto it = r->by_algo.find(a);
            if (it == r->by_algo.end()) continue;
            ar_d.push_back(it->second.ar_detected_init);
            ar_r.push_back(it->second.ar_random_init);
            it_d.push_back(it->second.iterations_detected);
            it_r.push_back(it->second.iterations_random);
            t_d.push_back(it->second.time_cluster_detected_s);
            t_r.push_back(it->second.time_cluster_random_s);
            with_detect.push_back(r->time_raster_s + r->time_detect_s + it->second.time_cluster_detected_s);
            with_sweep.push_back(r->time_index_sweep_s + it->second.time_cluster_random_s);
        }
        const std::string name(to_string(a));
        acc[name] = {{"mean_ar_detected_init", mean_value(ar_d)}, {"mean_ar_random_init", mean_value(ar_r)}, {"uplift", mean_value(ar_d) - mean_value(ar_r)}};
        iters[name] = {{"median_detected", median_value(it_d)},
                       {"median_random", median_value(it_r)},
                       {"mean_detected", mean_value(it_d)},
                       {"mean_random", mean_value(it_r)}};
        const double sweep = mean_value(with_sweep);
        ratio[name] = {{"cluster_detected_over_random", mean_value(t_r) > 0.0 ? mean_value(t_d) / mean_value(t_r) : 0.0},
                       {"detect_pipeline_over_index_pipeline", sweep > 0.0 ? mean_value(with_detect) / sweep : 0.0}};
    }
    s["accuracy"] = acc;
    s["iterations"] = iters;
    s["time_ratio"] = ratio;

    std::vector<const BenchRecord*> by_n = ok;
    std::sort(by_n.begin(), by_n.end(), [](auto* a, auto* b) { return a->n_points < b->n_points; });
    json curve = json::array();
    for (auto* r : by_n)
        curve.push_back({{"n", r->n_points}, {"time_detect_pipeline_s", r->time_raster_s + r->time_detect_s}, {"time_index_sweep_s", r->time_index_sweep_s}});
    s["time_vs_n"] = curve;
    return s;
}

/// One SVG per aggregate in the summary.
inline std::map<std::string, std::string> render_charts(const json& summary) {
    std::map<std::string, std::string> charts;
    {
        std::vector<std::string> labels;
        std::vector<double> values;
        for (const auto& [name, v] : summary.at("k_detection_rate").items()) {
            labels.push_back(name);
            values.push_back(v.get<double>());
        }
        charts["k_detection_rate.svg"] = svg::bar_chart("Correct number of clusters", "fraction of datasets", labels, values);
    }
    {
        const auto& c = summary.at("centroid_distance");
        charts["centroid_distance.svg"] = svg::bar_chart("Detected vs generated centroid distance", "data units", {"mean", "median", "max"},
                                                         {c.at("mean").get<double>(), c.at("median").get<double>(), c.at("max").get<double>()});
    }
    std::vector<std::string> labels;
    std::vector<double> ar, it, tr;
    for (const auto& [name, v] : summary.at("accuracy").items()) {
        labels.push_back(name + " detected");
        labels.push_back(name + " random");
        ar.push_back(v.at("mean_ar_detected_init").get<double>());
        ar.push_back(v.at("mean_ar_random_init").get<double>());
        const auto& i = summary.at("iterations").at(name);
        it.push_back(i.at("median_detected").get<double>());
        it.push_back(i.at("median_random").get<double>());
    }
    charts["accuracy.svg"] = svg::bar_chart("Accuracy rate by initialization", "mean AR", labels, ar);
    charts["iterations.svg"] = svg::bar_chart("Iterations to converge", "median iterations", labels, it);
    std::vector<std::string> ratio_labels;
    for (const auto& [name, v] : summary.at("time_ratio").items()) {
        ratio_labels.push_back(name);
        tr.push_back(v.at("detect_pipeline_over_index_pipeline").get<double>());
    }
    charts["time_ratio.svg"] = svg::bar_chart("Time with detected init / with index sweep", "ratio", ratio_labels, tr);
    svg::Series detect{"detector pipeline", {}, {}}, sweep{"index sweep", {}, {}};
    for (const auto& row : summary.at("time_vs_n")) {
        const double n = row.at("n").get<double>();
        detect.xs.push_back(n);
        detect.ys.push_back(row.at("time_detect_pipeline_s").get<double>());
        sweep.xs.push_back(n);
        sweep.ys.push_back(row.at("time_index_sweep_s").get<double>());
    }
    charts["time_vs_n.svg"] = svg::line_chart("Execution time against n", "points", "seconds", {detect, sweep});
    return charts;
}

/// bench.csv, summary.json and charts/*.svg under `dir`.
inline void write_bench_outputs(const std::filesystem::path& dir, const std::vector<BenchRecord>& records, const BenchOptions& opts) {
    write_text(dir / "bench.csv", bench_csv(records, opts));
    const json summary = bench_summary(records, opts);
    write_json(dir / "summary.json", summary);
    for (const auto& [name, text] : render_charts(summary)) write_text(dir / "charts" / name, text);
}

// ---- time scaling ------------------------------------------------------------

struct ScalingRow {
    std::size_t n = 0;
    int k_detected = 0;
    double time_raster_s = 0.0;
    double time_detect_s = 0.0;  // detection stage alone, fixed resolution
    double time_index_sweep_s = 0.0;
    [[nodiscard]] double time_detect_pipeline_s() const { return time_raster_s + time_detect_s; }
};

struct ScalingOptions {
    int k_max = 12;
    std::vector<IndexKind> methods{IndexKind::BIC, IndexKind::DaviesBouldin, IndexKind::CalinskiHarabasz};
    DetectorSettings settings;
    int resolution = 640;
    /// Each timing is the median of this many repetitions.
    int repeats = 3;
    int index_restarts = 1;
    double separation_min = 8.0;
};

/// Serial timing of the detector pipeline against the index sweep on
/// Gaussian-blob datasets of growing size. All n share the same centroids
/// layout seed so that only the point count changes.
inline std::vector<ScalingRow> time_scaling_experiment(const std::vector<std::size_t>& n_values, int k_true, std::uint64_t seed,
                                                       const DetectorBackend& backend, const ScalingOptions& opts = {}) {
    for (std::size_t i = 1; i < n_values.size(); ++i)
        if (n_values[i] <= n_values[i - 1]) throw Error("n_values must be increasing");
    std::vector<ScalingRow> table;
    const Clusterer clusterer = make_kmeans_clusterer(opts.index_restarts);
    for (std::size_t n : n_values) {
        GeneratorConfig cfg;
        cfg.k = k_true;
        cfg.n_total = static_cast<int>(n);
        cfg.separation_min = opts.separation_min;
        cfg.seed = seed;
        const auto ds = generate(cfg);
        ScalingRow row;
        row.n = n;
        std::vector<double> t_raster, t_detect, t_sweep;
        for (int rep = 0; rep < std::max(1, opts.repeats); ++rep) {
            Stopwatch rw;
            const RasterFrame frame = rasterize(ds.points, opts.resolution);
            t_raster.push_back(rw.seconds());
            Stopwatch dw;
            const auto boxes = backend.detect(frame, opts.settings);
            row.k_detected = boxes_to_init(boxes, frame).k;
            t_detect.push_back(dw.seconds());
            Stopwatch sw;
            for (IndexKind kind : opts.methods) (void)estimate_k(ds.points, kind, opts.k_max, clusterer, seed);
            t_sweep.push_back(sw.seconds());
        }
        row.time_raster_s = median_value(t_raster);
        row.time_detect_s = median_value(t_detect);
        row.time_index_sweep_s = median_value(t_sweep);
        table.push_back(row);
    }
    return table;
}

}  // namespace clusinit
