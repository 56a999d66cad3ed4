#include <gtest/gtest.h>

#include <filesystem>
#include <set>

#include "clusinit/bench.hpp"
#include "oracles.hpp"

using namespace clusinit;
namespace fs = std::filesystem;

namespace {

std::vector<Dataset2D> small_suite(std::size_t count, std::uint64_t seed) {
    SuiteSpec spec;
    spec.family_mix = {{ShapeFamily::GaussianBlobs, 1.0}, {ShapeFamily::VariedVarianceBlobs, 1.0}};
    spec.k_range = {2, 4};
    spec.n_range = {3000, 5000};
    spec.separation_range = {9.0, 10.0};
    return generate_suite(count, seed, spec);
}

BenchOptions quick_options() {
    BenchOptions o;
    o.algorithms = {Algo::KMeans, Algo::Rfcm};
    o.indices = {IndexKind::BIC, IndexKind::CalinskiHarabasz, IndexKind::Silhouette};
    o.k_max = 6;
    o.index_sample_max = 500;
    o.index_restarts = 1;
    o.seed = 17;
    return o;
}

std::size_t count_lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

}  // namespace

TEST(Algo, NamesRoundTrip) {
    for (auto a : all_algos) EXPECT_EQ(parse_algo(to_string(a)), a);
    EXPECT_FALSE(parse_algo("dbscan").has_value());
}

TEST(Subsample, SeededSubsetOfRequestedSize) {
    std::vector<Point2> pts;
    for (int i = 0; i < 1000; ++i) pts.push_back({static_cast<double>(i), 0.0});
    const auto a = bench_detail::subsample(pts, 100, 5), b = bench_detail::subsample(pts, 100, 5);
    EXPECT_EQ(a, b);
    ASSERT_EQ(a.size(), 100u);
    std::set<double> xs;
    for (const auto& p : a) xs.insert(p.x);
    EXPECT_EQ(xs.size(), 100u);
    EXPECT_NE(bench_detail::subsample(pts, 100, 6), a);
    EXPECT_EQ(bench_detail::subsample(pts, 0, 5).size(), 1000u);
    EXPECT_EQ(bench_detail::subsample(pts, 5000, 5).size(), 1000u);
}

TEST(RunBench, SeparatedSuiteIsSolved) {
    const auto suite = small_suite(4, 3);
    const auto opts = quick_options();
    const auto records = run_bench(suite, BlobBackend{}, opts);
    ASSERT_EQ(records.size(), 4u);
    for (const auto& r : records) {
        ASSERT_TRUE(r.ok()) << r.error;
        EXPECT_EQ(r.k_detected, r.k_true) << r.dataset_id;
        EXPECT_TRUE(r.centroid_match.unmatched_true.empty());
        EXPECT_EQ(r.k_by_index.size(), 3u);
        for (const auto& [algo, out] : r.by_algo) {
            EXPECT_GE(out.ar_detected_init, 0.99) << to_string(algo);
            EXPECT_GE(out.ar_random_init, 0.0);
            EXPECT_LE(out.ar_random_init, 1.0);
            EXPECT_GE(out.time_cluster_detected_s, 0.0);
        }
        EXPECT_GE(r.time_detect_s, 0.0);
        EXPECT_GT(r.time_index_sweep_s, 0.0);
    }
}

TEST(RunBench, ContentIndependentOfJobCount) {
    const auto suite = small_suite(5, 8);
    auto opts = quick_options();
    const auto serial = bench_csv(run_bench(suite, BlobBackend{}, opts), opts);
    opts.jobs = 3;
    const auto parallel = bench_csv(run_bench(suite, BlobBackend{}, opts), opts);
    EXPECT_EQ(oracle::drop_time_columns(serial), oracle::drop_time_columns(parallel));
    EXPECT_NE(oracle::drop_time_columns(serial), serial);
}

TEST(RunBench, NoStructureGivesOneClusterAndPerfectAccuracy) {
    SuiteSpec spec;
    spec.family_mix = {{ShapeFamily::NoStructure, 1.0}};
    spec.n_range = {5000, 8000};
    const auto suite = generate_suite(3, 4, spec);
    BenchOptions opts;
    opts.indices = {};
    opts.algorithms = {Algo::KMeans};
    const auto records = run_bench(suite, BlobBackend{}, opts);
    for (const auto& r : records) {
        EXPECT_EQ(r.k_true, 1);
        EXPECT_EQ(r.k_detected, 1);
        EXPECT_DOUBLE_EQ(r.by_algo.at(Algo::KMeans).ar_detected_init, 1.0);
        EXPECT_DOUBLE_EQ(r.by_algo.at(Algo::KMeans).ar_random_init, 1.0);
    }
    EXPECT_DOUBLE_EQ(bench_summary(records, opts)["k_detection_rate"]["detector"].get<double>(), 1.0);
}

TEST(RunBench, FailuresAreRecordedAndRunContinues) {
    auto suite = small_suite(2, 9);
    Dataset2D broken;
    broken.k_true = 2;
    suite.insert(suite.begin() + 1, broken);
    auto opts = quick_options();
    opts.indices = {};
    const auto records = run_bench(suite, BlobBackend{}, opts);
    EXPECT_TRUE(records[0].ok());
    EXPECT_FALSE(records[1].ok());
    EXPECT_TRUE(records[2].ok());
    const json summary = bench_summary(records, opts);
    EXPECT_EQ(summary["failed"], 1);
    const std::string csv = bench_csv(records, opts);
    EXPECT_EQ(count_lines(csv), 4u);

    EXPECT_THROW(run_bench({broken, broken}, BlobBackend{}, opts), Error);
    EXPECT_THROW(run_bench({}, BlobBackend{}, opts), Error);
    opts.jobs = 0;
    EXPECT_THROW(run_bench(suite, BlobBackend{}, opts), Error);
}

TEST(BenchCsv, DocumentedHeader) {
    BenchOptions opts;
    opts.algorithms = {Algo::KMeans};
    opts.indices = {IndexKind::BIC};
    const std::vector<std::string> want{"dataset_id",
                                        "shape_family",
                                        "n_points",
                                        "k_true",
                                        "k_detected",
                                        "k_bic",
                                        "centroid_mean_distance",
                                        "centroid_max_distance",
                                        "centroid_unmatched_true",
                                        "centroid_unmatched_detected",
                                        "bbox_diagonal",
                                        "ar_detected_init_kmeans",
                                        "ar_random_init_kmeans",
                                        "iterations_detected_kmeans",
                                        "iterations_random_kmeans",
                                        "time_raster_s",
                                        "time_detect_s",
                                        "time_index_sweep_s",
                                        "time_cluster_detected_s_kmeans",
                                        "time_cluster_random_s_kmeans",
                                        "error"};
    EXPECT_EQ(bench_csv_header(opts), want);
    EXPECT_EQ(csv_field("a,b"), "\"a,b\"");
    EXPECT_EQ(csv_field("say \"x\""), "\"say \"\"x\"\"\"");
}

TEST(BenchOutputs, FilesAndSummaryFields) {
    const auto suite = small_suite(3, 12);
    const auto opts = quick_options();
    const auto records = run_bench(suite, BlobBackend{}, opts);
    const fs::path dir = fs::temp_directory_path() / "clusinit_bench_outputs";
    fs::remove_all(dir);
    write_bench_outputs(dir, records, opts);
    EXPECT_TRUE(fs::exists(dir / "bench.csv"));
    const json summary = read_json(dir / "summary.json");
    for (const char* key : {"k_detection_rate", "centroid_distance", "accuracy", "iterations", "time_vs_n", "time_ratio"})
        EXPECT_TRUE(summary.contains(key)) << key;
    EXPECT_TRUE(summary["k_detection_rate"].contains("silhouette"));
    EXPECT_TRUE(summary["accuracy"].contains("rfcm"));
    EXPECT_EQ(summary["time_vs_n"].size(), 3u);
    for (const char* chart : {"k_detection_rate.svg", "centroid_distance.svg", "accuracy.svg", "iterations.svg", "time_ratio.svg", "time_vs_n.svg"}) {
        std::ifstream in(dir / "charts" / chart);
        std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        EXPECT_EQ(text.rfind("<svg", 0), 0u) << chart;
        EXPECT_NE(text.find("</svg>"), std::string::npos) << chart;
    }
    fs::remove_all(dir);
}

TEST(Summary, AggregatesMatchRecords) {
    std::vector<BenchRecord> records(3);
    const int k_det[] = {3, 2, 3};
    const double ar_d[] = {1.0, 0.5, 0.9}, ar_r[] = {0.8, 0.5, 0.7};
    const int it_d[] = {2, 3, 4}, it_r[] = {10, 1, 7};
    for (int i = 0; i < 3; ++i) {
        auto& r = records[static_cast<std::size_t>(i)];
        r.k_true = 3;
        r.k_detected = k_det[i];
        r.n_points = 100u * static_cast<std::size_t>(3 - i);
        r.by_algo[Algo::KMeans] = {ar_d[i], ar_r[i], it_d[i], it_r[i], 3, 3, 0.1, 0.2};
    }
    BenchOptions opts;
    opts.indices = {};
    const json s = bench_summary(records, opts);
    EXPECT_NEAR(s["k_detection_rate"]["detector"].get<double>(), 2.0 / 3.0, 1e-12);
    EXPECT_NEAR(s["accuracy"]["kmeans"]["mean_ar_detected_init"].get<double>(), 0.8, 1e-12);
    EXPECT_NEAR(s["accuracy"]["kmeans"]["mean_ar_random_init"].get<double>(), 2.0 / 3.0, 1e-12);
    EXPECT_DOUBLE_EQ(s["iterations"]["kmeans"]["median_detected"].get<double>(), 3.0);
    EXPECT_DOUBLE_EQ(s["iterations"]["kmeans"]["median_random"].get<double>(), 7.0);
    EXPECT_NEAR(s["time_ratio"]["kmeans"]["cluster_detected_over_random"].get<double>(), 0.5, 1e-12);
    EXPECT_EQ(s["time_vs_n"][0]["n"], 100);
}

TEST(TimeScaling, TableShapeAndValidation) {
    ScalingOptions opts;
    opts.repeats = 1;
    opts.k_max = 4;
    EXPECT_TRUE(time_scaling_experiment({}, 3, 1, BlobBackend{}, opts).empty());
    EXPECT_THROW(time_scaling_experiment({2000, 1000}, 3, 1, BlobBackend{}, opts), Error);
    const auto table = time_scaling_experiment({1000, 2000}, 3, 1, BlobBackend{}, opts);
    ASSERT_EQ(table.size(), 2u);
    EXPECT_EQ(table[1].n, 2000u);
    for (const auto& row : table) {
        EXPECT_EQ(row.k_detected, 3);
        EXPECT_GT(row.time_index_sweep_s, 0.0);
        EXPECT_GE(row.time_detect_pipeline_s(), row.time_detect_s);
    }
}

TEST(DropTimeColumns, OracleRemovesOnlyTiming) {
    EXPECT_EQ(oracle::drop_time_columns("a,time_x,b\n1,2,\"3,4\"\n"), "a,b\n1,\"3,4\"\n");
}

TEST(Charts, EscapeAndShape) {
    const std::string bar = svg::bar_chart("a<b", "y", {"x&y"}, {2.0});
    EXPECT_NE(bar.find("a&lt;b"), std::string::npos);
    EXPECT_NE(bar.find("x&amp;y"), std::string::npos);
    const std::string line = svg::line_chart("t", "x", "y", {{"s", {1, 2}, {3, 4}}});
    EXPECT_NE(line.find("<polyline"), std::string::npos);
}

TEST(RunBench, PartialDataStillFindsClusters) {
    const auto suite = small_suite(3, 21);
    auto opts = quick_options();
    opts.indices = {};
    opts.detect_fraction = 0.2;
    for (const auto& r : run_bench(suite, BlobBackend{}, opts)) EXPECT_EQ(r.k_detected, r.k_true) << r.dataset_id;
    opts.detect_fraction = 0.0;
    EXPECT_THROW(run_bench(suite, BlobBackend{}, opts), Error);
}
