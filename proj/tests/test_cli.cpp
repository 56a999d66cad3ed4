#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "clusinit/eval.hpp"
#include "clusinit/io.hpp"

using namespace clusinit;
namespace fs = std::filesystem;

namespace {

const std::string kCli = CLUSINIT_CLI_PATH;

/// Runs the tool in `cwd` with stdout/stderr discarded; returns its exit code.
int run(const std::string& args, const fs::path& cwd, const std::string& env = "") {
    const std::string cmd = "cd '" + cwd.string() + "' && " + env + (env.empty() ? "" : " ") + "'" + kCli + "' " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() / ("clusinit_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    void expect_manifest(const fs::path& out, const std::string& command) {
        ASSERT_TRUE(fs::exists(out / "manifest.json")) << out;
        const json m = read_json(out / "manifest.json");
        EXPECT_TRUE(schema::validate(m, schema::run_manifest()).empty()) << m.dump();
        EXPECT_EQ(m["command"], command);
    }

    /// Separated four-ish-cluster datasets under `d/`.
    void make_datasets(int count) { ASSERT_EQ(run("gen --count " + std::to_string(count) + " --seed 1 --out d --n 20000 --separation 9 --family gaussian_blobs", dir_), 0); }

    fs::path dir_;
};

}  // namespace

TEST_F(Cli, GenWritesDatasetsAndManifest) {
    ASSERT_EQ(run("gen --count 2 --seed 1 --out d", dir_), 0);
    for (const char* ds : {"ds0000", "ds0001"}) {
        EXPECT_TRUE(fs::exists(dir_ / "d" / ds / "points.csv"));
        EXPECT_TRUE(schema::validate(read_json(dir_ / "d" / ds / "meta.json"), schema::dataset_meta()).empty());
    }
    EXPECT_FALSE(fs::exists(dir_ / "d" / "ds0002"));
    expect_manifest(dir_ / "d", "gen");
    EXPECT_EQ(read_json(dir_ / "d" / "manifest.json")["seed"], 1);
}

TEST_F(Cli, GenIsReproducible) {
    ASSERT_EQ(run("gen --count 2 --seed 7 --out a", dir_), 0);
    ASSERT_EQ(run("gen --count 2 --seed 7 --out b", dir_), 0);
    for (const char* ds : {"ds0000", "ds0001"}) EXPECT_EQ(slurp(dir_ / "a" / ds / "points.csv"), slurp(dir_ / "b" / ds / "points.csv"));
}

TEST_F(Cli, OutputRootFromEnvironment) {
    ASSERT_EQ(run("gen --count 1", dir_, "CLUSINIT_OUTPUT_ROOT=root"), 0);
    EXPECT_TRUE(fs::exists(dir_ / "root" / "gen" / "ds0000" / "meta.json"));
    expect_manifest(dir_ / "root" / "gen", "gen");
}

TEST_F(Cli, RasterFramesAndLabels) {
    make_datasets(2);
    ASSERT_EQ(run("raster --in d --out r", dir_), 0);
    for (const char* ds : {"ds0000", "ds0001"}) {
        EXPECT_EQ(slurp(dir_ / "r" / (std::string(ds) + ".pgm")).rfind("P5\n640 640\n255\n", 0), 0u);
        const std::string labels = slurp(dir_ / "r" / (std::string(ds) + ".txt"));
        const int lines = static_cast<int>(std::count(labels.begin(), labels.end(), '\n'));
        EXPECT_EQ(lines, read_json(dir_ / "d" / ds / "meta.json")["k_true"].get<int>());
    }
    expect_manifest(dir_ / "r", "raster");
    ASSERT_EQ(run("raster --in d/ds0000 --out r320 --resolution 320", dir_), 0);
    EXPECT_EQ(slurp(dir_ / "r320" / "ds0000.pgm").rfind("P5\n320 320\n255\n", 0), 0u);
    EXPECT_FALSE(fs::exists(dir_ / "r320" / "ds0001.pgm"));
}

TEST_F(Cli, DetectMatchesMetaAndValidates) {
    make_datasets(4);
    ASSERT_EQ(run("detect --in d --out det", dir_), 0);
    for (int i = 0; i < 4; ++i) {
        const std::string id = "ds000" + std::to_string(i);
        const json j = read_json(dir_ / "det" / (id + ".json"));
        EXPECT_TRUE(schema::validate(j, schema::detection()).empty()) << j.dump();
        EXPECT_EQ(j["k"], read_json(dir_ / "d" / id / "meta.json")["k_true"]) << id;
        EXPECT_EQ(j["backend"], "blob");
    }
    expect_manifest(dir_ / "det", "detect");
}

TEST_F(Cli, DetectWithModelBackend) {
    make_datasets(1);
    const std::string model = std::string(CLUSINIT_FIXTURE_DIR) + "/detectors/peak640_rows.onnx";
    EXPECT_EQ(run("detect --in d --out det --backend model", dir_), 1);
    ASSERT_EQ(run("detect --in d --out det --backend model --model '" + model + "'", dir_), 0);
    const json j = read_json(dir_ / "det" / "ds0000.json");
    EXPECT_EQ(j["backend"], "model");
    EXPECT_EQ(j["k"], read_json(dir_ / "d" / "ds0000" / "meta.json")["k_true"]);
    const std::string bad = std::string(CLUSINIT_FIXTURE_DIR) + "/detectors/truncated.onnx";
    EXPECT_EQ(run("detect --in d --out det2 --backend model --model '" + bad + "'", dir_), 2);
}

TEST_F(Cli, ClusterWithDetectedInitIsExact) {
    make_datasets(1);
    ASSERT_EQ(run("detect --in d --out det", dir_), 0);
    ASSERT_EQ(run("cluster --in d/ds0000 --algo kmeans --init detected --init-file det/ds0000.json --out c", dir_), 0);
    const json j = read_json(dir_ / "c" / "clustering.json");
    EXPECT_TRUE(schema::validate(j, schema::clustering_result()).empty());
    const auto result = clustering_from_json(j);
    const auto ds = read_dataset(dir_ / "d" / "ds0000");
    EXPECT_DOUBLE_EQ(accuracy_rate(ds.labels, result.assignments), 1.0);
    expect_manifest(dir_ / "c", "cluster");

    for (const char* algo : {"xmeans", "rfcm", "gmm"})
        EXPECT_EQ(run(std::string("cluster --in d/ds0000 --algo ") + algo + " --init plusplus --seed 3 --out c_" + algo, dir_), 0) << algo;
}

TEST_F(Cli, UsageErrorsExitWithOne) {
    make_datasets(1);
    EXPECT_EQ(run("", dir_), 1);
    EXPECT_EQ(run("frobnicate", dir_), 1);
    EXPECT_EQ(run("cluster --in d/ds0000 --algo dbscan --init random", dir_), 1);
    EXPECT_EQ(run("cluster --in d/ds0000 --init detected", dir_), 1);
    EXPECT_EQ(run("bench --suite-size 1 --algos nope", dir_), 1);
    EXPECT_EQ(run("detect --in d --conf 1.5", dir_), 1);
    EXPECT_EQ(run("--help", dir_), 0);
}

TEST_F(Cli, RuntimeFailuresExitWithTwo) {
    EXPECT_EQ(run("detect --in missing --out x", dir_), 2);
    fs::create_directories(dir_ / "d");
    write_text(dir_ / "blocker", "not a directory");
    EXPECT_EQ(run("gen --count 1 --out blocker/sub", dir_), 2);
    make_datasets(1);
    write_text(dir_ / "broken.json", "{\"k\": 1}");
    EXPECT_EQ(run("cluster --in d/ds0000 --init detected --init-file broken.json --out c", dir_), 2);
}

TEST_F(Cli, BenchSmokeRun) {
    ASSERT_EQ(run("bench --suite-size 5 --seed 3 --n-min 3000 --n-max 5000 --indices bic,silhouette --index-sample 500 "
                  "--algos kmeans,rfcm --jobs 2 --out b",
                  dir_),
              0);
    const std::string csv = slurp(dir_ / "b" / "bench.csv");
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 6);
    const json summary = read_json(dir_ / "b" / "summary.json");
    EXPECT_TRUE(summary["k_detection_rate"].contains("bic"));
    EXPECT_TRUE(summary["k_detection_rate"].contains("silhouette"));
    EXPECT_TRUE(summary["accuracy"].contains("kmeans"));
    EXPECT_TRUE(summary["iterations"].contains("rfcm"));
    for (const char* key : {"centroid_distance", "time_vs_n", "time_ratio"}) EXPECT_TRUE(summary.contains(key)) << key;
    EXPECT_TRUE(fs::exists(dir_ / "b" / "charts" / "time_vs_n.svg"));
    expect_manifest(dir_ / "b", "bench");
}
