// clusinit: generate datasets, rasterize them, detect cluster regions,
// cluster with detected or classical initialization, and run the benchmark.
//
// Exit codes: 0 success, 1 usage error, 2 runtime failure.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>

#include "clusinit/bench.hpp"
#include "clusinit/clustering.hpp"
#include "clusinit/datagen.hpp"
#include "clusinit/detector.hpp"
#include "clusinit/io.hpp"
#include "clusinit/model_backend.hpp"
#include "clusinit/raster.hpp"

using namespace clusinit;
namespace fs = std::filesystem;

namespace {

constexpr int kUsageError = 1;
constexpr int kRuntimeError = 2;
constexpr const char* kOutputRootEnv = "CLUSINIT_OUTPUT_ROOT";

/// Raised for flag combinations CLI11 cannot check on its own.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

fs::path output_dir(const std::string& flag, const std::string& command) {
    if (!flag.empty()) return flag;
    const char* root = std::getenv(kOutputRootEnv);
    return fs::path(root && *root ? root : "clusinit_out") / command;
}

void write_manifest(const fs::path& dir, const std::string& command, const json& parameters, std::uint64_t seed) {
    const json manifest = run_manifest_json(command, parameters, seed);
    schema::require_valid(manifest, schema::run_manifest());
    write_json(dir / "manifest.json", manifest);
}

/// A dataset directory itself, or every dataset directory directly below it.
std::vector<fs::path> dataset_dirs(const fs::path& in) {
    if (fs::exists(in / "meta.json")) return {in};
    if (!fs::is_directory(in)) throw Error("no dataset at " + in.string());
    std::vector<fs::path> dirs;
    for (const auto& entry : fs::directory_iterator(in))
        if (entry.is_directory() && fs::exists(entry.path() / "meta.json")) dirs.push_back(entry.path());
    std::sort(dirs.begin(), dirs.end());
    if (dirs.empty()) throw Error("no dataset directories under " + in.string());
    return dirs;
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(s);
    while (std::getline(in, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

struct DetectorFlags {
    std::string backend = "blob";
    std::string model;
    DetectorSettings settings;

    void add_to(CLI::App& cmd) {
        cmd.add_option("--backend", backend, "Detector backend")->check(CLI::IsMember({"blob", "model"}))->capture_default_str();
        cmd.add_option("--model", model, "Detection model file (required for --backend model)");
        cmd.add_option("--conf", settings.confidence_threshold, "Confidence threshold")->capture_default_str();
        cmd.add_option("--iou", settings.nms_iou_threshold, "NMS IoU threshold")->capture_default_str();
        cmd.add_option("--sigma", settings.smoothing_sigma_px, "Blob backend smoothing sigma (pixels)")->capture_default_str();
        cmd.add_option("--density-frac", settings.density_threshold_frac, "Blob backend threshold, share of peak")->capture_default_str();
        cmd.add_option("--min-area", settings.min_box_area_px, "Blob backend minimum box area (pixels)")->capture_default_str();
        cmd.add_option("--min-mass-frac", settings.min_mass_frac, "Blob backend minimum component mass share")->capture_default_str();
    }

    std::unique_ptr<DetectorBackend> make() const {
        if (backend == "model") {
            if (model.empty()) throw UsageError("--backend model requires --model PATH");
            return std::make_unique<ModelBackend>(fs::path(model));
        }
        return std::make_unique<BlobBackend>();
    }

    void check() const {
        try {
            settings.validate();
        } catch (const Error& e) {
            throw UsageError(e.what());
        }
        if (backend == "model" && model.empty()) throw UsageError("--backend model requires --model PATH");
    }

    [[nodiscard]] json parameters() const {
        return {{"backend", backend},
                {"model", model},
                {"conf", settings.confidence_threshold},
                {"iou", settings.nms_iou_threshold},
                {"sigma", settings.smoothing_sigma_px},
                {"density_frac", settings.density_threshold_frac},
                {"min_area", settings.min_box_area_px},
                {"min_mass_frac", settings.min_mass_frac}};
    }
};

// ---- gen -----------------------------------------------------------------

struct GenFlags {
    std::size_t count = 1;
    std::uint64_t seed = 0;
    std::string out;
    std::string family;
    int k = 0;
    int n = 0;
    double separation = -1.0;
    std::string balance;
    double noise = -1.0;
    double sigma_lo = 1.0, sigma_hi = 2.0;
};

int cmd_gen(const GenFlags& f) {
    std::optional<ShapeFamily> family;
    if (!f.family.empty() && !(family = parse_shape_family(f.family))) throw UsageError("unknown family " + f.family);
    std::optional<Balance> balance;
    if (!f.balance.empty() && !(balance = parse_balance(f.balance))) throw UsageError("unknown balance " + f.balance);
    const fs::path dir = output_dir(f.out, "gen");
    SuiteSpec spec;
    spec.variance_range = {f.sigma_lo, f.sigma_hi};
    for (std::size_t i = 0; i < f.count; ++i) {
        GeneratorConfig cfg = suite_config(spec, f.seed, i);
        if (family) cfg.shape_family = *family;
        if (f.k > 0) cfg.k = f.k;
        if (f.n > 0) cfg.n_total = f.n;
        if (f.separation >= 0.0) cfg.separation_min = f.separation;
        if (balance) cfg.balance = *balance;
        if (f.noise >= 0.0) cfg.noise_level = f.noise;
        write_dataset(dir / dataset_id(i), generate(cfg));
    }
    write_manifest(dir, "gen",
                   {{"count", f.count}, {"family", f.family}, {"k", f.k}, {"n", f.n}, {"separation", f.separation},
                    {"balance", f.balance}, {"noise", f.noise}, {"sigma_range", {f.sigma_lo, f.sigma_hi}}, {"out", dir.string()}},
                   f.seed);
    std::cout << "wrote " << f.count << " dataset(s) to " << dir.string() << "\n";
    return 0;
}

// ---- raster --------------------------------------------------------------

struct RasterFlags {
    std::string in;
    std::string out;
    int resolution = 640;
    double coverage = 0.995;
};

int cmd_raster(const RasterFlags& f) {
    if (f.resolution < 8) throw UsageError("--resolution must be at least 8");
    const fs::path dir = output_dir(f.out, "raster");
    fs::create_directories(dir);
    const auto inputs = dataset_dirs(f.in);
    for (const auto& ds_dir : inputs) {
        const Dataset2D ds = read_dataset(ds_dir);
        const RasterFrame frame = rasterize(ds, f.resolution);
        const std::string stem = ds_dir.filename().string();
        std::ofstream pgm(dir / (stem + ".pgm"), std::ios::binary);
        write_pgm(pgm, frame);
        std::ofstream txt(dir / (stem + ".txt"));
        write_labels(txt, make_labels(ds, frame, f.coverage));
        if (!pgm || !txt) throw Error("cannot write frame " + stem + " under " + dir.string());
    }
    write_manifest(dir, "raster", {{"in", f.in}, {"resolution", f.resolution}, {"coverage", f.coverage}, {"out", dir.string()}}, 0);
    std::cout << "rasterized " << inputs.size() << " dataset(s) to " << dir.string() << "\n";
    return 0;
}

// ---- detect --------------------------------------------------------------

struct DetectFlags {
    std::string in;
    std::string out;
    int resolution = 640;
    DetectorFlags detector;
};

int cmd_detect(const DetectFlags& f) {
    f.detector.check();
    const auto backend = f.detector.make();
    const fs::path dir = output_dir(f.out, "detect");
    fs::create_directories(dir);
    const auto inputs = dataset_dirs(f.in);
    int matched = 0;
    for (const auto& ds_dir : inputs) {
        const Dataset2D ds = read_dataset(ds_dir);
        const RasterFrame frame = rasterize(ds, f.resolution);
        const auto boxes = backend->detect(frame, f.detector.settings);
        const InitParams params = boxes_to_init(boxes, frame);
        json j = detection_json(boxes, params);
        j["dataset_id"] = ds_dir.filename().string();
        j["backend"] = backend->name();
        schema::require_valid(j, schema::detection());
        write_json(dir / (ds_dir.filename().string() + ".json"), j);
        matched += params.k == ds.k_true;
    }
    json params = f.detector.parameters();
    params["in"] = f.in;
    params["resolution"] = f.resolution;
    params["out"] = dir.string();
    write_manifest(dir, "detect", params, 0);
    std::cout << "k matched meta.json in " << matched << " of " << inputs.size() << " dataset(s)\n";
    return 0;
}

// ---- cluster -------------------------------------------------------------

struct ClusterFlags {
    std::string in;
    std::string out;
    std::string algo = "kmeans";
    std::string init = "detected";
    std::string init_file;
    int k = 0;
    int k_max = 20;
    std::uint64_t seed = 0;
    int max_iter = 300;
};

int cmd_cluster(const ClusterFlags& f) {
    if (f.init == "detected" && f.init_file.empty()) throw UsageError("--init detected requires --init-file PATH");
    const Dataset2D ds = read_dataset(f.in);
    const Algo algo = *parse_algo(f.algo);
    const int k = f.k > 0 ? f.k : ds.k_true;
    InitSpec init;
    if (f.init == "detected") init = DetectedInit{init_params_from_json(read_json(f.init_file))};
    else if (f.init == "random") init = RandomInit{k, f.seed};
    else init = PlusPlusInit{k, f.seed};

    const auto result = bench_detail::run_algo(algo, ds.points, init, f.k_max, f.seed, f.max_iter);
    const fs::path dir = output_dir(f.out, "cluster");
    json j = clustering_json(result);
    j["algorithm"] = f.algo;
    j["init"] = f.init;
    schema::require_valid(j, schema::clustering_result());
    write_json(dir / "clustering.json", j);
    write_manifest(dir, "cluster",
                   {{"in", f.in}, {"algo", f.algo}, {"init", f.init}, {"init_file", f.init_file}, {"k", k}, {"k_max", f.k_max},
                    {"max_iter", f.max_iter}, {"out", dir.string()}},
                   f.seed);
    std::cout << f.algo << ": k=" << result.k() << " iterations=" << result.iterations
              << " accuracy=" << accuracy_rate(ds.labels, result.assignments) << "\n";
    return 0;
}

// ---- bench ---------------------------------------------------------------

struct BenchFlags {
    std::size_t suite_size = 100;
    std::uint64_t seed = 0;
    std::string out;
    std::string indices = "bic,aic,dunn,davies_bouldin,silhouette,calinski_harabasz,gap";
    std::string algos = "kmeans";
    std::string families;
    int k_min = 2, k_max_true = 12;
    int n_min = 20000, n_max = 50000;
    double sep_min = 6.0, sep_max = 10.0;
    int k_max = 12;
    int jobs = 1;
    std::size_t index_sample = 2000;
    double detect_fraction = 1.0;
    int resolution = 640;
    DetectorFlags detector;
};

int cmd_bench(const BenchFlags& f) {
    f.detector.check();
    BenchOptions opts;
    opts.algorithms.clear();
    for (const auto& name : split_list(f.algos)) {
        const auto a = parse_algo(name);
        if (!a) throw UsageError("unknown algorithm " + name);
        opts.algorithms.push_back(*a);
    }
    opts.indices.clear();
    for (const auto& name : split_list(f.indices)) {
        const auto kind = parse_index_kind(name);
        if (!kind) throw UsageError("unknown index " + name);
        opts.indices.push_back(*kind);
    }
    SuiteSpec spec;
    if (!f.families.empty()) {
        spec.family_mix.clear();
        for (const auto& name : split_list(f.families)) {
            const auto fam = parse_shape_family(name);
            if (!fam) throw UsageError("unknown family " + name);
            spec.family_mix.emplace_back(*fam, 1.0);
        }
    }
    if (f.k_min < 1 || f.k_min > f.k_max_true || f.n_min < 1 || f.n_min > f.n_max || f.sep_min > f.sep_max)
        throw UsageError("inconsistent suite ranges");
    if (!(f.detect_fraction > 0.0 && f.detect_fraction <= 1.0)) throw UsageError("--detect-fraction must lie in (0, 1]");
    spec.k_range = {f.k_min, f.k_max_true};
    spec.n_range = {f.n_min, f.n_max};
    spec.separation_range = {f.sep_min, f.sep_max};
    opts.seed = f.seed;
    opts.k_max = f.k_max;
    opts.jobs = f.jobs;
    opts.index_sample_max = f.index_sample;
    opts.detect_fraction = f.detect_fraction;
    opts.resolution = f.resolution;
    opts.settings = f.detector.settings;
    const auto backend = f.detector.make();

    // A configuration that cannot be generated becomes an empty dataset, so
    // its record carries the failure instead of aborting the run.
    std::vector<Dataset2D> suite;
    for (std::size_t i = 0; i < f.suite_size; ++i) {
        const auto cfg = suite_config(spec, f.seed, i);
        try {
            suite.push_back(generate(cfg));
        } catch (const Error&) {
            Dataset2D failed;
            failed.config = cfg;
            failed.k_true = cfg.k;
            suite.push_back(std::move(failed));
        }
    }
    const auto records = run_bench(suite, *backend, opts);
    const fs::path dir = output_dir(f.out, "bench");
    write_bench_outputs(dir, records, opts);
    json params = f.detector.parameters();
    params.update({{"suite_size", f.suite_size}, {"indices", f.indices}, {"algos", f.algos}, {"families", f.families},
                   {"k_range", {f.k_min, f.k_max_true}}, {"n_range", {f.n_min, f.n_max}}, {"separation_range", {f.sep_min, f.sep_max}},
                   {"k_max", f.k_max}, {"jobs", f.jobs}, {"index_sample", f.index_sample}, {"detect_fraction", f.detect_fraction},
                   {"resolution", f.resolution}, {"out", dir.string()}});
    write_manifest(dir, "bench", params, f.seed);
    const json summary = bench_summary(records, opts);
    std::cout << "bench: " << records.size() << " dataset(s), " << summary["failed"] << " failed, k-detection rate "
              << summary["k_detection_rate"]["detector"] << "; outputs in " << dir.string() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Cluster initialization from rasterized 2D data"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kToolVersion);

    GenFlags gen;
    auto* gen_cmd = app.add_subcommand("gen", "Generate seeded synthetic datasets");
    gen_cmd->add_option("--count", gen.count, "Number of datasets")->check(CLI::PositiveNumber)->capture_default_str();
    gen_cmd->add_option("--seed", gen.seed, "Master seed")->capture_default_str();
    gen_cmd->add_option("--out", gen.out, std::string("Output directory (default $") + kOutputRootEnv + "/gen)");
    gen_cmd->add_option("--family", gen.family, "Shape family for every dataset");
    gen_cmd->add_option("--k", gen.k, "Cluster count for every dataset")->check(CLI::PositiveNumber);
    gen_cmd->add_option("--n", gen.n, "Point count for every dataset")->check(CLI::PositiveNumber);
    gen_cmd->add_option("--separation", gen.separation, "Minimum centroid separation in std-devs")->check(CLI::NonNegativeNumber);
    gen_cmd->add_option("--balance", gen.balance, "equal or random_proportions");
    gen_cmd->add_option("--noise", gen.noise, "Noise level for moons and circles")->check(CLI::Range(0.0, 1.0));
    gen_cmd->add_option("--sigma-min", gen.sigma_lo, "Smallest cluster std-dev")->check(CLI::PositiveNumber)->capture_default_str();
    gen_cmd->add_option("--sigma-max", gen.sigma_hi, "Largest cluster std-dev")->check(CLI::PositiveNumber)->capture_default_str();

    RasterFlags raster;
    auto* raster_cmd = app.add_subcommand("raster", "Rasterize datasets to PGM frames and label files");
    raster_cmd->add_option("--in", raster.in, "Dataset directory or a directory of datasets")->required();
    raster_cmd->add_option("--out", raster.out, "Output directory");
    raster_cmd->add_option("--resolution", raster.resolution, "Frame width and height in pixels")->capture_default_str();
    raster_cmd->add_option("--coverage", raster.coverage, "Share of a cluster's points its label box covers")
        ->check(CLI::Range(0.5, 1.0))
        ->capture_default_str();

    DetectFlags detect;
    auto* detect_cmd = app.add_subcommand("detect", "Detect cluster regions and write initialization parameters");
    detect_cmd->add_option("--in", detect.in, "Dataset directory or a directory of datasets")->required();
    detect_cmd->add_option("--out", detect.out, "Output directory");
    detect_cmd->add_option("--resolution", detect.resolution, "Frame width and height in pixels")->capture_default_str();
    detect.detector.add_to(*detect_cmd);

    ClusterFlags cluster;
    auto* cluster_cmd = app.add_subcommand("cluster", "Cluster one dataset");
    cluster_cmd->add_option("--in", cluster.in, "Dataset directory")->required();
    cluster_cmd->add_option("--out", cluster.out, "Output directory");
    cluster_cmd->add_option("--algo", cluster.algo, "Algorithm")->check(CLI::IsMember({"kmeans", "xmeans", "rfcm", "gmm"}))->capture_default_str();
    cluster_cmd->add_option("--init", cluster.init, "Initialization")->check(CLI::IsMember({"detected", "random", "plusplus"}))->capture_default_str();
    cluster_cmd->add_option("--init-file", cluster.init_file, "Detection JSON written by `detect`");
    cluster_cmd->add_option("--k", cluster.k, "Cluster count for random/plusplus (default: k_true)")->check(CLI::PositiveNumber);
    cluster_cmd->add_option("--k-max", cluster.k_max, "Upper bound for x-means")->check(CLI::PositiveNumber)->capture_default_str();
    cluster_cmd->add_option("--seed", cluster.seed, "Seed")->capture_default_str();
    cluster_cmd->add_option("--max-iter", cluster.max_iter, "Iteration cap")->check(CLI::PositiveNumber)->capture_default_str();

    BenchFlags bench;
    auto* bench_cmd = app.add_subcommand("bench", "Run the benchmark harness");
    bench_cmd->add_option("--suite-size", bench.suite_size, "Datasets in the suite")->check(CLI::PositiveNumber)->capture_default_str();
    bench_cmd->add_option("--seed", bench.seed, "Master seed")->capture_default_str();
    bench_cmd->add_option("--out", bench.out, "Output directory");
    bench_cmd->add_option("--indices", bench.indices, "Comma-separated validity indices (empty for none)")->capture_default_str();
    bench_cmd->add_option("--algos", bench.algos, "Comma-separated algorithms")->capture_default_str();
    bench_cmd->add_option("--families", bench.families, "Comma-separated shape families (default: all)");
    bench_cmd->add_option("--k-min", bench.k_min, "Smallest generated k")->capture_default_str();
    bench_cmd->add_option("--k-max-true", bench.k_max_true, "Largest generated k")->capture_default_str();
    bench_cmd->add_option("--n-min", bench.n_min, "Smallest generated point count")->capture_default_str();
    bench_cmd->add_option("--n-max", bench.n_max, "Largest generated point count")->capture_default_str();
    bench_cmd->add_option("--separation-min", bench.sep_min, "Smallest centroid separation")->capture_default_str();
    bench_cmd->add_option("--separation-max", bench.sep_max, "Largest centroid separation")->capture_default_str();
    bench_cmd->add_option("--k-max", bench.k_max, "Upper k of the index sweep")->check(CLI::Range(2, 1000))->capture_default_str();
    bench_cmd->add_option("--jobs", bench.jobs, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();
    bench_cmd->add_option("--index-sample", bench.index_sample, "Points per index sweep (0 = all)")->capture_default_str();
    bench_cmd->add_option("--detect-fraction", bench.detect_fraction, "Share of points the detector sees")->capture_default_str();
    bench_cmd->add_option("--resolution", bench.resolution, "Frame width and height in pixels")->capture_default_str();
    bench.detector.add_to(*bench_cmd);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kUsageError;
    }

    try {
        if (*gen_cmd) return cmd_gen(gen);
        if (*raster_cmd) return cmd_raster(raster);
        if (*detect_cmd) return cmd_detect(detect);
        if (*cluster_cmd) return cmd_cluster(cluster);
        if (*bench_cmd) return cmd_bench(bench);
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kUsageError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kRuntimeError;
    }
    return kUsageError;
}
