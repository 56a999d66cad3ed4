#include <gtest/gtest.h>

#include <random>

#include "clusinit/datagen.hpp"
#include "clusinit/detector.hpp"
#include "clusinit/eval.hpp"
#include "oracles.hpp"

using namespace clusinit;

namespace {

Dataset2D blobs(int k, int n, std::uint64_t seed, double sep) {
    GeneratorConfig cfg;
    cfg.k = k;
    cfg.n_total = n;
    cfg.seed = seed;
    cfg.separation_min = sep;
    return generate(cfg);
}

std::vector<DetectionBox> random_boxes(std::mt19937_64& rng, int count) {
    std::uniform_real_distribution<double> pos(0, 100), size(5, 40);
    std::uniform_int_distribution<int> conf(0, 9);  // coarse so ties happen
    std::vector<DetectionBox> boxes;
    for (int i = 0; i < count; ++i) {
        const double x = pos(rng), y = pos(rng);
        boxes.push_back({x, y, x + size(rng), y + size(rng), conf(rng) / 10.0});
    }
    return boxes;
}

}  // namespace

TEST(Nms, DuplicateRemoved) {
    const auto kept = nms({{0, 0, 10, 10, 0.8}, {0, 0, 10, 10, 0.9}}, 0.45);
    ASSERT_EQ(kept.size(), 1u);
    EXPECT_EQ(kept[0].confidence, 0.9);
}

TEST(Nms, DisjointBoxesKept) {
    EXPECT_EQ(nms({{0, 0, 10, 10, 0.8}, {20, 20, 30, 30, 0.9}}, 0.45).size(), 2u);
}

TEST(Nms, MatchesReferenceAndInvariants) {
    std::mt19937_64 rng(10);
    for (int trial = 0; trial < 300; ++trial) {
        const auto boxes = random_boxes(rng, 10);
        const double thr = std::uniform_real_distribution<double>(0.1, 0.9)(rng);
        const auto kept = nms(boxes, thr);
        std::vector<oracle::Box> ref_in;
        for (const auto& b : boxes) ref_in.push_back({b.x_min, b.y_min, b.x_max, b.y_max, b.confidence});
        const auto ref = oracle::nms(ref_in, thr);
        ASSERT_EQ(kept.size(), ref.size());
        for (std::size_t i = 0; i < kept.size(); ++i) {
            EXPECT_EQ(kept[i].x_min, ref[i].x0);
            EXPECT_EQ(kept[i].y_min, ref[i].y0);
            EXPECT_EQ(kept[i].confidence, ref[i].conf);
            EXPECT_NE(std::find(boxes.begin(), boxes.end(), kept[i]), boxes.end());
            for (std::size_t j = i + 1; j < kept.size(); ++j) EXPECT_LE(iou(kept[i], kept[j]), thr);
            if (i > 0) EXPECT_GE(kept[i - 1].confidence, kept[i].confidence);
        }
    }
}

TEST(BlobDetect, TwoFarBlobsGiveTwoBoxesAroundCenters) {
    const auto ds = blobs(2, 20000, 1, 12.0);
    const auto frame = rasterize(ds);
    const auto boxes = density_blob_detect(frame);
    ASSERT_EQ(boxes.size(), 2u);
    for (const auto& c : ds.centroids_true) {
        const Point2 px = frame.map.to_pixel(c);
        const int hits = static_cast<int>(std::count_if(boxes.begin(), boxes.end(), [&](const DetectionBox& b) {
            return px.x >= b.x_min && px.x <= b.x_max && px.y >= b.y_min && px.y <= b.y_max;
        }));
        EXPECT_EQ(hits, 1);
    }
}

TEST(BlobDetect, EmptyFrameGivesNothing) {
    RasterFrame frame;
    frame.map.width = frame.map.height = 64;
    frame.grid.assign(64 * 64, 0.0);
    EXPECT_TRUE(density_blob_detect(frame).empty());
}

TEST(BlobDetect, UniformDataIsOneRegion) {
    GeneratorConfig cfg;
    cfg.shape_family = ShapeFamily::NoStructure;
    cfg.n_total = 30000;
    cfg.seed = 2;
    const auto ds = generate(cfg);
    const auto frame = rasterize(ds);
    const auto boxes = density_blob_detect(frame);
    ASSERT_EQ(boxes.size(), 1u);
    // The occupied region spans 1/1.1 of the frame on each axis.
    const double occupied = 640.0 / 1.1;
    EXPECT_GT(boxes[0].x_max - boxes[0].x_min, 0.97 * occupied);
    EXPECT_GT(boxes[0].y_max - boxes[0].y_min, 0.97 * occupied);
}

TEST(BlobDetect, InvalidSettingsRejected) {
    DetectorSettings s;
    s.density_threshold_frac = 1.5;
    EXPECT_THROW(s.validate(), Error);
}

TEST(BoxesToInit, SingleBinCentroid) {
    RasterFrame frame;
    frame.map = AffineMap{2.0, 4.0, 10.0, -20.0, 640, 640};
    frame.grid.assign(640 * 640, 0.0);
    frame.grid[320 * 640 + 320] = 1.0;
    frame.total_points = 7;
    const auto params = boxes_to_init({{320, 320, 321, 321, 0.9}}, frame);
    ASSERT_EQ(params.k, 1);
    const Point2 want = to_data_space({320.5, 320.5}, frame.map);
    EXPECT_DOUBLE_EQ(params.centroids[0].x, want.x);
    EXPECT_DOUBLE_EQ(params.centroids[0].y, want.y);
    EXPECT_DOUBLE_EQ(params.size_estimates[0], 7.0);
    EXPECT_DOUBLE_EQ(params.confidences[0], 0.9);
}

TEST(BoxesToInit, EmptyBoxesGiveZeroK) {
    RasterFrame frame;
    frame.grid.assign(1, 1.0);
    EXPECT_EQ(boxes_to_init({}, frame).k, 0);
}

TEST(BoxesToInit, SeparatedCentroidsNearTruth) {
    const auto ds = blobs(3, 30000, 3, 10.0);
    const auto frame = rasterize(ds);
    const auto params = boxes_to_init(density_blob_detect(frame), frame);
    ASSERT_EQ(params.k, 3);
    const Bounds2 b = bounds_of(ds.points);
    const double range = std::max(b.width(), b.height());
    const auto match = match_centroids(ds.centroids_true, params.centroids);
    EXPECT_LE(match.max_distance, 0.02 * range);
}

TEST(BoxesToInit, TwinBlobSizes) {
    const auto ds = blobs(2, 20000, 4, 12.0);
    const auto frame = rasterize(ds);
    const auto params = boxes_to_init(density_blob_detect(frame), frame);
    ASSERT_EQ(params.k, 2);
    for (double s : params.size_estimates) EXPECT_NEAR(s, 10000.0, 500.0);
    double total = 0;
    for (double s : params.size_estimates) total += s;
    EXPECT_LE(total, 1.05 * 20000);
}

TEST(BoxesToInit, OverlappingBoxesDoNotDoubleCount) {
    RasterFrame frame;
    frame.map.width = frame.map.height = 10;
    frame.grid.assign(100, 1.0);
    frame.total_points = 100;
    const auto params = boxes_to_init({{0, 0, 10, 10, 0.9}, {0, 0, 5, 5, 0.5}}, frame);
    EXPECT_DOUBLE_EQ(params.size_estimates[0] + params.size_estimates[1], 100.0);
}

TEST(BlobDetect, TranslationEquivariance) {
    auto ds = blobs(4, 20000, 5, 10.0);
    const auto frame = rasterize(ds);
    const auto boxes = density_blob_detect(frame);
    const Point2 shift{137.25, -42.5};
    auto moved = ds.points;
    for (auto& p : moved) p = p + shift;
    const auto frame2 = rasterize(moved);
    const auto boxes2 = density_blob_detect(frame2);
    ASSERT_EQ(boxes.size(), boxes2.size());
    for (std::size_t i = 0; i < boxes.size(); ++i) EXPECT_EQ(boxes[i], boxes2[i]);
    const auto a = boxes_to_init(boxes, frame), b = boxes_to_init(boxes2, frame2);
    ASSERT_EQ(a.k, b.k);
    for (std::size_t i = 0; i < a.centroids.size(); ++i) {
        EXPECT_LT(std::abs(b.centroids[i].x - a.centroids[i].x - shift.x), frame.map.bin_width_x());
        EXPECT_LT(std::abs(b.centroids[i].y - a.centroids[i].y - shift.y), frame.map.bin_width_y());
    }
}

TEST(DropNested, InnerBoxRemovedPartialOverlapKept) {
    const std::vector<DetectionBox> boxes{{0, 0, 100, 100, 0.5}, {10, 10, 30, 30, 0.9}, {90, 90, 130, 130, 0.8}};
    const auto kept = drop_nested(boxes, 0.9);
    ASSERT_EQ(kept.size(), 2u);
    EXPECT_EQ(kept[0], boxes[0]);
    EXPECT_EQ(kept[1], boxes[2]);
    // Identical boxes are never strictly larger than each other.
    EXPECT_EQ(drop_nested({boxes[1], boxes[1]}, 0.9).size(), 2u);
}

TEST(BlobDetect, SparseUniformDataIsOneRegion) {
    GeneratorConfig cfg;
    cfg.shape_family = ShapeFamily::NoStructure;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        cfg.seed = seed;
        cfg.n_total = 5000;
        EXPECT_EQ(density_blob_detect(rasterize(generate(cfg))).size(), 1u) << seed;
    }
}
