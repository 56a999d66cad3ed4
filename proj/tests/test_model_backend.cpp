#include <gtest/gtest.h>

#include <filesystem>

#include "clusinit/datagen.hpp"
#include "clusinit/model_backend.hpp"

using namespace clusinit;
namespace fs = std::filesystem;

namespace {

const fs::path kDetectors = fs::path(CLUSINIT_FIXTURE_DIR) / "detectors";

Dataset2D four_blobs(std::uint64_t seed) {
    GeneratorConfig cfg;
    cfg.k = 4;
    cfg.n_total = 20000;
    cfg.seed = seed;
    cfg.separation_min = 10.0;
    return generate(cfg);
}

/// Every ground-truth label box holds exactly one detected center and
/// every detection lies in some label box.
void expect_one_per_label(const std::vector<DetectionBox>& boxes, const std::vector<BoxLabel>& labels, int W, int H) {
    std::vector<int> hits(labels.size(), 0);
    for (const auto& b : boxes) {
        const Point2 c = b.center();
        bool inside_any = false;
        for (std::size_t l = 0; l < labels.size(); ++l) {
            const auto& g = labels[l];
            const double x0 = (g.cx - g.w / 2) * W, x1 = (g.cx + g.w / 2) * W;
            const double y0 = (g.cy - g.h / 2) * H, y1 = (g.cy + g.h / 2) * H;
            if (c.x >= x0 && c.x <= x1 && c.y >= y0 && c.y <= y1) {
                ++hits[l];
                inside_any = true;
            }
        }
        EXPECT_TRUE(inside_any);
    }
    for (int h : hits) EXPECT_EQ(h, 1);
}

}  // namespace

TEST(ModelArtifact, LoadsDeclaredSignature) {
    const auto m = ModelArtifact::load(kDetectors / "peak640_rows.onnx");
    EXPECT_EQ(m.channels(), 3);
    EXPECT_EQ(m.height(), 640);
    EXPECT_EQ(m.width(), 640);
    EXPECT_EQ(m.signature(), "float32[1,3,640,640]");
}

TEST(ModelArtifact, BadArtifactsNameTheExpectedSignature) {
    for (const char* name : {"truncated.onnx", "not_a_model.onnx", "bad_input_rank.onnx", "missing.onnx"}) {
        try {
            ModelArtifact::load(kDetectors / name);
            ADD_FAILURE() << name;
        } catch (const Error& e) {
            const std::string msg = e.what();
            EXPECT_EQ(msg.rfind("bad model artifact", 0), 0u) << msg;
            EXPECT_NE(msg.find("[1,C,H,W]"), std::string::npos) << msg;
        }
    }
}

TEST(ModelDetect, HeldOutFourBlobFrame) {
    const ModelArtifact model = ModelArtifact::load(kDetectors / "peak640_rows.onnx");
    for (std::uint64_t seed : {101u, 102u, 103u}) {
        const auto ds = four_blobs(seed);
        const auto frame = rasterize(ds);
        const auto boxes = model_detect(frame, model);
        ASSERT_EQ(boxes.size(), 4u) << "seed " << seed;
        expect_one_per_label(boxes, make_labels(ds, frame), frame.width(), frame.height());
        EXPECT_EQ(boxes_to_init(boxes, frame).k, 4);
    }
}

TEST(ModelDetect, ResizesAndReplicatesForSmallerInputs) {
    const ModelArtifact model = ModelArtifact::load(kDetectors / "peak320_cf.onnx");
    EXPECT_EQ(model.channels(), 1);
    const auto ds = four_blobs(104);
    const auto frame = rasterize(ds);
    const auto boxes = model_detect(frame, model);
    ASSERT_EQ(boxes.size(), 4u);
    expect_one_per_label(boxes, make_labels(ds, frame), frame.width(), frame.height());
    for (const auto& b : boxes) {
        EXPECT_GE(b.x_min, 0.0);
        EXPECT_LE(b.x_max, 640.0);
    }
}

TEST(ModelDetect, ThresholdOneRejectsEverything) {
    const ModelArtifact model = ModelArtifact::load(kDetectors / "peak640_rows.onnx");
    DetectorSettings s;
    s.confidence_threshold = 1.0;
    EXPECT_TRUE(model_detect(rasterize(four_blobs(105)), model, s).empty());
}

TEST(ModelDetect, Deterministic) {
    const ModelBackend backend(kDetectors / "peak640_rows.onnx");
    const auto frame = rasterize(four_blobs(106));
    EXPECT_EQ(backend.detect(frame, {}), backend.detect(frame, {}));
}

TEST(ModelDetect, EmptyFrameGivesNoBoxes) {
    const ModelArtifact model = ModelArtifact::load(kDetectors / "peak640_rows.onnx");
    RasterFrame frame;
    frame.map.width = frame.map.height = 640;
    frame.grid.assign(640 * 640, 0.0);
    EXPECT_TRUE(model_detect(frame, model).empty());
}

TEST(DecodePredictions, RowLayoutMultipliesObjectnessAndClass) {
    // Two candidates, one class: (cx, cy, w, h, obj, cls).
    const auto raw = onnx::Tensor::floats({1, 2, 6}, {10, 20, 4, 8, 0.9f, 0.5f, 30, 30, 2, 2, 0.2f, 1.0f});
    const auto boxes = decode_predictions(raw, std::nullopt, 0.25, 2.0, 2.0, 100, 100);
    ASSERT_EQ(boxes.size(), 1u);
    EXPECT_NEAR(boxes[0].confidence, 0.45, 1e-6);
    EXPECT_DOUBLE_EQ(boxes[0].x_min, 16.0);
    EXPECT_DOUBLE_EQ(boxes[0].y_max, 48.0);
}

TEST(DecodePredictions, ChannelsFirstLayoutUsesBestClass) {
    // Three candidates, two classes, stored feature-major.
    const auto raw = onnx::Tensor::floats({1, 6, 3}, {5, 50, 95,  5, 50, 95,  4, 4, 20,  4, 4, 20,
                                                      0.1f, 0.6f, 0.3f,  0.2f, 0.1f, 0.9f});
    const auto boxes = decode_predictions(raw, HeadLayout::ChannelsFirst, 0.25, 1.0, 1.0, 100, 100);
    ASSERT_EQ(boxes.size(), 2u);
    EXPECT_NEAR(boxes[0].confidence, 0.6, 1e-6);
    EXPECT_NEAR(boxes[1].confidence, 0.9, 1e-6);
    EXPECT_DOUBLE_EQ(boxes[1].x_max, 100.0);  // clamped to the frame
}

TEST(DecodePredictions, RejectsUnusableShapes) {
    EXPECT_THROW(decode_predictions(onnx::Tensor::floats({1, 3, 4}), std::nullopt, 0.25, 1, 1, 10, 10), Error);
    EXPECT_THROW(decode_predictions(onnx::Tensor::floats({2, 3, 6}), std::nullopt, 0.25, 1, 1, 10, 10), Error);
}

TEST(ResizeBilinear, IdentityAndConstant) {
    std::vector<double> g{1, 2, 3, 4};
    const auto same = resize_bilinear(g, 2, 2, 2, 2);
    EXPECT_EQ(same, (std::vector<float>{1, 2, 3, 4}));
    const auto flat = resize_bilinear(std::vector<double>(16, 0.5), 4, 4, 3, 7);
    for (float v : flat) EXPECT_FLOAT_EQ(v, 0.5f);
}
