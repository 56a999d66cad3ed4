#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "clusinit/onnx/session.hpp"

using namespace clusinit;
using namespace clusinit::onnx;
namespace fs = std::filesystem;

namespace {

const fs::path kFixtures = CLUSINIT_FIXTURE_DIR;

void expect_close(const Tensor& got, const Tensor& want, const std::string& what) {
    ASSERT_EQ(got.shape, want.shape) << what;
    ASSERT_EQ(got.is_float(), want.is_float()) << what;
    for (std::int64_t k = 0; k < want.size(); ++k) {
        const double g = got.value(static_cast<std::size_t>(k)), w = want.value(static_cast<std::size_t>(k));
        ASSERT_NEAR(g, w, 1e-4 + 1e-4 * std::abs(w)) << what << " element " << k;
    }
}

std::vector<std::string> op_fixture_names() {
    std::vector<std::string> names;
    for (const auto& entry : fs::directory_iterator(kFixtures / "ops")) names.push_back(entry.path().filename().string());
    std::sort(names.begin(), names.end());
    return names;
}

/// Three Gaussian bumps on a 640x640 frame, replicated over 3 channels and
/// normalized by the maximum; mirrors the fixture script's float handling.
Tensor three_bump_frame() {
    std::vector<float> plane(640 * 640, 0.0f);
    const double bumps[3][3] = {{150, 160, 25}, {470, 200, 30}, {320, 500, 20}};
    for (const auto& b : bumps)
        for (int y = 0; y < 640; ++y)
            for (int x = 0; x < 640; ++x)
                plane[static_cast<std::size_t>(y * 640 + x)] +=
                    static_cast<float>(std::exp(-0.5 * ((x - b[0]) * (x - b[0]) + (y - b[1]) * (y - b[1])) / (b[2] * b[2])));
    const float peak = *std::max_element(plane.begin(), plane.end());
    for (float& v : plane) v /= peak;
    std::vector<float> data;
    for (int c = 0; c < 3; ++c) data.insert(data.end(), plane.begin(), plane.end());
    return Tensor::floats({1, 3, 640, 640}, std::move(data));
}

}  // namespace

TEST(Wire, VarintsAndTags) {
    const std::vector<std::uint8_t> bytes{0x96, 0x01, 0x08, 0xac, 0x02, 0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 0x01};
    WireReader r(bytes);
    EXPECT_EQ(r.varint(), 150u);
    EXPECT_EQ(r.tag(), (std::pair<int, int>{1, 0}));
    EXPECT_EQ(r.varint(), 300u);
    EXPECT_EQ(static_cast<std::int64_t>(r.varint()), -1);
    EXPECT_TRUE(r.done());
}

TEST(Wire, TruncatedInputThrows) {
    const std::vector<std::uint8_t> bytes{0x0a, 0x05, 'a', 'b'};
    WireReader r(bytes);
    r.tag();
    EXPECT_THROW(r.bytes(), Error);
    const std::vector<std::uint8_t> dangling{0x80};
    EXPECT_THROW(WireReader(dangling).varint(), Error);
}

TEST(Wire, HalfPrecision) {
    EXPECT_EQ(half_to_float(0x3c00), 1.0f);
    EXPECT_EQ(half_to_float(0xc000), -2.0f);
    EXPECT_EQ(half_to_float(0x3555), 0.333251953125f);
    EXPECT_EQ(half_to_float(0x0001), std::ldexp(1.0f, -24));
    EXPECT_TRUE(std::isinf(half_to_float(0x7c00)));
}

class OperatorFixture : public ::testing::TestWithParam<std::string> {};

TEST_P(OperatorFixture, MatchesReferenceRuntime) {
    const fs::path dir = kFixtures / "ops" / GetParam();
    const Session session = Session::load(dir / "model.onnx");
    std::map<std::string, Tensor> feeds;
    for (int k = 0; fs::exists(dir / ("input_" + std::to_string(k) + ".pb")); ++k) {
        auto nt = load_tensor(dir / ("input_" + std::to_string(k) + ".pb"));
        feeds[nt.name] = std::move(nt.tensor);
    }
    const auto outputs = session.run(feeds);
    int checked = 0;
    for (int k = 0; fs::exists(dir / ("output_" + std::to_string(k) + ".pb")); ++k) {
        const auto want = load_tensor(dir / ("output_" + std::to_string(k) + ".pb"));
        ASSERT_TRUE(outputs.contains(want.name)) << want.name;
        expect_close(outputs.at(want.name), want.tensor, GetParam() + "/" + want.name);
        ++checked;
    }
    EXPECT_GT(checked, 0);
}

INSTANTIATE_TEST_SUITE_P(Fixtures, OperatorFixture, ::testing::ValuesIn(op_fixture_names()),
                         [](const auto& info) { return info.param; });

TEST(Session, PeakDetectorMatchesReference) {
    const Session session = Session::load(kFixtures / "detectors" / "peak640_rows.onnx");
    const Tensor out = session.run_single(three_bump_frame());
    const auto want = load_tensor(kFixtures / "detectors" / "peak640_output.pb").tensor;
    ASSERT_EQ(out.shape, want.shape);
    // Peak flags depend on exact ties between the blur and its max-pool, so
    // compare the confident rows and the row layout.
    int confident = 0;
    for (std::int64_t r = 0; r < want.shape[1]; ++r) {
        for (std::int64_t c = 0; c < 6; ++c) {
            const auto k = static_cast<std::size_t>(r * 6 + c);
            EXPECT_NEAR(out.f[k], want.f[k], 1e-3) << "row " << r << " col " << c;
        }
        confident += want.f[static_cast<std::size_t>(r * 6 + 4)] > 0.25f;
    }
    EXPECT_EQ(confident, 3);
}

TEST(Session, RejectsWrongFeedShape) {
    const Session session = Session::load(kFixtures / "ops" / "conv_basic" / "model.onnx");
    EXPECT_THROW(session.run_single(Tensor::floats({1, 3, 4, 4})), Error);
    EXPECT_THROW(session.run({}), Error);
}

TEST(Session, UnreadableFilesThrow) {
    EXPECT_THROW(Session::load(kFixtures / "detectors" / "truncated.onnx"), Error);
    EXPECT_THROW(Session::load(kFixtures / "detectors" / "not_a_model.onnx"), Error);
    EXPECT_THROW(Session::load(kFixtures / "does_not_exist.onnx"), Error);
}

TEST(Session, UnsupportedOperatorIsReported) {
    Model m;
    m.opset = 17;
    Node n;
    n.op_type = "NonMaxSuppression";
    n.inputs = {"x"};
    n.outputs = {"y"};
    m.graph.nodes.push_back(n);
    m.graph.inputs.push_back({"x", elem::kFloat, true, {1}});
    m.graph.outputs.push_back({"y", elem::kFloat, false, {}});
    try {
        Session s(m);
        FAIL();
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("NonMaxSuppression"), std::string::npos);
    }
}

TEST(Kernels, BroadcastRules) {
    EXPECT_EQ(detail::broadcast_shape({2, 1, 4}, {3, 1}), (Shape{2, 3, 4}));
    EXPECT_EQ(detail::broadcast_shape({}, {5}), (Shape{5}));
    EXPECT_THROW(detail::broadcast_shape({2, 3}, {4}), Error);
}

TEST(Kernels, IntegerShapeArithmetic) {
    Node n;
    n.op_type = "Div";
    const Tensor a = Tensor::ints({2}, {7, -7}), b = Tensor::ints({}, {2});
    const auto q = ops::div(OpContext{n, {&a, &b}, 17});
    EXPECT_EQ(q[0].i, (std::vector<std::int64_t>{3, -3}));
    EXPECT_EQ(q[0].dtype, DType::Int64);
}
