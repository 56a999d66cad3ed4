#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "clusinit/detector.hpp"
#include "clusinit/onnx/session.hpp"
#include "clusinit/raster.hpp"

namespace clusinit {

/// Detection head layouts the decoder understands:
///  - Rows: [1, N, 5+nc] with (cx, cy, w, h, objectness, class scores...);
///    a 5-column row is (cx, cy, w, h, confidence).
///  - ChannelsFirst: [1, 4+nc, N] with (cx, cy, w, h, class scores...).
enum class HeadLayout { Rows, ChannelsFirst };

inline constexpr const char* kExpectedModelSignature =
    "float32 input [1,C,H,W] with C in {1,3}; one output shaped [1,N,5+nc] or [1,4+nc,N]";

/// A loaded detection network in the portable interchange format.
class ModelArtifact {
public:
    static ModelArtifact load(const std::filesystem::path& path) {
        ModelArtifact m;
        m.path_ = path;
        auto reject = [&](const std::string& why) -> Error {
            return Error("bad model artifact " + path.string() + ": " + why + "; expected " + kExpectedModelSignature);
        };
        try {
            m.session_ = std::make_shared<const onnx::Session>(onnx::Session::load(path));
        } catch (const Error& e) {
            throw reject(e.what());
        }
        const auto& inputs = m.session_->inputs();
        if (inputs.size() != 1) throw reject("model has " + std::to_string(inputs.size()) + " inputs");
        const auto& in = inputs[0];
        if (in.elem_type != onnx::elem::kFloat) throw reject("input is not float32");
        if (!in.has_shape || in.dims.size() != 4) throw reject("input is not rank 4");
        if (in.dims[0] > 1) throw reject("input batch must be 1");
        if (in.dims[1] != 1 && in.dims[1] != 3) throw reject("input must have 1 or 3 channels");
        if (m.session_->outputs().empty()) throw reject("model has no outputs");
        m.channels_ = static_cast<int>(in.dims[1]);
        m.height_ = static_cast<int>(in.dims[2]);
        m.width_ = static_cast<int>(in.dims[3]);
        const auto& meta = m.session_->model().metadata;
        if (auto it = meta.find("output_layout"); it != meta.end()) {
            if (it->second == "rows") m.layout_override_ = HeadLayout::Rows;
            else if (it->second == "channels_first") m.layout_override_ = HeadLayout::ChannelsFirst;
            else throw reject("unknown output_layout '" + it->second + "'");
        }
        return m;
    }

    [[nodiscard]] const std::filesystem::path& path() const { return path_; }
    [[nodiscard]] int channels() const { return channels_; }
    /// Input height/width; -1 when the model accepts any size.
    [[nodiscard]] int height() const { return height_; }
    [[nodiscard]] int width() const { return width_; }
    [[nodiscard]] const onnx::Session& session() const { return *session_; }
    [[nodiscard]] std::optional<HeadLayout> layout_override() const { return layout_override_; }

    [[nodiscard]] std::string signature() const {
        auto dim = [](int d) { return d > 0 ? std::to_string(d) : std::string("?"); };
        return "float32[1," + std::to_string(channels_) + "," + dim(height_) + "," + dim(width_) + "]";
    }

private:
    std::filesystem::path path_;
    std::shared_ptr<const onnx::Session> session_;
    int channels_ = 0, height_ = -1, width_ = -1;
    std::optional<HeadLayout> layout_override_;
};

/// Bilinear resampling with half-pixel centers (edge values clamped).
inline std::vector<float> resize_bilinear(const std::vector<double>& grid, int width, int height, int out_w, int out_h) {
    std::vector<float> out(static_cast<std::size_t>(out_w) * static_cast<std::size_t>(out_h));
    const double sx = static_cast<double>(width) / out_w, sy = static_cast<double>(height) / out_h;
    for (int oy = 0; oy < out_h; ++oy) {
        const double y = std::clamp((oy + 0.5) * sy - 0.5, 0.0, static_cast<double>(height - 1));
        const int y0 = static_cast<int>(y), y1 = std::min(y0 + 1, height - 1);
        const double wy = y - y0;
        for (int ox = 0; ox < out_w; ++ox) {
            const double x = std::clamp((ox + 0.5) * sx - 0.5, 0.0, static_cast<double>(width - 1));
            const int x0 = static_cast<int>(x), x1 = std::min(x0 + 1, width - 1);
            const double wx = x - x0;
            auto at = [&](int r, int c) { return grid[static_cast<std::size_t>(r) * static_cast<std::size_t>(width) + static_cast<std::size_t>(c)]; };
            const double top = at(y0, x0) * (1 - wx) + at(y0, x1) * wx;
            const double bottom = at(y1, x0) * (1 - wx) + at(y1, x1) * wx;
            out[static_cast<std::size_t>(oy) * static_cast<std::size_t>(out_w) + static_cast<std::size_t>(ox)] =
                static_cast<float>(top * (1 - wy) + bottom * wy);
        }
    }
    return out;
}

/// Frame densities as the model's input tensor: resized if needed and the
/// single plane replicated across the declared channels.
inline onnx::Tensor frame_to_input(const RasterFrame& frame, const ModelArtifact& model) {
    const int W = model.width() > 0 ? model.width() : frame.width();
    const int H = model.height() > 0 ? model.height() : frame.height();
    std::vector<float> plane;
    if (W == frame.width() && H == frame.height()) plane.assign(frame.grid.begin(), frame.grid.end());
    else plane = resize_bilinear(frame.grid, frame.width(), frame.height(), W, H);
    std::vector<float> data;
    data.reserve(plane.size() * static_cast<std::size_t>(model.channels()));
    for (int c = 0; c < model.channels(); ++c) data.insert(data.end(), plane.begin(), plane.end());
    return onnx::Tensor::floats({1, model.channels(), H, W}, std::move(data));
}

/// The feature axis holds at least 5 values and, in practice, is the
/// shorter one (candidates number in the thousands).
inline HeadLayout infer_layout(const onnx::Shape& shape) {
    if (shape[1] < 5) return HeadLayout::Rows;
    if (shape[2] < 5) return HeadLayout::ChannelsFirst;
    return shape[2] <= shape[1] ? HeadLayout::Rows : HeadLayout::ChannelsFirst;
}

/// Turns raw head output into boxes in frame pixels. Candidates whose
/// confidence does not exceed `confidence_threshold` are dropped; no NMS.
inline std::vector<DetectionBox> decode_predictions(const onnx::Tensor& raw, std::optional<HeadLayout> layout,
                                                    double confidence_threshold, double scale_x, double scale_y,
                                                    int frame_w, int frame_h) {
    onnx::Shape shape = raw.shape;
    if (shape.size() == 2) shape.insert(shape.begin(), 1);
    if (shape.size() != 3 || shape[0] != 1 || !raw.is_float())
        throw Error(std::string("bad model artifact: output shape ") + onnx::shape_string(raw.shape) + "; expected " + kExpectedModelSignature);
    const HeadLayout lay = layout.value_or(infer_layout(shape));
    const std::int64_t n = lay == HeadLayout::Rows ? shape[1] : shape[2];
    const std::int64_t feats = lay == HeadLayout::Rows ? shape[2] : shape[1];
    if (feats < 5)
        throw Error("bad model artifact: output has " + std::to_string(feats) + " values per candidate; expected " + kExpectedModelSignature);
    auto at = [&](std::int64_t cand, std::int64_t f) {
        return static_cast<double>(raw.f[static_cast<std::size_t>(lay == HeadLayout::Rows ? cand * feats + f : f * n + cand)]);
    };
    std::vector<DetectionBox> boxes;
    for (std::int64_t c = 0; c < n; ++c) {
        double conf;
        if (lay == HeadLayout::Rows && feats > 5) {
            double best = 0.0;
            for (std::int64_t f = 5; f < feats; ++f) best = std::max(best, at(c, f));
            conf = at(c, 4) * best;
        } else {
            conf = at(c, 4);
            for (std::int64_t f = 5; f < feats; ++f) conf = std::max(conf, at(c, f));
        }
        if (!(conf > confidence_threshold)) continue;
        const double cx = at(c, 0), cy = at(c, 1), w = at(c, 2), h = at(c, 3);
        if (!(w > 0.0 && h > 0.0)) continue;
        DetectionBox b{std::clamp((cx - w / 2) * scale_x, 0.0, static_cast<double>(frame_w)),
                       std::clamp((cy - h / 2) * scale_y, 0.0, static_cast<double>(frame_h)),
                       std::clamp((cx + w / 2) * scale_x, 0.0, static_cast<double>(frame_w)),
                       std::clamp((cy + h / 2) * scale_y, 0.0, static_cast<double>(frame_h)), std::min(conf, 1.0)};
        if (b.area() > 0.0) boxes.push_back(b);
    }
    return boxes;
}

/// One forward pass of the detection network, then thresholding and NMS.
inline std::vector<DetectionBox> model_detect(const RasterFrame& frame, const ModelArtifact& model, const DetectorSettings& settings = {}) {
    settings.validate();
    const onnx::Tensor input = frame_to_input(frame, model);
    const onnx::Tensor raw = model.session().run_single(input);
    const double sx = static_cast<double>(frame.width()) / static_cast<double>(input.shape[3]);
    const double sy = static_cast<double>(frame.height()) / static_cast<double>(input.shape[2]);
    auto boxes = decode_predictions(raw, model.layout_override(), settings.confidence_threshold, sx, sy, frame.width(), frame.height());
    return nms(std::move(boxes), settings.nms_iou_threshold);
}

class ModelBackend final : public DetectorBackend {
public:
    explicit ModelBackend(ModelArtifact model) : model_(std::move(model)) {}
    explicit ModelBackend(const std::filesystem::path& path) : model_(ModelArtifact::load(path)) {}

    [[nodiscard]] std::vector<DetectionBox> detect(const RasterFrame& frame, const DetectorSettings& settings) const override {
        return model_detect(frame, model_, settings);
    }
    [[nodiscard]] std::string name() const override { return "model"; }
    [[nodiscard]] const ModelArtifact& artifact() const { return model_; }

private:
    ModelArtifact model_;
};

}  // namespace clusinit
