#pragma once

#include <cstdint>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "clusinit/core.hpp"

namespace clusinit::onnx {

/// Element kinds the interpreter computes with. Narrower integer and
/// floating types are widened on load.
enum class DType { Float, Int64, Bool };

inline std::string to_string(DType d) {
    switch (d) {
        case DType::Float: return "float";
        case DType::Int64: return "int64";
        case DType::Bool: return "bool";
    }
    return "?";
}

using Shape = std::vector<std::int64_t>;

inline std::int64_t numel(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::int64_t{1}, std::multiplies<>());
}

inline std::string shape_string(const Shape& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) s += (i ? "," : "") + std::to_string(shape[i]);
    return s + "]";
}

/// Row-major strides in elements.
inline std::vector<std::int64_t> strides_of(const Shape& shape) {
    std::vector<std::int64_t> st(shape.size(), 1);
    for (std::size_t i = shape.size(); i-- > 1;) st[i - 1] = st[i] * shape[i];
    return st;
}

/// Dense tensor. Float data lives in `f`; Int64 and Bool data in `i`
/// (Bool stored as 0/1).
struct Tensor {
    DType dtype = DType::Float;
    Shape shape;
    std::vector<float> f;
    std::vector<std::int64_t> i;

    Tensor() = default;

    static Tensor floats(Shape shape, std::vector<float> data) {
        Tensor t;
        t.dtype = DType::Float;
        t.shape = std::move(shape);
        t.f = std::move(data);
        t.check();
        return t;
    }
    static Tensor floats(Shape shape, float fill = 0.0f) {
        const auto n = static_cast<std::size_t>(numel(shape));
        return floats(std::move(shape), std::vector<float>(n, fill));
    }
    static Tensor ints(Shape shape, std::vector<std::int64_t> data, DType dtype = DType::Int64) {
        Tensor t;
        t.dtype = dtype;
        t.shape = std::move(shape);
        t.i = std::move(data);
        t.check();
        return t;
    }

    [[nodiscard]] bool is_float() const { return dtype == DType::Float; }
    [[nodiscard]] std::int64_t size() const { return numel(shape); }
    [[nodiscard]] std::size_t rank() const { return shape.size(); }

    void check() const {
        const auto n = static_cast<std::size_t>(numel(shape));
        if ((is_float() ? f.size() : i.size()) != n) throw Error("onnx: tensor data does not match its shape " + shape_string(shape));
    }

    /// Element as double regardless of storage.
    [[nodiscard]] double value(std::size_t k) const { return is_float() ? f[k] : static_cast<double>(i[k]); }

    /// Integer view used for shape-like inputs (axes, pads, sizes...).
    [[nodiscard]] std::vector<std::int64_t> as_ints() const {
        if (!is_float()) return i;
        std::vector<std::int64_t> out(f.size());
        for (std::size_t k = 0; k < f.size(); ++k) out[k] = static_cast<std::int64_t>(f[k]);
        return out;
    }
    [[nodiscard]] std::vector<float> as_floats() const {
        if (is_float()) return f;
        return {i.begin(), i.end()};
    }
};

/// Normalizes a possibly negative axis against `rank`.
inline std::size_t norm_axis(std::int64_t axis, std::size_t rank) {
    const auto r = static_cast<std::int64_t>(rank);
    if (axis < -r || axis >= std::max<std::int64_t>(r, 1)) throw Error("onnx: axis out of range");
    return static_cast<std::size_t>(axis < 0 ? axis + r : axis);
}

}  // namespace clusinit::onnx
