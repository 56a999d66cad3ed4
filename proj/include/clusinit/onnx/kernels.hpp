#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>
#include <numeric>
#include <optional>
#include <type_traits>
#include <unordered_map>
#include <vector>

#include "clusinit/onnx/proto.hpp"

namespace clusinit::onnx {

/// Inputs of one node invocation; absent optional inputs are null.
struct OpContext {
    const Node& node;
    std::vector<const Tensor*> in;
    std::int64_t opset;

    [[nodiscard]] bool has(std::size_t k) const { return k < in.size() && in[k] != nullptr; }
    [[nodiscard]] const Tensor& input(std::size_t k) const {
        if (!has(k)) throw Error("onnx: " + node.op_type + " is missing input " + std::to_string(k));
        return *in[k];
    }
    [[noreturn]] void fail(const std::string& why) const { throw Error("onnx: " + node.op_type + ": " + why); }
};

using Kernel = std::vector<Tensor> (*)(const OpContext&);

namespace detail {

template <class F>
decltype(auto) with_data(Tensor& t, F&& f) {
    if (t.is_float()) return f(t.f);
    return f(t.i);
}
template <class F>
decltype(auto) with_data(const Tensor& t, F&& f) {
    if (t.is_float()) return f(t.f);
    return f(t.i);
}

/// Storage vector of `t` matching the element vector type V.
template <class V>
const V& storage(const Tensor& t) {
    if constexpr (std::is_same_v<V, std::vector<float>>) return t.f;
    else return t.i;
}

inline Tensor like(const Tensor& proto, Shape shape) {
    Tensor t;
    t.dtype = proto.dtype;
    t.shape = std::move(shape);
    const auto n = static_cast<std::size_t>(numel(t.shape));
    if (t.is_float()) t.f.resize(n);
    else t.i.resize(n);
    return t;
}

inline Shape broadcast_shape(const Shape& a, const Shape& b) {
    Shape out(std::max(a.size(), b.size()), 1);
    for (std::size_t k = 0; k < out.size(); ++k) {
        const std::int64_t da = k < out.size() - a.size() ? 1 : a[k - (out.size() - a.size())];
        const std::int64_t db = k < out.size() - b.size() ? 1 : b[k - (out.size() - b.size())];
        if (da != db && da != 1 && db != 1)
            throw Error("onnx: shapes " + shape_string(a) + " and " + shape_string(b) + " do not broadcast");
        out[k] = da == 1 ? db : da;
    }
    return out;
}

/// Strides of `in` aligned to the trailing dims of `out`; broadcast dims get 0.
inline std::vector<std::int64_t> aligned_strides(const Shape& out, const Shape& in) {
    std::vector<std::int64_t> s(out.size(), 0);
    const auto st = strides_of(in);
    const std::size_t off = out.size() - in.size();
    for (std::size_t d = 0; d < in.size(); ++d) s[off + d] = in[d] == 1 ? 0 : st[d];
    return s;
}

/// Visits every element of `out` in row-major order together with the
/// element offset into each operand under the given per-dim strides.
template <std::size_t N, class F>
void strided_loop(const Shape& out, const std::array<std::vector<std::int64_t>, N>& st, F&& f) {
    const std::int64_t total = numel(out);
    if (total == 0) return;
    const std::size_t R = out.size();
    const std::int64_t inner = R ? out[R - 1] : 1;
    std::array<std::int64_t, N> inner_st{}, off{};
    for (std::size_t k = 0; k < N; ++k) inner_st[k] = R ? st[k][R - 1] : 0;
    std::vector<std::int64_t> idx(R, 0);
    for (std::int64_t base = 0; base < total; base += inner) {
        std::array<std::int64_t, N> o = off;
        for (std::int64_t j = 0; j < inner; ++j) {
            f(static_cast<std::size_t>(base + j), o);
            for (std::size_t k = 0; k < N; ++k) o[k] += inner_st[k];
        }
        for (std::size_t d = R - 1; d-- > 0;) {
            ++idx[d];
            for (std::size_t k = 0; k < N; ++k) off[k] += st[k][d];
            if (idx[d] < out[d]) break;
            for (std::size_t k = 0; k < N; ++k) off[k] -= st[k][d] * out[d];
            idx[d] = 0;
        }
    }
}

/// Copies src elements at `base + sum(idx[d] * st[d])` into a new tensor of
/// shape `out` (transpose, slice, expand).
inline Tensor strided_copy(const Tensor& src, Shape out, std::vector<std::int64_t> st, std::int64_t base = 0) {
    Tensor t = like(src, out);
    with_data(t, [&](auto& dst) {
        const auto& s = storage<std::decay_t<decltype(dst)>>(src);
        strided_loop<1>(out, {std::move(st)}, [&](std::size_t o, const std::array<std::int64_t, 1>& off) {
            dst[o] = s[static_cast<std::size_t>(base + off[0])];
        });
    });
    return t;
}

template <class Op>
Tensor arith(const OpContext& ctx, const Tensor& a, const Tensor& b, Op op) {
    if (a.is_float() != b.is_float()) ctx.fail("operand types differ");
    const Shape out = broadcast_shape(a.shape, b.shape);
    Tensor t = like(a, out);
    const std::array<std::vector<std::int64_t>, 2> st{aligned_strides(out, a.shape), aligned_strides(out, b.shape)};
    if (a.is_float()) {
        strided_loop<2>(out, st, [&](std::size_t o, const std::array<std::int64_t, 2>& off) {
            t.f[o] = op(a.f[static_cast<std::size_t>(off[0])], b.f[static_cast<std::size_t>(off[1])]);
        });
    } else {
        strided_loop<2>(out, st, [&](std::size_t o, const std::array<std::int64_t, 2>& off) {
            t.i[o] = op(a.i[static_cast<std::size_t>(off[0])], b.i[static_cast<std::size_t>(off[1])]);
        });
    }
    return t;
}

template <class Op>
Tensor compare(const Tensor& a, const Tensor& b, Op op) {
    const Shape out = broadcast_shape(a.shape, b.shape);
    Tensor t = Tensor::ints(out, std::vector<std::int64_t>(static_cast<std::size_t>(numel(out))), DType::Bool);
    strided_loop<2>(out, {aligned_strides(out, a.shape), aligned_strides(out, b.shape)},
                    [&](std::size_t o, const std::array<std::int64_t, 2>& off) {
                        t.i[o] = op(a.value(static_cast<std::size_t>(off[0])), b.value(static_cast<std::size_t>(off[1])));
                    });
    return t;
}

template <class F>
Tensor unary_float(const OpContext& ctx, F f) {
    const Tensor& x = ctx.input(0);
    if (!x.is_float()) ctx.fail("expects a float tensor");
    Tensor t = x;
    for (float& v : t.f) v = f(v);
    return t;
}

inline std::vector<std::int64_t> ints_or(const std::optional<std::vector<std::int64_t>>& v, std::size_t n, std::int64_t fill) {
    if (v && !v->empty()) return *v;
    return std::vector<std::int64_t>(n, fill);
}

/// Spatial geometry shared by Conv and the pooling ops.
struct Window {
    std::size_t dims = 0;
    std::vector<std::int64_t> kernel, stride, dilation, pad_begin, pad_end, out;
};

inline Window resolve_window(const OpContext& ctx, const Shape& x, const std::vector<std::int64_t>& kernel, bool ceil_mode) {
    Window w;
    w.dims = x.size() - 2;
    if (kernel.size() != w.dims) ctx.fail("kernel rank does not match input");
    w.kernel = kernel;
    w.stride = ints_or(ctx.node.attr_ints("strides"), w.dims, 1);
    w.dilation = ints_or(ctx.node.attr_ints("dilations"), w.dims, 1);
    const auto pads = ints_or(ctx.node.attr_ints("pads"), 2 * w.dims, 0);
    const std::string auto_pad = ctx.node.attr_s("auto_pad", "NOTSET");
    w.pad_begin.resize(w.dims);
    w.pad_end.resize(w.dims);
    w.out.resize(w.dims);
    for (std::size_t d = 0; d < w.dims; ++d) {
        const std::int64_t in = x[d + 2], s = w.stride[d], extent = (w.kernel[d] - 1) * w.dilation[d] + 1;
        if (auto_pad == "SAME_UPPER" || auto_pad == "SAME_LOWER") {
            w.out[d] = (in + s - 1) / s;
            const std::int64_t total = std::max<std::int64_t>(0, (w.out[d] - 1) * s + extent - in);
            const std::int64_t small = total / 2;
            w.pad_begin[d] = auto_pad == "SAME_UPPER" ? small : total - small;
            w.pad_end[d] = total - w.pad_begin[d];
            continue;
        }
        if (auto_pad == "VALID") {
            w.pad_begin[d] = w.pad_end[d] = 0;
        } else if (auto_pad == "NOTSET") {
            w.pad_begin[d] = pads[d];
            w.pad_end[d] = pads[d + w.dims];
        } else {
            ctx.fail("unsupported auto_pad " + auto_pad);
        }
        const std::int64_t span = in + w.pad_begin[d] + w.pad_end[d] - extent;
        if (span < 0) ctx.fail("window larger than padded input");
        w.out[d] = (ceil_mode ? (span + s - 1) / s : span / s) + 1;
        // A window that would start entirely inside the end padding is dropped.
        if (ceil_mode && (w.out[d] - 1) * s >= in + w.pad_begin[d]) --w.out[d];
    }
    return w;
}

}  // namespace detail

namespace ops {

using detail::arith;
using detail::compare;
using detail::unary_float;

// ---- elementwise -------------------------------------------------------

#define CLUSINIT_UNARY(NAME, EXPR)                                                    \
    inline std::vector<Tensor> NAME(const OpContext& ctx) {                           \
        [[maybe_unused]] const auto& node = ctx.node;                                 \
        return {unary_float(ctx, [&](float x) -> float { return EXPR; })};             \
    }

CLUSINIT_UNARY(relu, x > 0.0f ? x : 0.0f)
CLUSINIT_UNARY(sigmoid, 1.0f / (1.0f + std::exp(-x)))
CLUSINIT_UNARY(tanh_op, std::tanh(x))
CLUSINIT_UNARY(exp_op, std::exp(x))
CLUSINIT_UNARY(log_op, std::log(x))
CLUSINIT_UNARY(sqrt_op, std::sqrt(x))
CLUSINIT_UNARY(floor_op, std::floor(x))
CLUSINIT_UNARY(ceil_op, std::ceil(x))
CLUSINIT_UNARY(reciprocal, 1.0f / x)
CLUSINIT_UNARY(erf_op, std::erf(x))
CLUSINIT_UNARY(softplus, x > 20.0f ? x : std::log1p(std::exp(x)))
CLUSINIT_UNARY(mish, x * std::tanh(x > 20.0f ? x : std::log1p(std::exp(x))))
CLUSINIT_UNARY(leaky_relu, x >= 0.0f ? x : node.attr_f("alpha", 0.01f) * x)
CLUSINIT_UNARY(elu, x >= 0.0f ? x : node.attr_f("alpha", 1.0f) * (std::exp(x) - 1.0f))
CLUSINIT_UNARY(hard_sigmoid, std::clamp(node.attr_f("alpha", 0.2f) * x + node.attr_f("beta", 0.5f), 0.0f, 1.0f))
CLUSINIT_UNARY(hard_swish, x * std::clamp(x / 6.0f + 0.5f, 0.0f, 1.0f))

#undef CLUSINIT_UNARY

inline std::vector<Tensor> neg(const OpContext& ctx) {
    Tensor t = ctx.input(0);
    detail::with_data(t, [](auto& d) { for (auto& v : d) v = -v; });
    return {t};
}

inline std::vector<Tensor> abs_op(const OpContext& ctx) {
    Tensor t = ctx.input(0);
    detail::with_data(t, [](auto& d) { for (auto& v : d) v = v < 0 ? -v : v; });
    return {t};
}

inline std::vector<Tensor> clip(const OpContext& ctx) {
    float lo = -std::numeric_limits<float>::infinity(), hi = std::numeric_limits<float>::infinity();
    if (ctx.opset < 11) {
        lo = ctx.node.attr_f("min", lo);
        hi = ctx.node.attr_f("max", hi);
    } else {
        if (ctx.has(1)) lo = static_cast<float>(ctx.input(1).value(0));
        if (ctx.has(2)) hi = static_cast<float>(ctx.input(2).value(0));
    }
    return {unary_float(ctx, [&](float x) { return std::min(std::max(x, lo), hi); })};
}

inline std::vector<Tensor> identity(const OpContext& ctx) { return {ctx.input(0)}; }

inline std::vector<Tensor> add(const OpContext& ctx) {
    return {arith(ctx, ctx.input(0), ctx.input(1), [](auto a, auto b) { return a + b; })};
}
inline std::vector<Tensor> sub(const OpContext& ctx) {
    return {arith(ctx, ctx.input(0), ctx.input(1), [](auto a, auto b) { return a - b; })};
}
inline std::vector<Tensor> mul(const OpContext& ctx) {
    return {arith(ctx, ctx.input(0), ctx.input(1), [](auto a, auto b) { return a * b; })};
}
inline std::vector<Tensor> div(const OpContext& ctx) {
    return {arith(ctx, ctx.input(0), ctx.input(1), [&](auto a, auto b) {
        if constexpr (std::is_integral_v<decltype(a)>) {
            if (b == 0) ctx.fail("integer division by zero");
        }
        return a / b;
    })};
}

inline std::vector<Tensor> pow_op(const OpContext& ctx) {
    const Tensor& base = ctx.input(0);
    Tensor expo = ctx.input(1);
    if (base.is_float() && !expo.is_float()) expo = Tensor::floats(expo.shape, expo.as_floats());
    return {arith(ctx, base, expo, [](auto a, auto b) {
        if constexpr (std::is_integral_v<decltype(a)>) return static_cast<decltype(a)>(std::llround(std::pow(a, b)));
        else return b == 2.0f ? a * a : std::pow(a, b);
    })};
}

template <class Op>
std::vector<Tensor> fold_inputs(const OpContext& ctx, Op op) {
    Tensor acc = ctx.input(0);
    for (std::size_t k = 1; k < ctx.in.size(); ++k) acc = arith(ctx, acc, ctx.input(k), op);
    return {acc};
}
inline std::vector<Tensor> max_op(const OpContext& ctx) {
    return fold_inputs(ctx, [](auto a, auto b) { return std::max(a, b); });
}
inline std::vector<Tensor> min_op(const OpContext& ctx) {
    return fold_inputs(ctx, [](auto a, auto b) { return std::min(a, b); });
}
inline std::vector<Tensor> sum_op(const OpContext& ctx) {
    return fold_inputs(ctx, [](auto a, auto b) { return a + b; });
}

inline std::vector<Tensor> equal(const OpContext& ctx) {
    return {compare(ctx.input(0), ctx.input(1), [](double a, double b) { return a == b; })};
}
inline std::vector<Tensor> greater(const OpContext& ctx) {
    return {compare(ctx.input(0), ctx.input(1), [](double a, double b) { return a > b; })};
}
inline std::vector<Tensor> greater_equal(const OpContext& ctx) {
    return {compare(ctx.input(0), ctx.input(1), [](double a, double b) { return a >= b; })};
}
inline std::vector<Tensor> less(const OpContext& ctx) {
    return {compare(ctx.input(0), ctx.input(1), [](double a, double b) { return a < b; })};
}
inline std::vector<Tensor> less_equal(const OpContext& ctx) {
    return {compare(ctx.input(0), ctx.input(1), [](double a, double b) { return a <= b; })};
}
inline std::vector<Tensor> and_op(const OpContext& ctx) {
    return {compare(ctx.input(0), ctx.input(1), [](double a, double b) { return a != 0 && b != 0; })};
}
inline std::vector<Tensor> or_op(const OpContext& ctx) {
    return {compare(ctx.input(0), ctx.input(1), [](double a, double b) { return a != 0 || b != 0; })};
}
inline std::vector<Tensor> not_op(const OpContext& ctx) {
    Tensor t = ctx.input(0);
    if (t.dtype != DType::Bool) ctx.fail("expects a bool tensor");
    for (auto& v : t.i) v = !v;
    return {t};
}

inline std::vector<Tensor> where(const OpContext& ctx) {
    const Tensor &c = ctx.input(0), &x = ctx.input(1), &y = ctx.input(2);
    if (x.is_float() != y.is_float()) ctx.fail("operand types differ");
    const Shape out = detail::broadcast_shape(detail::broadcast_shape(c.shape, x.shape), y.shape);
    Tensor t = detail::like(x, out);
    const std::array<std::vector<std::int64_t>, 3> st{detail::aligned_strides(out, c.shape), detail::aligned_strides(out, x.shape),
                                                     detail::aligned_strides(out, y.shape)};
    detail::strided_loop<3>(out, st, [&](std::size_t o, const std::array<std::int64_t, 3>& off) {
        const bool pick = c.value(static_cast<std::size_t>(off[0])) != 0.0;
        const auto src = static_cast<std::size_t>(pick ? off[1] : off[2]);
        if (t.is_float()) t.f[o] = pick ? x.f[src] : y.f[src];
        else t.i[o] = pick ? x.i[src] : y.i[src];
    });
    return {t};
}

inline std::vector<Tensor> cast(const OpContext& ctx) {
    const Tensor& x = ctx.input(0);
    const auto to = static_cast<int>(ctx.node.attr_i("to", elem::kFloat));
    Tensor t;
    t.shape = x.shape;
    switch (to) {
        case elem::kFloat:
        case elem::kDouble:
        case elem::kFloat16:
            t.dtype = DType::Float;
            t.f = x.as_floats();
            break;
        case elem::kBool:
            t.dtype = DType::Bool;
            t.i.resize(static_cast<std::size_t>(x.size()));
            for (std::size_t k = 0; k < t.i.size(); ++k) t.i[k] = x.value(k) != 0.0;
            break;
        case elem::kInt64:
        case elem::kInt32:
        case elem::kInt16:
        case elem::kInt8:
        case elem::kUint8:
        case elem::kUint16:
        case elem::kUint32:
        case elem::kUint64:
            t.dtype = DType::Int64;
            t.i = x.as_ints();
            break;
        default: ctx.fail("unsupported target type " + std::to_string(to));
    }
    return {t};
}

// ---- convolution, normalization, pooling -------------------------------

inline std::vector<Tensor> conv(const OpContext& ctx) {
    const Tensor &x = ctx.input(0), &w = ctx.input(1);
    if (x.rank() != 4 || w.rank() != 4) ctx.fail("only 2-D convolution is supported");
    const std::int64_t group = ctx.node.attr_i("group", 1);
    const std::int64_t N = x.shape[0], C = x.shape[1], H = x.shape[2], W = x.shape[3];
    const std::int64_t M = w.shape[0], Cg = w.shape[1], KH = w.shape[2], KW = w.shape[3];
    if (C != Cg * group || M % group != 0) ctx.fail("channel count does not match weights and group");
    const auto kernel = detail::ints_or(ctx.node.attr_ints("kernel_shape"), 0, 0);
    if (!kernel.empty() && (kernel[0] != KH || kernel[1] != KW)) ctx.fail("kernel_shape does not match weights");
    const auto win = detail::resolve_window(ctx, x.shape, {KH, KW}, false);
    const std::int64_t OH = win.out[0], OW = win.out[1], Mg = M / group;
    const std::int64_t rows = Cg * KH * KW, cols = OH * OW;
    Tensor y = Tensor::floats({N, M, OH, OW});

    using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    const bool pointwise = KH == 1 && KW == 1 && win.stride[0] == 1 && win.stride[1] == 1 && win.pad_begin[0] == 0 &&
                           win.pad_begin[1] == 0 && win.pad_end[0] == 0 && win.pad_end[1] == 0;
    RowMat col;
    if (!pointwise) col.resize(rows, cols);
    for (std::int64_t n = 0; n < N; ++n) {
        for (std::int64_t g = 0; g < group; ++g) {
            const float* xg = x.f.data() + (n * C + g * Cg) * H * W;
            const float* src = xg;
            if (!pointwise) {
                for (std::int64_t c = 0; c < Cg; ++c) {
                    for (std::int64_t ki = 0; ki < KH; ++ki) {
                        for (std::int64_t kj = 0; kj < KW; ++kj) {
                            float* dst = col.data() + ((c * KH + ki) * KW + kj) * cols;
                            for (std::int64_t oy = 0; oy < OH; ++oy) {
                                const std::int64_t iy = oy * win.stride[0] - win.pad_begin[0] + ki * win.dilation[0];
                                for (std::int64_t ox = 0; ox < OW; ++ox) {
                                    const std::int64_t ix = ox * win.stride[1] - win.pad_begin[1] + kj * win.dilation[1];
                                    dst[oy * OW + ox] = (iy >= 0 && iy < H && ix >= 0 && ix < W) ? xg[(c * H + iy) * W + ix] : 0.0f;
                                }
                            }
                        }
                    }
                }
                src = col.data();
            }
            Eigen::Map<const RowMat> wm(w.f.data() + g * Mg * rows, Mg, rows);
            Eigen::Map<const RowMat> cm(src, rows, cols);
            Eigen::Map<RowMat> out(y.f.data() + (n * M + g * Mg) * cols, Mg, cols);
            out.noalias() = wm * cm;
        }
        if (ctx.has(2)) {
            const Tensor& b = ctx.input(2);
            for (std::int64_t m = 0; m < M; ++m) {
                float* o = y.f.data() + (n * M + m) * cols;
                const float bias = b.f[static_cast<std::size_t>(m)];
                for (std::int64_t k = 0; k < cols; ++k) o[k] += bias;
            }
        }
    }
    return {y};
}

inline std::vector<Tensor> batch_norm(const OpContext& ctx) {
    const Tensor& x = ctx.input(0);
    const Tensor &scale = ctx.input(1), &bias = ctx.input(2), &mean = ctx.input(3), &var = ctx.input(4);
    const float eps = ctx.node.attr_f("epsilon", 1e-5f);
    if (x.rank() < 2) ctx.fail("input must have a channel axis");
    const std::int64_t N = x.shape[0], C = x.shape[1], inner = x.size() / std::max<std::int64_t>(1, N * C);
    Tensor y = x;
    for (std::int64_t n = 0; n < N; ++n) {
        for (std::int64_t c = 0; c < C; ++c) {
            const auto k = static_cast<std::size_t>(c);
            const float a = scale.f[k] / std::sqrt(var.f[k] + eps);
            const float b = bias.f[k] - a * mean.f[k];
            float* p = y.f.data() + (n * C + c) * inner;
            for (std::int64_t j = 0; j < inner; ++j) p[j] = a * p[j] + b;
        }
    }
    return {y};
}

template <bool IsMax>
std::vector<Tensor> pool(const OpContext& ctx) {
    const Tensor& x = ctx.input(0);
    if (x.rank() != 4) ctx.fail("only 2-D pooling is supported");
    const auto kernel = detail::ints_or(ctx.node.attr_ints("kernel_shape"), 0, 0);
    const auto win = detail::resolve_window(ctx, x.shape, kernel, ctx.node.attr_i("ceil_mode", 0) != 0);
    const bool include_pad = ctx.node.attr_i("count_include_pad", 0) != 0;
    const std::int64_t N = x.shape[0], C = x.shape[1], H = x.shape[2], W = x.shape[3];
    const std::int64_t OH = win.out[0], OW = win.out[1];
    Tensor y = Tensor::floats({N, C, OH, OW});
    for (std::int64_t nc = 0; nc < N * C; ++nc) {
        const float* src = x.f.data() + nc * H * W;
        float* dst = y.f.data() + nc * OH * OW;
        for (std::int64_t oy = 0; oy < OH; ++oy) {
            for (std::int64_t ox = 0; ox < OW; ++ox) {
                float acc = IsMax ? -std::numeric_limits<float>::infinity() : 0.0f;
                std::int64_t count = 0, padded = 0;
                for (std::int64_t ki = 0; ki < win.kernel[0]; ++ki) {
                    const std::int64_t iy = oy * win.stride[0] - win.pad_begin[0] + ki * win.dilation[0];
                    for (std::int64_t kj = 0; kj < win.kernel[1]; ++kj) {
                        const std::int64_t ix = ox * win.stride[1] - win.pad_begin[1] + kj * win.dilation[1];
                        if (iy >= -win.pad_begin[0] && iy < H + win.pad_end[0] && ix >= -win.pad_begin[1] && ix < W + win.pad_end[1]) ++padded;
                        if (iy < 0 || iy >= H || ix < 0 || ix >= W) continue;
                        const float v = src[iy * W + ix];
                        if constexpr (IsMax) acc = std::max(acc, v);
                        else acc += v;
                        ++count;
                    }
                }
                if constexpr (!IsMax) acc /= static_cast<float>(include_pad ? padded : std::max<std::int64_t>(count, 1));
                dst[oy * OW + ox] = acc;
            }
        }
    }
    return {y};
}
inline std::vector<Tensor> max_pool(const OpContext& ctx) {
    if (ctx.node.outputs.size() > 1 && !ctx.node.outputs[1].empty()) ctx.fail("the indices output is not supported");
    return pool<true>(ctx);
}
inline std::vector<Tensor> average_pool(const OpContext& ctx) { return pool<false>(ctx); }

template <bool IsMax>
std::vector<Tensor> global_pool(const OpContext& ctx) {
    const Tensor& x = ctx.input(0);
    if (x.rank() < 3) ctx.fail("input must have spatial axes");
    const std::int64_t NC = x.shape[0] * x.shape[1], inner = x.size() / std::max<std::int64_t>(NC, 1);
    Shape out = x.shape;
    std::fill(out.begin() + 2, out.end(), 1);
    Tensor y = Tensor::floats(out);
    for (std::int64_t k = 0; k < NC; ++k) {
        const float* p = x.f.data() + k * inner;
        if constexpr (IsMax) y.f[static_cast<std::size_t>(k)] = *std::max_element(p, p + inner);
        else y.f[static_cast<std::size_t>(k)] = std::accumulate(p, p + inner, 0.0f) / static_cast<float>(inner);
    }
    return {y};
}
inline std::vector<Tensor> global_average_pool(const OpContext& ctx) { return global_pool<false>(ctx); }
inline std::vector<Tensor> global_max_pool(const OpContext& ctx) { return global_pool<true>(ctx); }

// ---- resampling --------------------------------------------------------

inline std::vector<Tensor> resize_impl(const OpContext& ctx, const Tensor& x, std::vector<float> scales, Shape out,
                                       const std::string& mode, const std::string& transform, const std::string& nearest_mode) {
    const std::size_t R = x.rank();
    if (scales.empty()) {
        scales.resize(R);
        for (std::size_t d = 0; d < R; ++d) scales[d] = static_cast<float>(out[d]) / static_cast<float>(x.shape[d]);
    }
    if (out.empty()) {
        out.resize(R);
        for (std::size_t d = 0; d < R; ++d) out[d] = static_cast<std::int64_t>(std::floor(static_cast<float>(x.shape[d]) * scales[d]));
    }
    if (scales.size() != R || out.size() != R) ctx.fail("scales/sizes rank does not match input");

    auto source_coord = [&](std::size_t d, std::int64_t o) -> float {
        const float s = scales[d];
        const auto in = static_cast<float>(x.shape[d]), outf = static_cast<float>(out[d]);
        const auto of = static_cast<float>(o);
        if (transform == "half_pixel") return (of + 0.5f) / s - 0.5f;
        if (transform == "pytorch_half_pixel") return outf > 1.0f ? (of + 0.5f) / s - 0.5f : 0.0f;
        if (transform == "align_corners") return outf > 1.0f ? of * (in - 1.0f) / (outf - 1.0f) : 0.0f;
        if (transform == "asymmetric") return of / s;
        if (transform == "half_pixel_symmetric") {
            const float adj = outf / (s * in), center = in / 2.0f;
            return center * (1.0f - adj) + (of + 0.5f) / s - 0.5f;
        }
        ctx.fail("unsupported coordinate_transformation_mode " + transform);
    };

    if (mode == "nearest") {
        std::vector<std::vector<std::int64_t>> pick(R);
        for (std::size_t d = 0; d < R; ++d) {
            pick[d].resize(static_cast<std::size_t>(out[d]));
            for (std::int64_t o = 0; o < out[d]; ++o) {
                const float c = source_coord(d, o);
                float r;
                if (nearest_mode == "round_prefer_floor") r = (c - std::floor(c) == 0.5f) ? std::floor(c) : std::round(c);
                else if (nearest_mode == "round_prefer_ceil") r = (c - std::floor(c) == 0.5f) ? std::ceil(c) : std::round(c);
                else if (nearest_mode == "floor") r = std::floor(c);
                else if (nearest_mode == "ceil") r = std::ceil(c);
                else ctx.fail("unsupported nearest_mode " + nearest_mode);
                pick[d][static_cast<std::size_t>(o)] = std::clamp<std::int64_t>(static_cast<std::int64_t>(r), 0, x.shape[d] - 1);
            }
        }
        Tensor y = detail::like(x, out);
        const auto in_st = strides_of(x.shape);
        std::vector<std::int64_t> idx(R, 0);
        for (std::int64_t o = 0; o < y.size(); ++o) {
            std::int64_t src = 0;
            for (std::size_t d = 0; d < R; ++d) src += pick[d][static_cast<std::size_t>(idx[d])] * in_st[d];
            if (y.is_float()) y.f[static_cast<std::size_t>(o)] = x.f[static_cast<std::size_t>(src)];
            else y.i[static_cast<std::size_t>(o)] = x.i[static_cast<std::size_t>(src)];
            for (std::size_t d = R; d-- > 0;) {
                if (++idx[d] < out[d]) break;
                idx[d] = 0;
            }
        }
        return {y};
    }
    if (mode != "linear") ctx.fail("unsupported resize mode " + mode);
    if (R < 2 || !x.is_float()) ctx.fail("linear resize needs a float tensor of rank >= 2");
    for (std::size_t d = 0; d + 2 < R; ++d)
        if (out[d] != x.shape[d]) ctx.fail("linear resize only scales the last two axes");

    struct Tap {
        std::int64_t lo, hi;
        float w_hi;
    };
    auto taps = [&](std::size_t d) {
        std::vector<Tap> t(static_cast<std::size_t>(out[d]));
        for (std::int64_t o = 0; o < out[d]; ++o) {
            const float c = std::clamp(source_coord(d, o), 0.0f, static_cast<float>(x.shape[d] - 1));
            const auto lo = static_cast<std::int64_t>(std::floor(c));
            t[static_cast<std::size_t>(o)] = {lo, std::min(lo + 1, x.shape[d] - 1), c - static_cast<float>(lo)};
        }
        return t;
    };
    const auto ty = taps(R - 2), tx = taps(R - 1);
    const std::int64_t H = x.shape[R - 2], W = x.shape[R - 1], OH = out[R - 2], OW = out[R - 1];
    const std::int64_t planes = x.size() / std::max<std::int64_t>(H * W, 1);
    Tensor y = Tensor::floats(out);
    for (std::int64_t p = 0; p < planes; ++p) {
        const float* src = x.f.data() + p * H * W;
        float* dst = y.f.data() + p * OH * OW;
        for (std::int64_t oy = 0; oy < OH; ++oy) {
            const Tap& a = ty[static_cast<std::size_t>(oy)];
            for (std::int64_t ox = 0; ox < OW; ++ox) {
                const Tap& b = tx[static_cast<std::size_t>(ox)];
                const float top = src[a.lo * W + b.lo] * (1.0f - b.w_hi) + src[a.lo * W + b.hi] * b.w_hi;
                const float bottom = src[a.hi * W + b.lo] * (1.0f - b.w_hi) + src[a.hi * W + b.hi] * b.w_hi;
                dst[oy * OW + ox] = top * (1.0f - a.w_hi) + bottom * a.w_hi;
            }
        }
    }
    return {y};
}

inline std::vector<Tensor> resize(const OpContext& ctx) {
    const Tensor& x = ctx.input(0);
    std::vector<float> scales;
    Shape sizes;
    std::string transform = ctx.node.attr_s("coordinate_transformation_mode", "half_pixel");
    if (ctx.opset < 11) {
        scales = ctx.input(1).as_floats();
        transform = "asymmetric";
    } else {
        if (ctx.has(2) && ctx.input(2).size() > 0) scales = ctx.input(2).as_floats();
        if (ctx.has(3) && ctx.input(3).size() > 0) sizes = ctx.input(3).as_ints();
        if (scales.empty() && sizes.empty()) ctx.fail("needs scales or sizes");
    }
    if (ctx.node.attr_i("antialias", 0) != 0) ctx.fail("antialias is not supported");
    if (ctx.node.attr_ints("axes")) ctx.fail("the axes attribute is not supported");
    const std::string mode = ctx.node.attr_s("mode", "nearest");
    const std::string nearest = ctx.opset < 11 ? "floor" : ctx.node.attr_s("nearest_mode", "round_prefer_floor");
    return resize_impl(ctx, x, scales, sizes, mode, transform, nearest);
}

inline std::vector<Tensor> upsample(const OpContext& ctx) {
    std::vector<float> scales;
    if (ctx.has(1)) scales = ctx.input(1).as_floats();
    else if (const auto* a = ctx.node.attr("scales")) scales = a->floats;
    if (scales.empty()) ctx.fail("needs scales");
    return resize_impl(ctx, ctx.input(0), scales, {}, ctx.node.attr_s("mode", "nearest"), "asymmetric", "floor");
}

// ---- shape manipulation ------------------------------------------------

inline std::vector<Tensor> reshape(const OpContext& ctx) {
    Tensor t = ctx.input(0);
    const auto req = ctx.input(1).as_ints();
    const bool allow_zero = ctx.node.attr_i("allowzero", 0) != 0;
    Shape out(req.size());
    std::int64_t known = 1;
    int infer = -1;
    for (std::size_t d = 0; d < req.size(); ++d) {
        if (req[d] == -1) {
            if (infer >= 0) ctx.fail("more than one -1 in target shape");
            infer = static_cast<int>(d);
            continue;
        }
        if (req[d] == 0 && !allow_zero) {
            if (d >= t.rank()) ctx.fail("0 refers past the input rank");
            out[d] = t.shape[d];
        } else {
            out[d] = req[d];
        }
        known *= out[d];
    }
    if (infer >= 0) {
        if (known == 0 || t.size() % known != 0) ctx.fail("cannot infer -1 for " + shape_string(t.shape));
        out[static_cast<std::size_t>(infer)] = t.size() / known;
    }
    if (numel(out) != t.size()) ctx.fail("cannot reshape " + shape_string(t.shape) + " to " + shape_string(out));
    t.shape = out;
    return {t};
}

inline std::vector<Tensor> flatten(const OpContext& ctx) {
    Tensor t = ctx.input(0);
    const std::int64_t r = static_cast<std::int64_t>(t.rank());
    std::int64_t axis = ctx.node.attr_i("axis", 1);
    if (axis < 0) axis += r;
    if (axis < 0 || axis > r) ctx.fail("axis out of range");
    std::int64_t outer = 1;
    for (std::int64_t d = 0; d < axis; ++d) outer *= t.shape[static_cast<std::size_t>(d)];
    t.shape = {outer, outer ? t.size() / outer : 0};
    return {t};
}

inline std::vector<Tensor> transpose(const OpContext& ctx) {
    const Tensor& x = ctx.input(0);
    std::vector<std::int64_t> perm = detail::ints_or(ctx.node.attr_ints("perm"), 0, 0);
    if (perm.empty()) {
        perm.resize(x.rank());
        for (std::size_t d = 0; d < perm.size(); ++d) perm[d] = static_cast<std::int64_t>(x.rank() - 1 - d);
    }
    if (perm.size() != x.rank()) ctx.fail("perm rank does not match input");
    const auto st = strides_of(x.shape);
    Shape out(perm.size());
    std::vector<std::int64_t> ost(perm.size());
    for (std::size_t d = 0; d < perm.size(); ++d) {
        const std::size_t src = norm_axis(perm[d], x.rank());
        out[d] = x.shape[src];
        ost[d] = st[src];
    }
    return {detail::strided_copy(x, out, ost)};
}

inline std::vector<std::int64_t> axes_input(const OpContext& ctx, std::size_t k, const char* attr) {
    if (ctx.has(k)) return ctx.input(k).as_ints();
    return detail::ints_or(ctx.node.attr_ints(attr), 0, 0);
}

inline std::vector<Tensor> squeeze(const OpContext& ctx) {
    Tensor t = ctx.input(0);
    const auto axes = axes_input(ctx, 1, "axes");
    std::vector<char> drop(t.rank(), 0);
    for (auto a : axes) {
        const auto d = norm_axis(a, t.rank());
        if (t.shape[d] != 1) ctx.fail("cannot squeeze a dimension that is not 1");
        drop[d] = 1;
    }
    Shape out;
    for (std::size_t d = 0; d < t.rank(); ++d)
        if (!(axes.empty() ? t.shape[d] == 1 : drop[d])) out.push_back(t.shape[d]);
    t.shape = out;
    return {t};
}

inline std::vector<Tensor> unsqueeze(const OpContext& ctx) {
    Tensor t = ctx.input(0);
    const auto axes = axes_input(ctx, 1, "axes");
    const std::size_t R = t.rank() + axes.size();
    std::vector<char> insert(R, 0);
    for (auto a : axes) {
        const auto d = norm_axis(a, R);
        if (insert[d]) ctx.fail("repeated axis");
        insert[d] = 1;
    }
    Shape out;
    std::size_t src = 0;
    for (std::size_t d = 0; d < R; ++d) out.push_back(insert[d] ? 1 : t.shape[src++]);
    t.shape = out;
    return {t};
}

inline std::vector<Tensor> concat(const OpContext& ctx) {
    std::vector<const Tensor*> parts;
    for (std::size_t k = 0; k < ctx.in.size(); ++k)
        if (ctx.has(k)) parts.push_back(ctx.in[k]);
    if (parts.empty()) ctx.fail("no inputs");
    const Tensor& first = *parts[0];
    const std::size_t axis = norm_axis(ctx.node.attr_i("axis", 0), first.rank());
    Shape out = first.shape;
    out[axis] = 0;
    for (const Tensor* p : parts) {
        if (p->rank() != first.rank() || p->dtype != first.dtype) ctx.fail("inputs differ in rank or type");
        for (std::size_t d = 0; d < out.size(); ++d)
            if (d != axis && p->shape[d] != first.shape[d]) ctx.fail("inputs differ outside the concat axis");
        out[axis] += p->shape[axis];
    }
    std::int64_t outer = 1, inner = 1;
    for (std::size_t d = 0; d < axis; ++d) outer *= out[d];
    for (std::size_t d = axis + 1; d < out.size(); ++d) inner *= out[d];
    Tensor t = detail::like(first, out);
    detail::with_data(t, [&](auto& dst) {
        std::int64_t at = 0;
        const std::int64_t row = out[axis] * inner;
        for (const Tensor* p : parts) {
            const auto& src = detail::storage<std::decay_t<decltype(dst)>>(*p);
            const std::int64_t chunk = p->shape[axis] * inner;
            for (std::int64_t o = 0; o < outer; ++o)
                std::copy_n(src.begin() + o * chunk, chunk, dst.begin() + o * row + at);
            at += chunk;
        }
    });
    return {t};
}

inline Tensor slice_axis(const Tensor& x, std::size_t axis, std::int64_t start, std::int64_t len) {
    Shape out = x.shape;
    out[axis] = len;
    const auto st = strides_of(x.shape);
    return detail::strided_copy(x, out, st, start * st[axis]);
}

inline std::vector<Tensor> split(const OpContext& ctx) {
    const Tensor& x = ctx.input(0);
    const std::size_t axis = norm_axis(ctx.node.attr_i("axis", 0), x.rank());
    const std::size_t parts = ctx.node.outputs.size();
    std::vector<std::int64_t> sizes = ctx.has(1) ? ctx.input(1).as_ints() : detail::ints_or(ctx.node.attr_ints("split"), 0, 0);
    if (sizes.empty()) {
        const std::int64_t dim = x.shape[axis];
        const std::int64_t each = (dim + static_cast<std::int64_t>(parts) - 1) / static_cast<std::int64_t>(parts);
        if (ctx.opset < 18 && dim % static_cast<std::int64_t>(parts) != 0) ctx.fail("axis not divisible into equal parts");
        for (std::size_t k = 0; k < parts; ++k)
            sizes.push_back(std::min(each, dim - each * static_cast<std::int64_t>(k)));
    }
    if (sizes.size() != parts || std::accumulate(sizes.begin(), sizes.end(), std::int64_t{0}) != x.shape[axis])
        ctx.fail("split sizes do not match the axis");
    std::vector<Tensor> out;
    std::int64_t at = 0;
    for (auto s : sizes) {
        out.push_back(slice_axis(x, axis, at, s));
        at += s;
    }
    return out;
}

inline std::vector<Tensor> slice(const OpContext& ctx) {
    const Tensor& x = ctx.input(0);
    std::vector<std::int64_t> starts, ends, axes, steps;
    if (ctx.opset < 10) {
        starts = detail::ints_or(ctx.node.attr_ints("starts"), 0, 0);
        ends = detail::ints_or(ctx.node.attr_ints("ends"), 0, 0);
        axes = detail::ints_or(ctx.node.attr_ints("axes"), 0, 0);
    } else {
        starts = ctx.input(1).as_ints();
        ends = ctx.input(2).as_ints();
        if (ctx.has(3)) axes = ctx.input(3).as_ints();
        if (ctx.has(4)) steps = ctx.input(4).as_ints();
    }
    if (axes.empty())
        for (std::size_t k = 0; k < starts.size(); ++k) axes.push_back(static_cast<std::int64_t>(k));
    if (steps.empty()) steps.assign(starts.size(), 1);
    if (ends.size() != starts.size() || axes.size() != starts.size() || steps.size() != starts.size())
        ctx.fail("starts/ends/axes/steps lengths differ");
    const auto st = strides_of(x.shape);
    Shape out = x.shape;
    std::vector<std::int64_t> ost = st;
    std::int64_t base = 0;
    for (std::size_t k = 0; k < starts.size(); ++k) {
        const std::size_t d = norm_axis(axes[k], x.rank());
        const std::int64_t dim = x.shape[d], step = steps[k];
        if (step == 0) ctx.fail("step cannot be 0");
        std::int64_t s = starts[k], e = ends[k];
        if (s < 0) s += dim;
        if (e < 0) e += dim;
        if (step > 0) {
            s = std::clamp<std::int64_t>(s, 0, dim);
            e = std::clamp<std::int64_t>(e, 0, dim);
        } else {
            s = std::clamp<std::int64_t>(s, 0, dim - 1);
            e = std::clamp<std::int64_t>(e, -1, dim - 1);
        }
        const std::int64_t len = step > 0 ? std::max<std::int64_t>(0, (e - s + step - 1) / step)
                                          : std::max<std::int64_t>(0, (s - e + (-step) - 1) / (-step));
        out[d] = len;
        ost[d] = st[d] * step;
        base += s * st[d];
    }
    if (numel(out) == 0) return {detail::like(x, out)};
    return {detail::strided_copy(x, out, ost, base)};
}

inline std::vector<Tensor> gather(const OpContext& ctx) {
    const Tensor &x = ctx.input(0), &idx = ctx.input(1);
    const std::size_t axis = norm_axis(ctx.node.attr_i("axis", 0), x.rank());
    const auto ids = idx.as_ints();
    Shape out(x.shape.begin(), x.shape.begin() + static_cast<std::ptrdiff_t>(axis));
    out.insert(out.end(), idx.shape.begin(), idx.shape.end());
    out.insert(out.end(), x.shape.begin() + static_cast<std::ptrdiff_t>(axis) + 1, x.shape.end());
    std::int64_t outer = 1, inner = 1;
    for (std::size_t d = 0; d < axis; ++d) outer *= x.shape[d];
    for (std::size_t d = axis + 1; d < x.rank(); ++d) inner *= x.shape[d];
    const std::int64_t dim = x.shape[axis];
    Tensor t = detail::like(x, out);
    detail::with_data(t, [&](auto& dst) {
        const auto& src = detail::storage<std::decay_t<decltype(dst)>>(x);
        std::size_t o = 0;
        for (std::int64_t a = 0; a < outer; ++a) {
            for (auto id : ids) {
                if (id < -dim || id >= dim) ctx.fail("index out of range");
                const std::int64_t j = id < 0 ? id + dim : id;
                const auto from = static_cast<std::size_t>((a * dim + j) * inner);
                std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(from), inner, dst.begin() + static_cast<std::ptrdiff_t>(o));
                o += static_cast<std::size_t>(inner);
            }
        }
    });
    return {t};
}

inline std::vector<Tensor> expand(const OpContext& ctx) {
    const Tensor& x = ctx.input(0);
    const Shape out = detail::broadcast_shape(x.shape, ctx.input(1).as_ints());
    return {detail::strided_copy(x, out, detail::aligned_strides(out, x.shape))};
}

inline std::vector<Tensor> tile(const OpContext& ctx) {
    const Tensor& x = ctx.input(0);
    const auto reps = ctx.input(1).as_ints();
    if (reps.size() != x.rank()) ctx.fail("repeats length must equal rank");
    Shape out = x.shape;
    for (std::size_t d = 0; d < out.size(); ++d) out[d] *= reps[d];
    Tensor t = detail::like(x, out);
    const auto in_st = strides_of(x.shape);
    std::vector<std::int64_t> idx(out.size(), 0);
    for (std::int64_t o = 0; o < t.size(); ++o) {
        std::int64_t src = 0;
        for (std::size_t d = 0; d < out.size(); ++d) src += (idx[d] % x.shape[d]) * in_st[d];
        if (t.is_float()) t.f[static_cast<std::size_t>(o)] = x.f[static_cast<std::size_t>(src)];
        else t.i[static_cast<std::size_t>(o)] = x.i[static_cast<std::size_t>(src)];
        for (std::size_t d = out.size(); d-- > 0;) {
            if (++idx[d] < out[d]) break;
            idx[d] = 0;
        }
    }
    return {t};
}

inline std::vector<Tensor> shape_op(const OpContext& ctx) {
    const Tensor& x = ctx.input(0);
    const auto r = static_cast<std::int64_t>(x.rank());
    std::int64_t start = ctx.node.attr_i("start", 0), end = ctx.node.attr_i("end", r);
    if (start < 0) start += r;
    if (end < 0) end += r;
    start = std::clamp<std::int64_t>(start, 0, r);
    end = std::clamp<std::int64_t>(end, start, r);
    std::vector<std::int64_t> dims(x.shape.begin() + start, x.shape.begin() + end);
    const auto n = static_cast<std::int64_t>(dims.size());
    return {Tensor::ints({n}, std::move(dims))};
}

inline std::vector<Tensor> size_op(const OpContext& ctx) { return {Tensor::ints({}, {ctx.input(0).size()})}; }

inline std::vector<Tensor> constant(const OpContext& ctx) {
    const Node& n = ctx.node;
    if (const auto* a = n.attr("value")) return {a->t};
    if (const auto* a = n.attr("value_float")) return {Tensor::floats({}, std::vector<float>{a->f})};
    if (const auto* a = n.attr("value_floats")) return {Tensor::floats({static_cast<std::int64_t>(a->floats.size())}, a->floats)};
    if (const auto* a = n.attr("value_int")) return {Tensor::ints({}, {a->i})};
    if (const auto* a = n.attr("value_ints")) return {Tensor::ints({static_cast<std::int64_t>(a->ints.size())}, a->ints)};
    ctx.fail("unsupported constant attribute");
}

inline std::vector<Tensor> constant_of_shape(const OpContext& ctx) {
    const Shape shape = ctx.input(0).as_ints();
    Tensor fill = Tensor::floats({1}, std::vector<float>{0.0f});
    if (const auto* a = ctx.node.attr("value")) fill = a->t;
    Tensor t = detail::like(fill, shape);
    if (t.is_float()) std::fill(t.f.begin(), t.f.end(), fill.f.at(0));
    else std::fill(t.i.begin(), t.i.end(), fill.i.at(0));
    return {t};
}

inline std::vector<Tensor> range(const OpContext& ctx) {
    const Tensor &s = ctx.input(0), &l = ctx.input(1), &d = ctx.input(2);
    const double start = s.value(0), limit = l.value(0), delta = d.value(0);
    if (delta == 0.0) ctx.fail("delta cannot be 0");
    const auto n = static_cast<std::int64_t>(std::max(0.0, std::ceil((limit - start) / delta)));
    Tensor t = detail::like(s, {n});
    for (std::int64_t k = 0; k < n; ++k) {
        if (t.is_float()) t.f[static_cast<std::size_t>(k)] = static_cast<float>(start + static_cast<double>(k) * delta);
        else t.i[static_cast<std::size_t>(k)] = s.i[0] + k * d.i[0];
    }
    return {t};
}

inline std::vector<Tensor> pad(const OpContext& ctx) {
    const Tensor& x = ctx.input(0);
    if (ctx.node.attr_s("mode", "constant") != "constant") ctx.fail("only constant padding is supported");
    std::vector<std::int64_t> pads = ctx.opset < 11 ? detail::ints_or(ctx.node.attr_ints("pads"), 0, 0) : ctx.input(1).as_ints();
    const double value = ctx.opset < 11 ? ctx.node.attr_f("value", 0.0f) : (ctx.has(2) ? ctx.input(2).value(0) : 0.0);
    const std::size_t R = x.rank();
    if (ctx.has(3)) {
        const auto axes = ctx.input(3).as_ints();
        std::vector<std::int64_t> full(2 * R, 0);
        for (std::size_t k = 0; k < axes.size(); ++k) {
            const auto d = norm_axis(axes[k], R);
            full[d] = pads[k];
            full[d + R] = pads[k + axes.size()];
        }
        pads = full;
    }
    if (pads.size() != 2 * R) ctx.fail("pads length must be twice the rank");
    Shape out = x.shape;
    for (std::size_t d = 0; d < R; ++d) {
        if (pads[d] < 0 || pads[d + R] < 0) ctx.fail("negative pads are not supported");
        out[d] += pads[d] + pads[d + R];
    }
    Tensor t = detail::like(x, out);
    if (t.is_float()) std::fill(t.f.begin(), t.f.end(), static_cast<float>(value));
    else std::fill(t.i.begin(), t.i.end(), static_cast<std::int64_t>(value));
    const auto ost = strides_of(out);
    std::vector<std::int64_t> idx(R, 0);
    for (std::int64_t k = 0; k < x.size(); ++k) {
        std::int64_t dst = 0;
        for (std::size_t d = 0; d < R; ++d) dst += (idx[d] + pads[d]) * ost[d];
        if (t.is_float()) t.f[static_cast<std::size_t>(dst)] = x.f[static_cast<std::size_t>(k)];
        else t.i[static_cast<std::size_t>(dst)] = x.i[static_cast<std::size_t>(k)];
        for (std::size_t d = R; d-- > 0;) {
            if (++idx[d] < x.shape[d]) break;
            idx[d] = 0;
        }
    }
    return {t};
}

// ---- reductions --------------------------------------------------------

enum class Reduce { Sum, Mean, Max, Min, Prod };

template <Reduce Kind>
std::vector<Tensor> reduce(const OpContext& ctx) {
    const Tensor& x = ctx.input(0);
    const bool axes_as_input = ctx.opset >= 18 || (Kind == Reduce::Sum && ctx.opset >= 13);
    const auto axes = axes_as_input ? (ctx.has(1) ? ctx.input(1).as_ints() : std::vector<std::int64_t>{})
                                    : detail::ints_or(ctx.node.attr_ints("axes"), 0, 0);
    if (axes.empty() && ctx.node.attr_i("noop_with_empty_axes", 0) != 0) return {x};
    std::vector<char> reduced(x.rank(), axes.empty() ? 1 : 0);
    for (auto a : axes) reduced[norm_axis(a, x.rank())] = 1;
    Shape kept = x.shape;
    for (std::size_t d = 0; d < kept.size(); ++d)
        if (reduced[d]) kept[d] = 1;
    Tensor acc = Tensor::floats(kept);
    std::vector<double> sum(static_cast<std::size_t>(numel(kept)), 0.0);
    double init = 0.0;
    if constexpr (Kind == Reduce::Max) init = -std::numeric_limits<double>::infinity();
    if constexpr (Kind == Reduce::Min) init = std::numeric_limits<double>::infinity();
    if constexpr (Kind == Reduce::Prod) init = 1.0;
    std::fill(sum.begin(), sum.end(), init);
    detail::strided_loop<2>(x.shape, {strides_of(x.shape), detail::aligned_strides(x.shape, kept)},
                            [&](std::size_t, const std::array<std::int64_t, 2>& off) {
                                const double v = x.value(static_cast<std::size_t>(off[0]));
                                double& s = sum[static_cast<std::size_t>(off[1])];
                                if constexpr (Kind == Reduce::Max) s = std::max(s, v);
                                else if constexpr (Kind == Reduce::Min) s = std::min(s, v);
                                else if constexpr (Kind == Reduce::Prod) s *= v;
                                else s += v;
                            });
    const double count = static_cast<double>(x.size()) / static_cast<double>(std::max<std::int64_t>(numel(kept), 1));
    Shape out;
    if (ctx.node.attr_i("keepdims", 1) != 0) out = kept;
    else
        for (std::size_t d = 0; d < kept.size(); ++d)
            if (!reduced[d]) out.push_back(kept[d]);
    Tensor t = detail::like(x, out);
    for (std::size_t k = 0; k < sum.size(); ++k) {
        const double v = Kind == Reduce::Mean ? sum[k] / count : sum[k];
        if (t.is_float()) t.f[k] = static_cast<float>(v);
        else t.i[k] = static_cast<std::int64_t>(v);
    }
    return {t};
}

template <bool IsMax>
std::vector<Tensor> arg_reduce(const OpContext& ctx) {
    const Tensor& x = ctx.input(0);
    const std::size_t axis = norm_axis(ctx.node.attr_i("axis", 0), x.rank());
    const bool last = ctx.node.attr_i("select_last_index", 0) != 0;
    std::int64_t outer = 1, inner = 1;
    for (std::size_t d = 0; d < axis; ++d) outer *= x.shape[d];
    for (std::size_t d = axis + 1; d < x.rank(); ++d) inner *= x.shape[d];
    const std::int64_t dim = x.shape[axis];
    Shape out = x.shape;
    out[axis] = 1;
    if (ctx.node.attr_i("keepdims", 1) == 0) out.erase(out.begin() + static_cast<std::ptrdiff_t>(axis));
    std::vector<std::int64_t> best(static_cast<std::size_t>(outer * inner), 0);
    for (std::int64_t o = 0; o < outer; ++o) {
        for (std::int64_t j = 0; j < inner; ++j) {
            double bv = x.value(static_cast<std::size_t>(o * dim * inner + j));
            std::int64_t bi = 0;
            for (std::int64_t a = 1; a < dim; ++a) {
                const double v = x.value(static_cast<std::size_t>((o * dim + a) * inner + j));
                const bool better = IsMax ? (last ? v >= bv : v > bv) : (last ? v <= bv : v < bv);
                if (better) {
                    bv = v;
                    bi = a;
                }
            }
            best[static_cast<std::size_t>(o * inner + j)] = bi;
        }
    }
    return {Tensor::ints(out, std::move(best))};
}

// ---- linear algebra ----------------------------------------------------

inline std::vector<Tensor> matmul(const OpContext& ctx) {
    Tensor a = ctx.input(0), b = ctx.input(1);
    if (!a.is_float() || !b.is_float()) ctx.fail("expects float tensors");
    const bool a_vec = a.rank() == 1, b_vec = b.rank() == 1;
    if (a_vec) a.shape.insert(a.shape.begin(), 1);
    if (b_vec) b.shape.push_back(1);
    if (a.rank() < 2 || b.rank() < 2) ctx.fail("operands must have rank >= 1");
    const std::int64_t M = a.shape[a.rank() - 2], K = a.shape[a.rank() - 1], N = b.shape[b.rank() - 1];
    if (b.shape[b.rank() - 2] != K) ctx.fail("inner dimensions differ: " + shape_string(a.shape) + " x " + shape_string(b.shape));
    const Shape ab(a.shape.begin(), a.shape.end() - 2), bb(b.shape.begin(), b.shape.end() - 2);
    const Shape batch = detail::broadcast_shape(ab, bb);
    Shape out = batch;
    out.push_back(M);
    out.push_back(N);
    Tensor y = Tensor::floats(out);
    using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    auto ast = detail::aligned_strides(batch, ab), bst = detail::aligned_strides(batch, bb);
    for (auto& s : ast) s *= M * K;
    for (auto& s : bst) s *= K * N;
    detail::strided_loop<2>(batch, {ast, bst}, [&](std::size_t o, const std::array<std::int64_t, 2>& off) {
        Eigen::Map<const RowMat> am(a.f.data() + off[0], M, K);
        Eigen::Map<const RowMat> bm(b.f.data() + off[1], K, N);
        Eigen::Map<RowMat> ym(y.f.data() + static_cast<std::int64_t>(o) * M * N, M, N);
        ym.noalias() = am * bm;
    });
    if (a_vec) y.shape.erase(y.shape.end() - 2);
    if (b_vec) y.shape.pop_back();
    return {y};
}

inline std::vector<Tensor> gemm(const OpContext& ctx) {
    const Tensor &a = ctx.input(0), &b = ctx.input(1);
    if (a.rank() != 2 || b.rank() != 2) ctx.fail("operands must be matrices");
    const bool ta = ctx.node.attr_i("transA", 0) != 0, tb = ctx.node.attr_i("transB", 0) != 0;
    const float alpha = ctx.node.attr_f("alpha", 1.0f), beta = ctx.node.attr_f("beta", 1.0f);
    using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    Eigen::Map<const RowMat> am(a.f.data(), a.shape[0], a.shape[1]);
    Eigen::Map<const RowMat> bm(b.f.data(), b.shape[0], b.shape[1]);
    RowMat y = alpha * ((ta ? RowMat(am.transpose()) : RowMat(am)) * (tb ? RowMat(bm.transpose()) : RowMat(bm)));
    Tensor out = Tensor::floats({y.rows(), y.cols()}, std::vector<float>(y.data(), y.data() + y.size()));
    if (ctx.has(2) && beta != 0.0f) {
        Tensor c = ctx.input(2);
        for (float& v : c.f) v *= beta;
        out = arith(ctx, out, c, [](auto p, auto q) { return p + q; });
        if (out.shape != Shape{y.rows(), y.cols()}) ctx.fail("bias does not broadcast to the output");
    }
    return {out};
}

template <bool Log>
std::vector<Tensor> softmax(const OpContext& ctx) {
    Tensor t = ctx.input(0);
    if (!t.is_float()) ctx.fail("expects a float tensor");
    const bool legacy = ctx.opset < 13;
    const std::size_t axis = norm_axis(ctx.node.attr_i("axis", legacy ? 1 : -1), t.rank());
    std::int64_t outer = 1, dim = 1, inner = 1;
    for (std::size_t d = 0; d < t.rank(); ++d) {
        if (d < axis) outer *= t.shape[d];
        else if (d == axis || legacy) dim *= t.shape[d];
        else inner *= t.shape[d];
    }
    for (std::int64_t o = 0; o < outer; ++o) {
        for (std::int64_t j = 0; j < inner; ++j) {
            float* base = t.f.data() + o * dim * inner + j;
            float peak = -std::numeric_limits<float>::infinity();
            for (std::int64_t a = 0; a < dim; ++a) peak = std::max(peak, base[a * inner]);
            double total = 0.0;
            for (std::int64_t a = 0; a < dim; ++a) total += std::exp(static_cast<double>(base[a * inner] - peak));
            for (std::int64_t a = 0; a < dim; ++a) {
                float& v = base[a * inner];
                v = Log ? static_cast<float>(v - peak - std::log(total)) : static_cast<float>(std::exp(static_cast<double>(v - peak)) / total);
            }
        }
    }
    return {t};
}

}  // namespace ops

/// Operator table for the default domain.
inline const std::unordered_map<std::string, Kernel>& kernel_table() {
    static const std::unordered_map<std::string, Kernel> table{
        {"Abs", ops::abs_op},
        {"Add", ops::add},
        {"And", ops::and_op},
        {"ArgMax", ops::arg_reduce<true>},
        {"ArgMin", ops::arg_reduce<false>},
        {"AveragePool", ops::average_pool},
        {"BatchNormalization", ops::batch_norm},
        {"Cast", ops::cast},
        {"Ceil", ops::ceil_op},
        {"Clip", ops::clip},
        {"Concat", ops::concat},
        {"Constant", ops::constant},
        {"ConstantOfShape", ops::constant_of_shape},
        {"Conv", ops::conv},
        {"Div", ops::div},
        {"Dropout", ops::identity},
        {"Elu", ops::elu},
        {"Equal", ops::equal},
        {"Erf", ops::erf_op},
        {"Exp", ops::exp_op},
        {"Expand", ops::expand},
        {"Flatten", ops::flatten},
        {"Floor", ops::floor_op},
        {"Gather", ops::gather},
        {"Gemm", ops::gemm},
        {"GlobalAveragePool", ops::global_average_pool},
        {"GlobalMaxPool", ops::global_max_pool},
        {"Greater", ops::greater},
        {"GreaterOrEqual", ops::greater_equal},
        {"HardSigmoid", ops::hard_sigmoid},
        {"HardSwish", ops::hard_swish},
        {"Identity", ops::identity},
        {"LeakyRelu", ops::leaky_relu},
        {"Less", ops::less},
        {"LessOrEqual", ops::less_equal},
        {"Log", ops::log_op},
        {"LogSoftmax", ops::softmax<true>},
        {"MatMul", ops::matmul},
        {"Max", ops::max_op},
        {"MaxPool", ops::max_pool},
        {"Min", ops::min_op},
        {"Mish", ops::mish},
        {"Mul", ops::mul},
        {"Neg", ops::neg},
        {"Not", ops::not_op},
        {"Or", ops::or_op},
        {"Pad", ops::pad},
        {"Pow", ops::pow_op},
        {"Range", ops::range},
        {"Reciprocal", ops::reciprocal},
        {"ReduceMax", ops::reduce<ops::Reduce::Max>},
        {"ReduceMean", ops::reduce<ops::Reduce::Mean>},
        {"ReduceMin", ops::reduce<ops::Reduce::Min>},
        {"ReduceProd", ops::reduce<ops::Reduce::Prod>},
        {"ReduceSum", ops::reduce<ops::Reduce::Sum>},
        {"Relu", ops::relu},
        {"Reshape", ops::reshape},
        {"Resize", ops::resize},
        {"Shape", ops::shape_op},
        {"Sigmoid", ops::sigmoid},
        {"Size", ops::size_op},
        {"Slice", ops::slice},
        {"Softmax", ops::softmax<false>},
        {"Softplus", ops::softplus},
        {"Split", ops::split},
        {"Sqrt", ops::sqrt_op},
        {"Squeeze", ops::squeeze},
        {"Sub", ops::sub},
        {"Sum", ops::sum_op},
        {"Tanh", ops::tanh_op},
        {"Tile", ops::tile},
        {"Transpose", ops::transpose},
        {"Unsqueeze", ops::unsqueeze},
        {"Upsample", ops::upsample},
        {"Where", ops::where},
    };
    return table;
}

}  // namespace clusinit::onnx
