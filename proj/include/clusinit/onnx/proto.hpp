#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "clusinit/onnx/tensor.hpp"

namespace clusinit::onnx {

/// Minimal protobuf wire-format reader, enough for the model file schema.
class WireReader {
public:
    explicit WireReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    [[nodiscard]] bool done() const { return pos_ >= bytes_.size(); }

    std::uint64_t varint() {
        std::uint64_t v = 0;
        for (int shift = 0; shift < 64; shift += 7) {
            const std::uint8_t b = byte();
            v |= static_cast<std::uint64_t>(b & 0x7f) << shift;
            if (!(b & 0x80)) return v;
        }
        throw Error("onnx: malformed varint");
    }

    /// Returns (field number, wire type).
    std::pair<int, int> tag() {
        const std::uint64_t t = varint();
        const int field = static_cast<int>(t >> 3);
        if (field == 0) throw Error("onnx: invalid field number");
        return {field, static_cast<int>(t & 7)};
    }

    std::uint32_t fixed32() {
        std::uint32_t v = 0;
        for (int k = 0; k < 4; ++k) v |= static_cast<std::uint32_t>(byte()) << (8 * k);
        return v;
    }
    std::uint64_t fixed64() {
        std::uint64_t v = 0;
        for (int k = 0; k < 8; ++k) v |= static_cast<std::uint64_t>(byte()) << (8 * k);
        return v;
    }
    float f32() { return std::bit_cast<float>(fixed32()); }
    double f64() { return std::bit_cast<double>(fixed64()); }

    std::span<const std::uint8_t> bytes() {
        const std::uint64_t n = varint();
        if (n > bytes_.size() - pos_) throw Error("onnx: truncated field");
        auto out = bytes_.subspan(pos_, static_cast<std::size_t>(n));
        pos_ += static_cast<std::size_t>(n);
        return out;
    }
    std::string string() {
        const auto b = bytes();
        return {b.begin(), b.end()};
    }
    WireReader message() { return WireReader(bytes()); }

    void skip(int wire_type) {
        switch (wire_type) {
            case 0: varint(); break;
            case 1: advance(8); break;
            case 2: bytes(); break;
            case 5: advance(4); break;
            default: throw Error("onnx: unsupported wire type " + std::to_string(wire_type));
        }
    }

    /// Repeated integer field, packed or not.
    void ints_into(int wire_type, std::vector<std::int64_t>& out) {
        if (wire_type == 2) {
            WireReader packed = message();
            while (!packed.done()) out.push_back(static_cast<std::int64_t>(packed.varint()));
        } else {
            out.push_back(static_cast<std::int64_t>(varint()));
        }
    }
    /// Repeated float field, packed or not.
    void floats_into(int wire_type, std::vector<float>& out) {
        if (wire_type == 2) {
            WireReader packed = message();
            while (!packed.done()) out.push_back(packed.f32());
        } else {
            out.push_back(f32());
        }
    }
    void doubles_into(int wire_type, std::vector<double>& out) {
        if (wire_type == 2) {
            WireReader packed = message();
            while (!packed.done()) out.push_back(packed.f64());
        } else {
            out.push_back(f64());
        }
    }

private:
    std::uint8_t byte() {
        if (pos_ >= bytes_.size()) throw Error("onnx: truncated message");
        return bytes_[pos_++];
    }
    void advance(std::size_t n) {
        if (n > bytes_.size() - pos_) throw Error("onnx: truncated message");
        pos_ += n;
    }

    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

/// Element type codes of the interchange format.
namespace elem {
inline constexpr int kFloat = 1, kUint8 = 2, kInt8 = 3, kUint16 = 4, kInt16 = 5, kInt32 = 6, kInt64 = 7, kBool = 9,
                     kFloat16 = 10, kDouble = 11, kUint32 = 12, kUint64 = 13;
}

inline float half_to_float(std::uint16_t h) {
    const int sign = (h >> 15) & 1, exp = (h >> 10) & 0x1f, mant = h & 0x3ff;
    float v;
    if (exp == 0) v = std::ldexp(static_cast<float>(mant), -24);
    else if (exp == 31) v = mant ? std::numeric_limits<float>::quiet_NaN() : std::numeric_limits<float>::infinity();
    else v = std::ldexp(static_cast<float>(mant + 1024), exp - 25);
    return sign ? -v : v;
}

struct NamedTensor {
    std::string name;
    Tensor tensor;
};

inline NamedTensor parse_tensor(WireReader r) {
    NamedTensor out;
    Shape dims;
    int data_type = elem::kFloat;
    std::vector<float> float_data;
    std::vector<std::int64_t> int_data;  // int32_data and int64_data share this
    std::vector<double> double_data;
    std::span<const std::uint8_t> raw;
    bool has_raw = false;
    while (!r.done()) {
        const auto [field, wt] = r.tag();
        switch (field) {
            case 1: r.ints_into(wt, dims); break;
            case 2: data_type = static_cast<int>(r.varint()); break;
            case 4: r.floats_into(wt, float_data); break;
            case 5: r.ints_into(wt, int_data); break;
            case 7: r.ints_into(wt, int_data); break;
            case 8: out.name = r.string(); break;
            case 9: raw = r.bytes(); has_raw = true; break;
            case 10: r.doubles_into(wt, double_data); break;
            case 14:
                if (r.varint() != 0) throw Error("onnx: external tensor data is not supported");
                break;
            default: r.skip(wt);
        }
    }
    for (auto d : dims)
        if (d < 0) throw Error("onnx: negative tensor dimension");
    const auto n = static_cast<std::size_t>(numel(dims));
    Tensor& t = out.tensor;
    t.shape = dims;

    auto read_raw = [&](std::size_t width, auto convert) {
        if (raw.size() != n * width) throw Error("onnx: raw tensor data has wrong size for " + out.name);
        for (std::size_t k = 0; k < n; ++k) convert(raw.data() + k * width);
    };
    auto le = [](const std::uint8_t* p, std::size_t width) {
        std::uint64_t v = 0;
        for (std::size_t b = 0; b < width; ++b) v |= static_cast<std::uint64_t>(p[b]) << (8 * b);
        return v;
    };

    switch (data_type) {
        case elem::kFloat:
        case elem::kDouble:
        case elem::kFloat16:
            t.dtype = DType::Float;
            if (has_raw) {
                t.f.reserve(n);
                if (data_type == elem::kFloat)
                    read_raw(4, [&](const std::uint8_t* p) { t.f.push_back(std::bit_cast<float>(static_cast<std::uint32_t>(le(p, 4)))); });
                else if (data_type == elem::kDouble)
                    read_raw(8, [&](const std::uint8_t* p) { t.f.push_back(static_cast<float>(std::bit_cast<double>(le(p, 8)))); });
                else
                    read_raw(2, [&](const std::uint8_t* p) { t.f.push_back(half_to_float(static_cast<std::uint16_t>(le(p, 2)))); });
            } else if (data_type == elem::kFloat) {
                t.f = std::move(float_data);
            } else if (data_type == elem::kDouble) {
                t.f.assign(double_data.begin(), double_data.end());
            } else {
                for (auto v : int_data) t.f.push_back(half_to_float(static_cast<std::uint16_t>(v)));
            }
            break;
        case elem::kInt64:
        case elem::kInt32:
        case elem::kInt16:
        case elem::kInt8:
        case elem::kUint8:
        case elem::kUint16:
        case elem::kUint32:
        case elem::kUint64:
        case elem::kBool: {
            t.dtype = data_type == elem::kBool ? DType::Bool : DType::Int64;
            if (has_raw) {
                std::size_t width = 1;
                bool is_signed = false;
                switch (data_type) {
                    case elem::kInt64: width = 8; is_signed = true; break;
                    case elem::kUint64: width = 8; break;
                    case elem::kInt32: width = 4; is_signed = true; break;
                    case elem::kUint32: width = 4; break;
                    case elem::kInt16: width = 2; is_signed = true; break;
                    case elem::kUint16: width = 2; break;
                    case elem::kInt8: is_signed = true; break;
                    default: break;
                }
                t.i.reserve(n);
                read_raw(width, [&](const std::uint8_t* p) {
                    std::uint64_t v = le(p, width);
                    if (is_signed && width < 8 && (v >> (8 * width - 1)) & 1) v |= ~std::uint64_t{0} << (8 * width);
                    t.i.push_back(static_cast<std::int64_t>(v));
                });
            } else {
                t.i = std::move(int_data);
                if (data_type == elem::kInt32 || data_type == elem::kInt16 || data_type == elem::kInt8)
                    for (auto& v : t.i) v = static_cast<std::int32_t>(v);
            }
            if (t.dtype == DType::Bool)
                for (auto& v : t.i) v = v != 0;
            break;
        }
        default: throw Error("onnx: unsupported tensor element type " + std::to_string(data_type));
    }
    t.check();
    return out;
}

enum class AttrType { Undefined = 0, Float = 1, Int = 2, String = 3, Tensor = 4, Graph = 5, Floats = 6, Ints = 7, Strings = 8 };

struct Attribute {
    std::string name;
    AttrType type = AttrType::Undefined;
    float f = 0.0f;
    std::int64_t i = 0;
    std::string s;
    Tensor t;
    std::vector<float> floats;
    std::vector<std::int64_t> ints;
    std::vector<std::string> strings;
};

inline Attribute parse_attribute(WireReader r) {
    Attribute a;
    while (!r.done()) {
        const auto [field, wt] = r.tag();
        switch (field) {
            case 1: a.name = r.string(); break;
            case 2: a.f = r.f32(); break;
            case 3: a.i = static_cast<std::int64_t>(r.varint()); break;
            case 4: a.s = r.string(); break;
            case 5: a.t = parse_tensor(r.message()).tensor; break;
            case 6: throw Error("onnx: graph-valued attributes (control flow) are not supported");
            case 7: r.floats_into(wt, a.floats); break;
            case 8: r.ints_into(wt, a.ints); break;
            case 9: a.strings.push_back(r.string()); break;
            case 20: a.type = static_cast<AttrType>(r.varint()); break;
            default: r.skip(wt);
        }
    }
    return a;
}

struct Node {
    std::string name, op_type, domain;
    std::vector<std::string> inputs, outputs;
    std::vector<Attribute> attributes;

    [[nodiscard]] const Attribute* attr(std::string_view key) const {
        for (const auto& a : attributes)
            if (a.name == key) return &a;
        return nullptr;
    }
    [[nodiscard]] std::int64_t attr_i(std::string_view key, std::int64_t fallback) const {
        const Attribute* a = attr(key);
        return a ? a->i : fallback;
    }
    [[nodiscard]] float attr_f(std::string_view key, float fallback) const {
        const Attribute* a = attr(key);
        return a ? a->f : fallback;
    }
    [[nodiscard]] std::string attr_s(std::string_view key, std::string fallback) const {
        const Attribute* a = attr(key);
        return a ? a->s : fallback;
    }
    [[nodiscard]] std::optional<std::vector<std::int64_t>> attr_ints(std::string_view key) const {
        const Attribute* a = attr(key);
        if (!a) return std::nullopt;
        return a->ints;
    }
};

inline Node parse_node(WireReader r) {
    Node n;
    while (!r.done()) {
        const auto [field, wt] = r.tag();
        switch (field) {
            case 1: n.inputs.push_back(r.string()); break;
            case 2: n.outputs.push_back(r.string()); break;
            case 3: n.name = r.string(); break;
            case 4: n.op_type = r.string(); break;
            case 5: n.attributes.push_back(parse_attribute(r.message())); break;
            case 7: n.domain = r.string(); break;
            default: r.skip(wt);
        }
    }
    return n;
}

/// Declared graph input or output. Unknown dimensions are -1.
struct ValueInfo {
    std::string name;
    int elem_type = 0;
    bool has_shape = false;
    Shape dims;
};

inline ValueInfo parse_value_info(WireReader r) {
    ValueInfo v;
    while (!r.done()) {
        const auto [field, wt] = r.tag();
        if (field == 1) {
            v.name = r.string();
        } else if (field == 2) {
            WireReader type = r.message();
            while (!type.done()) {
                const auto [tf, twt] = type.tag();
                if (tf != 1) {
                    type.skip(twt);
                    continue;
                }
                WireReader tensor = type.message();
                while (!tensor.done()) {
                    const auto [ef, ewt] = tensor.tag();
                    if (ef == 1) {
                        v.elem_type = static_cast<int>(tensor.varint());
                    } else if (ef == 2) {
                        v.has_shape = true;
                        WireReader shape = tensor.message();
                        while (!shape.done()) {
                            const auto [sf, swt] = shape.tag();
                            if (sf != 1) {
                                shape.skip(swt);
                                continue;
                            }
                            WireReader dim = shape.message();
                            std::int64_t value = -1;
                            while (!dim.done()) {
                                const auto [df, dwt] = dim.tag();
                                if (df == 1) value = static_cast<std::int64_t>(dim.varint());
                                else dim.skip(dwt);
                            }
                            v.dims.push_back(value);
                        }
                    } else {
                        tensor.skip(ewt);
                    }
                }
            }
        } else {
            r.skip(wt);
        }
    }
    return v;
}

struct Graph {
    std::string name;
    std::vector<Node> nodes;
    std::map<std::string, Tensor> initializers;
    std::vector<ValueInfo> inputs;  // excludes initializers
    std::vector<ValueInfo> outputs;
};

inline Graph parse_graph(WireReader r) {
    Graph g;
    std::vector<ValueInfo> declared;
    while (!r.done()) {
        const auto [field, wt] = r.tag();
        switch (field) {
            case 1: g.nodes.push_back(parse_node(r.message())); break;
            case 2: g.name = r.string(); break;
            case 5: {
                auto nt = parse_tensor(r.message());
                g.initializers[nt.name] = std::move(nt.tensor);
                break;
            }
            case 11: declared.push_back(parse_value_info(r.message())); break;
            case 12: g.outputs.push_back(parse_value_info(r.message())); break;
            default: r.skip(wt);
        }
    }
    for (auto& v : declared)
        if (!g.initializers.contains(v.name)) g.inputs.push_back(std::move(v));
    return g;
}

struct Model {
    std::int64_t ir_version = 0;
    std::int64_t opset = 0;  // default domain
    std::string producer;
    std::map<std::string, std::string> metadata;
    Graph graph;
};

inline Model parse_model(std::span<const std::uint8_t> bytes) {
    Model m;
    bool has_graph = false;
    WireReader r(bytes);
    while (!r.done()) {
        const auto [field, wt] = r.tag();
        switch (field) {
            case 1: m.ir_version = static_cast<std::int64_t>(r.varint()); break;
            case 2: m.producer = r.string(); break;
            case 7: m.graph = parse_graph(r.message()); has_graph = true; break;
            case 8: {
                WireReader op = r.message();
                std::string domain;
                std::int64_t version = 0;
                while (!op.done()) {
                    const auto [of, owt] = op.tag();
                    if (of == 1) domain = op.string();
                    else if (of == 2) version = static_cast<std::int64_t>(op.varint());
                    else op.skip(owt);
                }
                if (domain.empty() || domain == "ai.onnx") m.opset = version;
                break;
            }
            case 14: {
                WireReader kv = r.message();
                std::string key, value;
                while (!kv.done()) {
                    const auto [kf, kwt] = kv.tag();
                    if (kf == 1) key = kv.string();
                    else if (kf == 2) value = kv.string();
                    else kv.skip(kwt);
                }
                m.metadata[key] = value;
                break;
            }
            default: r.skip(wt);
        }
    }
    if (!has_graph || m.graph.nodes.empty()) throw Error("onnx: file contains no graph");
    if (m.opset == 0) throw Error("onnx: missing default-domain opset import");
    return m;
}

inline std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline Model load_model(const std::filesystem::path& path) { return parse_model(read_file_bytes(path)); }

inline NamedTensor load_tensor(const std::filesystem::path& path) {
    const auto bytes = read_file_bytes(path);
    return parse_tensor(WireReader(bytes));
}

}  // namespace clusinit::onnx
