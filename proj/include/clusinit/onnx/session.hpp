#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "clusinit/onnx/kernels.hpp"
#include "clusinit/onnx/proto.hpp"

namespace clusinit::onnx {

/// Executes a parsed model graph on the CPU, node by node in file order.
class Session {
public:
    explicit Session(Model model) : model_(std::move(model)) {
        const auto& table = kernel_table();
        std::unordered_map<std::string, std::size_t> defined;
        for (const auto& in : model_.graph.inputs) defined[in.name] = 0;
        for (const auto& [name, t] : model_.graph.initializers) defined[name] = 0;
        for (std::size_t k = 0; k < model_.graph.nodes.size(); ++k) {
            const Node& n = model_.graph.nodes[k];
            if (!n.domain.empty() && n.domain != "ai.onnx") throw Error("onnx: unsupported operator domain " + n.domain);
            if (!table.contains(n.op_type)) throw Error("onnx: unsupported operator " + n.op_type);
            for (const auto& in : n.inputs) {
                if (in.empty()) continue;
                if (!defined.contains(in)) throw Error("onnx: node " + n.op_type + " reads undefined value '" + in + "'");
                last_use_[in] = k;
            }
            for (const auto& out : n.outputs)
                if (!out.empty()) defined[out] = k;
        }
        for (const auto& out : model_.graph.outputs) {
            if (!defined.contains(out.name)) throw Error("onnx: graph output '" + out.name + "' is never produced");
            last_use_[out.name] = model_.graph.nodes.size();
        }
    }

    static Session load(const std::filesystem::path& path) { return Session(load_model(path)); }

    [[nodiscard]] const Model& model() const { return model_; }
    [[nodiscard]] const std::vector<ValueInfo>& inputs() const { return model_.graph.inputs; }
    [[nodiscard]] const std::vector<ValueInfo>& outputs() const { return model_.graph.outputs; }

    /// Runs the graph; returns every declared output by name.
    [[nodiscard]] std::map<std::string, Tensor> run(const std::map<std::string, Tensor>& feeds) const {
        std::unordered_map<std::string, Tensor> values;
        for (const auto& decl : model_.graph.inputs) {
            const auto it = feeds.find(decl.name);
            if (it == feeds.end()) throw Error("onnx: missing input '" + decl.name + "'");
            check_feed(decl, it->second);
            values[decl.name] = it->second;
        }
        auto lookup = [&](const std::string& name) -> const Tensor* {
            if (name.empty()) return nullptr;
            if (auto it = values.find(name); it != values.end()) return &it->second;
            if (auto it = model_.graph.initializers.find(name); it != model_.graph.initializers.end()) return &it->second;
            throw Error("onnx: value '" + name + "' is not available");
        };
        const auto& table = kernel_table();
        for (std::size_t k = 0; k < model_.graph.nodes.size(); ++k) {
            const Node& n = model_.graph.nodes[k];
            OpContext ctx{n, {}, model_.opset};
            for (const auto& in : n.inputs) ctx.in.push_back(lookup(in));
            std::vector<Tensor> produced = table.at(n.op_type)(ctx);
            if (produced.size() < n.outputs.size() && !(n.op_type == "Dropout" && produced.size() == 1))
                throw Error("onnx: " + n.op_type + " produced too few outputs");
            for (std::size_t o = 0; o < n.outputs.size() && o < produced.size(); ++o)
                if (!n.outputs[o].empty()) values[n.outputs[o]] = std::move(produced[o]);
            // Release intermediates nobody reads any more.
            for (const auto& in : n.inputs) {
                auto lu = last_use_.find(in);
                if (lu != last_use_.end() && lu->second == k) values.erase(in);
            }
        }
        std::map<std::string, Tensor> result;
        for (const auto& out : model_.graph.outputs) result[out.name] = *lookup(out.name);
        return result;
    }

    /// Single-input convenience: feeds `x` to the only input and returns the first output.
    [[nodiscard]] Tensor run_single(const Tensor& x) const {
        if (model_.graph.inputs.size() != 1) throw Error("onnx: model does not have exactly one input");
        auto out = run({{model_.graph.inputs[0].name, x}});
        return out.at(model_.graph.outputs.at(0).name);
    }

private:
    static void check_feed(const ValueInfo& decl, const Tensor& t) {
        const bool want_float = decl.elem_type == elem::kFloat || decl.elem_type == elem::kDouble || decl.elem_type == elem::kFloat16;
        if (decl.elem_type != 0 && want_float != t.is_float())
            throw Error("onnx: input '" + decl.name + "' has the wrong element type");
        if (!decl.has_shape) return;
        bool ok = decl.dims.size() == t.rank();
        for (std::size_t d = 0; ok && d < decl.dims.size(); ++d) ok = decl.dims[d] < 0 || decl.dims[d] == t.shape[d];
        if (!ok) throw Error("onnx: input '" + decl.name + "' expects shape " + shape_string(decl.dims) + ", got " + shape_string(t.shape));
    }

    Model model_;
    std::unordered_map<std::string, std::size_t> last_use_;
};

}  // namespace clusinit::onnx
