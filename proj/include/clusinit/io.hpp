#pragma once

#include <charconv>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include "clusinit/datagen.hpp"
#include "clusinit/detector.hpp"
#include "clusinit/indices.hpp"
#include "clusinit/types.hpp"

namespace clusinit {

using json = nlohmann::json;

inline constexpr const char* kToolVersion = "0.1.0";

// ---- schemas -----------------------------------------------------------
//
// JSON Schema (draft-07 subset) documents for every JSON file the library
// writes. `validate` below understands exactly the keywords used here.

namespace schema {

inline const json& pair_of_numbers() {
    static const json s = {{"type", "array"}, {"items", {{"type", "number"}}}, {"minItems", 2}, {"maxItems", 2}};
    return s;
}

inline const json& detection() {
    static const json s = {
        {"$schema", "http://json-schema.org/draft-07/schema#"},
        {"title", "detection"},
        {"type", "object"},
        {"required", {"k", "boxes", "centroids_data_space", "size_estimates"}},
        {"properties",
         {{"k", {{"type", "integer"}, {"minimum", 0}}},
          {"boxes",
           {{"type", "array"},
            {"items",
             {{"type", "object"},
              {"required", {"x_min", "y_min", "x_max", "y_max", "confidence"}},
              {"properties",
               {{"x_min", {{"type", "number"}}},
                {"y_min", {{"type", "number"}}},
                {"x_max", {{"type", "number"}}},
                {"y_max", {{"type", "number"}}},
                {"confidence", {{"type", "number"}, {"minimum", 0}, {"maximum", 1}}}}}}}}},
          {"centroids_data_space", {{"type", "array"}, {"items", pair_of_numbers()}}},
          {"size_estimates", {{"type", "array"}, {"items", {{"type", "number"}, {"minimum", 0}}}}},
          {"confidences", {{"type", "array"}, {"items", {{"type", "number"}, {"minimum", 0}, {"maximum", 1}}}}},
          {"frame", {{"type", "object"}}},
          {"dataset_id", {{"type", "string"}}},
          {"backend", {{"type", "string"}}}}}};
    return s;
}

inline const json& clustering_result() {
    static const json s = {
        {"$schema", "http://json-schema.org/draft-07/schema#"},
        {"title", "clustering_result"},
        {"type", "object"},
        {"required", {"assignments", "centroids", "iterations", "converged", "inertia", "elapsed_seconds"}},
        {"properties",
         {{"assignments", {{"type", "array"}, {"items", {{"type", "integer"}, {"minimum", 0}}}}},
          {"centroids", {{"type", "array"}, {"items", pair_of_numbers()}, {"minItems", 1}}},
          {"iterations", {{"type", "integer"}, {"minimum", 0}}},
          {"converged", {{"type", "boolean"}}},
          {"inertia", {{"type", "number"}, {"minimum", 0}}},
          {"elapsed_seconds", {{"type", "number"}, {"minimum", 0}}},
          {"k", {{"type", "integer"}, {"minimum", 1}}},
          {"algorithm", {{"type", "string"}}},
          {"init", {{"type", "string"}}}}}};
    return s;
}

inline const json& index_report() {
    static const json s = {
        {"$schema", "http://json-schema.org/draft-07/schema#"},
        {"title", "index_report"},
        {"type", "object"},
        {"required", {"kind", "values", "k_selected", "elapsed_seconds"}},
        {"properties",
         {{"kind", {{"type", "string"}, {"enum", {"bic", "aic", "dunn", "davies_bouldin", "silhouette", "calinski_harabasz", "gap"}}}},
          {"values", {{"type", "object"}, {"propertyNames", {{"pattern", "^[1-9][0-9]*$"}}}, {"additionalProperties", {{"type", "number"}}}}},
          {"std_errs", {{"type", "object"}, {"propertyNames", {{"pattern", "^[1-9][0-9]*$"}}}, {"additionalProperties", {{"type", "number"}}}}},
          {"k_selected", {{"type", "integer"}, {"minimum", 1}}},
          {"elapsed_seconds", {{"type", "number"}, {"minimum", 0}}}}}};
    return s;
}

inline const json& dataset_meta() {
    static const json s = {
        {"$schema", "http://json-schema.org/draft-07/schema#"},
        {"title", "dataset_meta"},
        {"type", "object"},
        {"required", {"config", "k_true", "centroids_true"}},
        {"properties",
         {{"config",
           {{"type", "object"},
            {"required", {"shape_family", "k", "n_total", "variance_range", "separation_min", "balance", "noise_level", "seed"}},
            {"properties",
             {{"shape_family",
               {{"type", "string"},
                {"enum", {"gaussian_blobs", "varied_variance_blobs", "anisotropic", "noisy_moons", "noisy_circles", "no_structure"}}}},
              {"k", {{"type", "integer"}, {"minimum", 1}}},
              {"n_total", {{"type", "integer"}, {"minimum", 1}}},
              {"variance_range", pair_of_numbers()},
              {"separation_min", {{"type", "number"}, {"minimum", 0}}},
              {"balance", {{"type", "string"}, {"enum", {"equal", "random_proportions"}}}},
              {"noise_level", {{"type", "number"}, {"minimum", 0}}},
              {"seed", {{"type", "integer"}, {"minimum", 0}}}}}}},
          {"k_true", {{"type", "integer"}, {"minimum", 1}}},
          {"n_points", {{"type", "integer"}, {"minimum", 1}}},
          {"centroids_true", {{"type", "array"}, {"items", pair_of_numbers()}, {"minItems", 1}}},
          {"sigmas", {{"type", "array"}, {"items", {{"type", "number"}, {"minimum", 0}}}}}}}};
    return s;
}

inline const json& run_manifest() {
    static const json s = {
        {"$schema", "http://json-schema.org/draft-07/schema#"},
        {"title", "run_manifest"},
        {"type", "object"},
        {"required", {"command", "parameters", "seed", "tool_version", "timestamp"}},
        {"properties",
         {{"command", {{"type", "string"}}},
          {"parameters", {{"type", "object"}}},
          {"seed", {{"type", "integer"}, {"minimum", 0}}},
          {"tool_version", {{"type", "string"}}},
          {"timestamp", {{"type", "string"}, {"pattern", "^[0-9]{4}-[0-9]{2}-[0-9]{2}T[0-9]{2}:[0-9]{2}:[0-9]{2}Z$"}}}}}};
    return s;
}

inline bool type_matches(const json& value, const std::string& type) {
    if (type == "object") return value.is_object();
    if (type == "array") return value.is_array();
    if (type == "string") return value.is_string();
    if (type == "boolean") return value.is_boolean();
    if (type == "null") return value.is_null();
    if (type == "integer") return value.is_number_integer() || (value.is_number_float() && std::floor(value.get<double>()) == value.get<double>());
    if (type == "number") return value.is_number();
    return false;
}

/// Appends a message per violation of `s` by `value`.
inline void validate_into(const json& value, const json& s, const std::string& path, std::vector<std::string>& errors) {
    auto fail = [&](const std::string& what) { errors.push_back((path.empty() ? std::string("$") : path) + ": " + what); };
    if (auto t = s.find("type"); t != s.end()) {
        bool ok = false;
        if (t->is_array()) {
            for (const auto& alt : *t) ok = ok || type_matches(value, alt.get<std::string>());
        } else {
            ok = type_matches(value, t->get<std::string>());
        }
        if (!ok) {
            fail("expected " + t->dump());
            return;
        }
    }
    if (auto e = s.find("enum"); e != s.end() && std::find(e->begin(), e->end(), value) == e->end()) fail("value not in " + e->dump());
    if (value.is_number()) {
        const double v = value.get<double>();
        if (auto m = s.find("minimum"); m != s.end() && v < m->get<double>()) fail("below minimum " + m->dump());
        if (auto m = s.find("maximum"); m != s.end() && v > m->get<double>()) fail("above maximum " + m->dump());
    }
    if (value.is_string()) {
        if (auto p = s.find("pattern"); p != s.end() && !std::regex_search(value.get<std::string>(), std::regex(p->get<std::string>())))
            fail("does not match " + p->dump());
    }
    if (value.is_array()) {
        if (auto m = s.find("minItems"); m != s.end() && value.size() < m->get<std::size_t>()) fail("too few items");
        if (auto m = s.find("maxItems"); m != s.end() && value.size() > m->get<std::size_t>()) fail("too many items");
        if (auto items = s.find("items"); items != s.end())
            for (std::size_t k = 0; k < value.size(); ++k) validate_into(value[k], *items, path + "[" + std::to_string(k) + "]", errors);
    }
    if (value.is_object()) {
        if (auto req = s.find("required"); req != s.end())
            for (const auto& key : *req)
                if (!value.contains(key.get<std::string>())) fail("missing required property " + key.dump());
        const auto props = s.find("properties");
        const auto extra = s.find("additionalProperties");
        const auto names = s.find("propertyNames");
        for (const auto& [key, member] : value.items()) {
            const std::string sub = path + "." + key;
            if (names != s.end()) validate_into(json(key), *names, sub + "<name>", errors);
            if (props != s.end() && props->contains(key)) validate_into(member, (*props)[key], sub, errors);
            else if (extra != s.end() && extra->is_object()) validate_into(member, *extra, sub, errors);
            else if (extra != s.end() && extra->is_boolean() && !extra->get<bool>()) fail("unexpected property \"" + key + "\"");
        }
    }
}

inline std::vector<std::string> validate(const json& value, const json& s) {
    std::vector<std::string> errors;
    validate_into(value, s, "", errors);
    return errors;
}

/// Throws "schema <title>: <first violation>" when `value` does not conform.
inline void require_valid(const json& value, const json& s) {
    const auto errors = validate(value, s);
    if (!errors.empty()) throw Error("schema " + s.value("title", std::string("?")) + ": " + errors.front());
}

}  // namespace schema

// ---- JSON conversions --------------------------------------------------

inline json points_json(PointSpan pts) {
    json out = json::array();
    for (const auto& p : pts) out.push_back({p.x, p.y});
    return out;
}

inline std::vector<Point2> points_from_json(const json& j) {
    std::vector<Point2> pts;
    for (const auto& p : j) pts.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
    return pts;
}

inline json detection_json(const std::vector<DetectionBox>& boxes, const InitParams& params) {
    json j;
    j["k"] = params.k;
    j["boxes"] = json::array();
    for (const auto& b : boxes)
        j["boxes"].push_back({{"x_min", b.x_min}, {"y_min", b.y_min}, {"x_max", b.x_max}, {"y_max", b.y_max}, {"confidence", b.confidence}});
    j["centroids_data_space"] = points_json(params.centroids);
    j["size_estimates"] = params.size_estimates;
    j["confidences"] = params.confidences;
    return j;
}

/// Reads the initialization parameters back from a detection document.
inline InitParams init_params_from_json(const json& j) {
    schema::require_valid(j, schema::detection());
    InitParams p;
    p.k = j.at("k").get<int>();
    p.centroids = points_from_json(j.at("centroids_data_space"));
    p.size_estimates = j.at("size_estimates").get<std::vector<double>>();
    if (j.contains("confidences")) {
        p.confidences = j.at("confidences").get<std::vector<double>>();
    } else {
        for (const auto& b : j.at("boxes")) p.confidences.push_back(b.at("confidence").get<double>());
    }
    const auto k = static_cast<std::size_t>(p.k);
    if (p.centroids.size() != k || p.size_estimates.size() != k || p.confidences.size() != k)
        throw Error("schema detection: k does not match the per-cluster arrays");
    return p;
}

inline json clustering_json(const ClusteringResult& r) {
    return {{"k", r.k()},
            {"assignments", r.assignments},
            {"centroids", points_json(r.centroids)},
            {"iterations", r.iterations},
            {"converged", r.converged},
            {"inertia", r.inertia},
            {"elapsed_seconds", r.elapsed_seconds}};
}

inline ClusteringResult clustering_from_json(const json& j) {
    schema::require_valid(j, schema::clustering_result());
    ClusteringResult r;
    r.assignments = j.at("assignments").get<std::vector<int>>();
    r.centroids = points_from_json(j.at("centroids"));
    r.iterations = j.at("iterations").get<int>();
    r.converged = j.at("converged").get<bool>();
    r.inertia = j.at("inertia").get<double>();
    r.elapsed_seconds = j.at("elapsed_seconds").get<double>();
    for (int a : r.assignments)
        if (a >= r.k()) throw Error("schema clustering_result: assignment exceeds centroid count");
    return r;
}

inline json index_report_json(const IndexReport& r) {
    json values = json::object(), errs = json::object();
    for (const auto& [k, v] : r.values) values[std::to_string(k)] = v;
    for (const auto& [k, v] : r.std_errs) errs[std::to_string(k)] = v;
    json j = {{"kind", std::string(to_string(r.kind))}, {"values", values}, {"k_selected", r.k_selected}, {"elapsed_seconds", r.elapsed_seconds}};
    if (!r.std_errs.empty()) j["std_errs"] = errs;
    return j;
}

inline IndexReport index_report_from_json(const json& j) {
    schema::require_valid(j, schema::index_report());
    IndexReport r;
    r.kind = *parse_index_kind(j.at("kind").get<std::string>());
    for (const auto& [k, v] : j.at("values").items()) r.values[std::stoi(k)] = v.get<double>();
    if (j.contains("std_errs"))
        for (const auto& [k, v] : j.at("std_errs").items()) r.std_errs[std::stoi(k)] = v.get<double>();
    r.k_selected = j.at("k_selected").get<int>();
    r.elapsed_seconds = j.at("elapsed_seconds").get<double>();
    return r;
}

inline json config_json(const GeneratorConfig& c) {
    return {{"shape_family", std::string(to_string(c.shape_family))},
            {"k", c.k},
            {"n_total", c.n_total},
            {"variance_range", {c.variance_range.first, c.variance_range.second}},
            {"separation_min", c.separation_min},
            {"balance", std::string(to_string(c.balance))},
            {"noise_level", c.noise_level},
            {"seed", c.seed}};
}

inline GeneratorConfig config_from_json(const json& j) {
    GeneratorConfig c;
    c.shape_family = *parse_shape_family(j.at("shape_family").get<std::string>());
    c.k = j.at("k").get<int>();
    c.n_total = j.at("n_total").get<int>();
    c.variance_range = {j.at("variance_range").at(0).get<double>(), j.at("variance_range").at(1).get<double>()};
    c.separation_min = j.at("separation_min").get<double>();
    c.balance = *parse_balance(j.at("balance").get<std::string>());
    c.noise_level = j.at("noise_level").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
    return c;
}

inline json meta_json(const Dataset2D& ds) {
    json j = {{"config", config_json(ds.config)},
              {"k_true", ds.k_true},
              {"n_points", ds.points.size()},
              {"centroids_true", points_json(ds.centroids_true)}};
    if (!ds.sigmas.empty()) j["sigmas"] = ds.sigmas;
    return j;
}

inline std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

inline json run_manifest_json(const std::string& command, const json& parameters, std::uint64_t seed) {
    return {{"command", command}, {"parameters", parameters}, {"seed", seed}, {"tool_version", kToolVersion}, {"timestamp", utc_timestamp()}};
}

// ---- files -------------------------------------------------------------

inline json read_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw Error("invalid JSON in " + path.string() + ": " + e.what());
    }
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << text;
    if (!out) throw Error("cannot write " + path.string());
}

inline void write_json(const std::filesystem::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

/// Shortest decimal text that reads back to exactly `v`.
inline std::string format_double(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return {buf, res.ptr};
}

inline double parse_double(std::string_view s, const std::string& where) {
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw Error("bad number '" + std::string(s) + "' in " + where);
    return v;
}

inline void write_points_csv(std::ostream& out, const Dataset2D& ds) {
    out << "x,y,label\n";
    for (std::size_t i = 0; i < ds.points.size(); ++i)
        out << format_double(ds.points[i].x) << ',' << format_double(ds.points[i].y) << ',' << ds.labels[i] << '\n';
}

/// Reads `x,y[,label]` rows; a missing label column yields label 0.
inline void read_points_csv(std::istream& in, std::vector<Point2>& points, std::vector<int>& labels, const std::string& where) {
    std::string line;
    if (!std::getline(in, line)) throw Error("empty CSV " + where);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "x,y,label" && line != "x,y") throw Error("CSV header must be x,y,label in " + where);
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string_view> fields;
        std::string_view rest = line;
        for (std::size_t comma; (comma = rest.find(',')) != std::string_view::npos; rest.remove_prefix(comma + 1))
            fields.push_back(rest.substr(0, comma));
        fields.push_back(rest);
        if (fields.size() < 2 || fields.size() > 3) throw Error("bad CSV row " + std::to_string(row) + " in " + where);
        points.push_back({parse_double(fields[0], where), parse_double(fields[1], where)});
        int label = 0;
        if (fields.size() == 3) {
            const auto res = std::from_chars(fields[2].data(), fields[2].data() + fields[2].size(), label);
            if (res.ec != std::errc() || label < 0) throw Error("bad label on CSV row " + std::to_string(row) + " in " + where);
        }
        labels.push_back(label);
    }
}

/// Dataset directory: points.csv plus meta.json.
inline void write_dataset(const std::filesystem::path& dir, const Dataset2D& ds) {
    std::filesystem::create_directories(dir);
    std::ostringstream csv;
    write_points_csv(csv, ds);
    write_text(dir / "points.csv", csv.str());
    write_json(dir / "meta.json", meta_json(ds));
}

inline Dataset2D read_dataset(const std::filesystem::path& dir) {
    Dataset2D ds;
    const json meta = read_json(dir / "meta.json");
    schema::require_valid(meta, schema::dataset_meta());
    ds.config = config_from_json(meta.at("config"));
    ds.k_true = meta.at("k_true").get<int>();
    ds.centroids_true = points_from_json(meta.at("centroids_true"));
    if (meta.contains("sigmas")) ds.sigmas = meta.at("sigmas").get<std::vector<double>>();
    std::ifstream in(dir / "points.csv");
    if (!in) throw Error("cannot open " + (dir / "points.csv").string());
    read_points_csv(in, ds.points, ds.labels, (dir / "points.csv").string());
    if (ds.points.empty()) throw Error("no points in " + (dir / "points.csv").string());
    for (int l : ds.labels)
        if (l >= ds.k_true) throw Error("label exceeds k_true in " + dir.string());
    return ds;
}

}  // namespace clusinit
