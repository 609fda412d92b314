#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "tensorlift/convnet.hpp"
#include "tensorlift/factors.hpp"

namespace tensorlift {

using json = nlohmann::ordered_json;

/// Shortest round-trippable decimal form of a double, stable across runs.
inline std::string format_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

inline std::uint64_t fnv1a(const std::string& s, std::uint64_t h = 0xcbf29ce484222325ULL) {
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string to_hex(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

struct ParseError : Error {
    using Error::Error;
};

inline json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path);
    json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
    return j;
}

inline void save_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("cannot write " + path);
    out << text;
}

namespace detail {

template <typename T>
T require_field(const json& j, const std::string& key, const char* what) {
    if (!j.contains(key))
        throw ParseError(std::string(what) + ": missing required key \"" + key + "\"");
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ParseError(std::string(what) + ": key \"" + key + "\" has the wrong type");
    }
}

} // namespace detail

inline json topology_to_json(const ConvTopology& t) {
    json j;
    j["signal_len"] = t.signal_len();
    j["depth"] = t.depth();
    j["nodes"] = t.nodes();
    j["root"] = t.root();
    j["leaves"] = t.leaves();
    json edges = json::array();
    for (const ConvEdge& e : t.edges()) {
        json je;
        je["src"] = e.src;
        je["dst"] = e.dst;
        je["depth"] = e.depth;
        je["support"] = e.support;
        edges.push_back(std::move(je));
    }
    j["edges"] = std::move(edges);
    return j;
}

inline ConvTopology topology_from_json(const json& j) {
    const char* what = "topology";
    const int n = detail::require_field<int>(j, "signal_len", what);
    auto nodes = detail::require_field<std::vector<std::string>>(j, "nodes", what);
    auto root = detail::require_field<std::string>(j, "root", what);
    auto leaves = detail::require_field<std::vector<std::string>>(j, "leaves", what);
    if (!j.contains("edges") || !j.at("edges").is_array())
        throw ParseError("topology: missing required key \"edges\"");
    std::vector<ConvEdge> edges;
    for (const json& je : j.at("edges")) {
        ConvEdge e;
        e.src = detail::require_field<std::string>(je, "src", "edge");
        e.dst = detail::require_field<std::string>(je, "dst", "edge");
        e.depth = detail::require_field<int>(je, "depth", "edge");
        e.support = detail::require_field<std::vector<int>>(je, "support", "edge");
        edges.push_back(std::move(e));
    }
    ConvTopology t(n, std::move(nodes), std::move(root), std::move(leaves),
                   std::move(edges));
    if (j.contains("depth")) {
        const int depth = detail::require_field<int>(j, "depth", what);
        if (depth != t.depth())
            throw ParseError("topology: declared depth " + std::to_string(depth) +
                             " does not match edge depths (computed " +
                             std::to_string(t.depth()) + ")");
    }
    return t;
}

inline json factors_to_json(const FactorFamily& f) {
    json j;
    j["depth"] = f.depth();
    j["width"] = f.width();
    j["dims"] = f.dims();
    json layers = json::array();
    for (const auto& layer : f.placements()) {
        json jp = json::array();
        for (const Placement& p : layer)
            jp.push_back(json{{"row", p.row}, {"col", p.col}, {"param", p.param},
                              {"coeff", p.coeff}});
        layers.push_back(std::move(jp));
    }
    j["placements"] = std::move(layers);
    return j;
}

inline FactorFamily factors_from_json(const json& j) {
    const char* what = "factor family";
    const int depth = detail::require_field<int>(j, "depth", what);
    const int width = detail::require_field<int>(j, "width", what);
    auto dims = detail::require_field<std::vector<int>>(j, "dims", what);
    if (!j.contains("placements") || !j.at("placements").is_array())
        throw ParseError("factor family: missing required key \"placements\"");
    std::vector<std::vector<Placement>> placements;
    for (const json& layer : j.at("placements")) {
        std::vector<Placement> pl;
        for (const json& jp : layer) {
            Placement p;
            p.row = detail::require_field<int>(jp, "row", "placement");
            p.col = detail::require_field<int>(jp, "col", "placement");
            p.param = detail::require_field<int>(jp, "param", "placement");
            p.coeff = detail::require_field<double>(jp, "coeff", "placement");
            pl.push_back(p);
        }
        placements.push_back(std::move(pl));
    }
    return FactorFamily(depth, width, std::move(dims), std::move(placements));
}

/// Norm orders serialize as a number or the string "inf".
inline double norm_order_from_json(const json& j) {
    if (j.is_string()) {
        if (j.get<std::string>() == "inf") return inf_norm;
        throw ParseError("norm order: expected a number or \"inf\"");
    }
    if (!j.is_number()) throw ParseError("norm order: expected a number or \"inf\"");
    return j.get<double>();
}

/**
 * Everything that determines a command's output, in canonical key=value form.
 * The digest goes into reports so a result can be traced to its exact inputs;
 * execution details that cannot change results (thread count) stay out.
 */
class RunManifest {
public:
    RunManifest(std::string command, std::string version)
        : command_(std::move(command)), version_(std::move(version)) {}

    void set(const std::string& key, const std::string& value) { params_[key] = value; }
    void set(const std::string& key, double value) { params_[key] = format_double(value); }
    void set(const std::string& key, std::int64_t value) { params_[key] = std::to_string(value); }
    void set_input(const std::string& key, const std::string& content) {
        params_[key] = to_hex(fnv1a(content));
    }

    std::string canonical() const {
        std::ostringstream out;
        out << "command=" << command_ << "\nversion=" << version_ << "\n";
        for (const auto& [k, v] : params_) out << k << "=" << v << "\n";
        return out.str();
    }

    std::string digest() const { return to_hex(fnv1a(canonical())); }

private:
    std::string command_;
    std::string version_;
    std::map<std::string, std::string> params_;
};

} // namespace tensorlift
