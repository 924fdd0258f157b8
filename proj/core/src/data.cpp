#include "vcrg/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace vcrg {

namespace {

using nlohmann::json;

std::string_view strip(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

/// Calls fn(line_view, line_number) for every line, 1-based.
template <typename Fn>
void for_each_line(const std::string& text, Fn fn) {
    std::size_t start = 0, lineno = 0;
    while (start <= text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string::npos) end = text.size();
        ++lineno;
        fn(std::string_view(text).substr(start, end - start), lineno);
        start = end + 1;
        if (start == text.size() + 1) break;
    }
}

bool parse_u64(std::string_view s, std::uint64_t& out) {
    if (s.empty()) return false;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && p == s.data() + s.size();
}

bool parse_i64(std::string_view s, std::int64_t& out) {
    if (s.empty()) return false;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && p == s.data() + s.size();
}

bool parse_f64(std::string_view s, double& out) {
    if (s.empty()) return false;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && p == s.data() + s.size();
}

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

Graph load_graph(const std::string& text, LoadStats* stats) {
    std::vector<std::pair<NodeId, NodeId>> edges;
    std::uint64_t header_n = 0;
    bool have_header = false;
    std::uint64_t max_id = 0;
    bool any_id = false;

    for_each_line(text, [&](std::string_view raw, std::size_t lineno) {
        std::string_view line = raw;
        if (auto hash = line.find('#'); hash != std::string_view::npos) {
            std::string_view comment = strip(line.substr(hash + 1));
            if (comment.rfind("nodes:", 0) == 0) {
                std::string_view val = strip(comment.substr(6));
                if (!parse_u64(val, header_n) || header_n == 0)
                    throw ValidationError("edge list line " + std::to_string(lineno) +
                                          ": bad node-count header");
                have_header = true;
            }
            line = line.substr(0, hash);
        }
        line = strip(line);
        if (line.empty()) return;
        std::size_t sep = line.find_first_of(" \t");
        if (sep == std::string_view::npos)
            throw ValidationError("edge list line " + std::to_string(lineno) +
                                  ": expected two node ids");
        std::string_view a = strip(line.substr(0, sep));
        std::string_view b = strip(line.substr(sep));
        std::uint64_t u, v;
        if (!parse_u64(a, u) || !parse_u64(b, v) || b.find_first_of(" \t") != std::string_view::npos)
            throw ValidationError("edge list line " + std::to_string(lineno) +
                                  ": malformed edge \"" + std::string(raw) + "\"");
        max_id = std::max({max_id, u, v});
        any_id = true;
        edges.emplace_back(static_cast<NodeId>(u), static_cast<NodeId>(v));
    });

    if (!any_id) throw ValidationError("edge list: no edges found");
    std::uint64_t n = have_header ? header_n : max_id + 1;
    if (max_id >= n)
        throw ValidationError("edge list: node id " + std::to_string(max_id) +
                              " exceeds declared node count " + std::to_string(n));

    GraphBuildStats build;
    Graph g = Graph::from_edges(static_cast<std::size_t>(n), edges, &build);
    if (g.num_edges() == 0) throw ValidationError("edge list: no edges remain after self-loop removal");
    if (stats) {
        stats->self_loops_dropped = build.self_loops_dropped;
        stats->duplicates_merged = build.duplicates_merged;
        stats->header_n = have_header;
        stats->never_seen_ids = 0;
        for (NodeId i = 0; i < g.num_nodes(); ++i)
            if (g.degree(i) == 0) ++stats->never_seen_ids;
    }
    return g;
}

Graph load_graph_file(const std::filesystem::path& path, LoadStats* stats) {
    return load_graph(read_text_file(path), stats);
}

void save_graph(const Graph& g, const std::filesystem::path& path) {
    std::string out = "# nodes: " + std::to_string(g.num_nodes()) + "\n";
    for (auto [u, v] : g.edge_list())
        out += std::to_string(u) + "\t" + std::to_string(v) + "\n";
    write_text_file(path, out);
}

MatD load_features(const std::string& csv_text) {
    std::vector<double> values;
    std::size_t d = 0, rows = 0;
    for_each_line(csv_text, [&](std::string_view raw, std::size_t lineno) {
        std::string_view line = strip(raw);
        if (line.empty()) return;
        std::size_t count = 0;
        std::size_t start = 0;
        while (true) {
            std::size_t comma = line.find(',', start);
            std::string_view cell = strip(line.substr(start, comma == std::string_view::npos
                                                                ? std::string_view::npos
                                                                : comma - start));
            double x;
            if (!parse_f64(cell, x))
                throw ValidationError("features line " + std::to_string(lineno) +
                                      ": bad value \"" + std::string(cell) + "\"");
            if (!std::isfinite(x))
                throw ValidationError("features line " + std::to_string(lineno) +
                                      ": non-finite value");
            values.push_back(x);
            ++count;
            if (comma == std::string_view::npos) break;
            start = comma + 1;
        }
        if (rows == 0) {
            d = count;
        } else if (count != d) {
            throw ValidationError("features line " + std::to_string(lineno) + ": expected " +
                                  std::to_string(d) + " values, got " + std::to_string(count));
        }
        ++rows;
    });
    if (rows == 0) throw ValidationError("features: empty file");
    MatD x(rows, d);
    x.v = std::move(values);
    return x;
}

MatD load_features_file(const std::filesystem::path& path) {
    return load_features(read_text_file(path));
}

void save_features(const MatD& x, const std::filesystem::path& path) {
    std::string out;
    out.reserve(x.size() * 8);
    for (std::size_t i = 0; i < x.rows; ++i) {
        for (std::size_t j = 0; j < x.cols; ++j) {
            if (j) out += ',';
            out += fmt_double(x(i, j));
        }
        out += '\n';
    }
    write_text_file(path, out);
}

LabelVector load_labels(const std::string& text) {
    LabelVector labels;
    std::int64_t max_label = -1;
    for_each_line(text, [&](std::string_view raw, std::size_t lineno) {
        std::string_view line = strip(raw);
        if (line.empty()) return;
        std::int64_t y;
        if (!parse_i64(line, y) || y < -1)
            throw ValidationError("labels line " + std::to_string(lineno) + ": bad label \"" +
                                  std::string(line) + "\"");
        labels.y.push_back(static_cast<std::int32_t>(y));
        max_label = std::max(max_label, y);
    });
    labels.num_classes = static_cast<std::int32_t>(std::max<std::int64_t>(1, max_label + 1));
    return labels;
}

LabelVector load_labels_file(const std::filesystem::path& path) {
    return load_labels(read_text_file(path));
}

void save_labels(const LabelVector& labels, const std::filesystem::path& path) {
    std::string out;
    for (std::int32_t y : labels.y) out += std::to_string(y) + "\n";
    write_text_file(path, out);
}

std::pair<MatD, LabelVector> load_node_data(const std::string& features_csv,
                                            const std::string& labels_text, std::size_t n) {
    MatD x = load_features(features_csv);
    if (x.rows != n)
        throw ValidationError("features: expected " + std::to_string(n) + " rows, got " +
                              std::to_string(x.rows));
    LabelVector labels = load_labels(labels_text);
    if (labels.y.size() != n)
        throw ValidationError("labels: expected " + std::to_string(n) + " entries, got " +
                              std::to_string(labels.y.size()));
    return {std::move(x), std::move(labels)};
}

namespace {

std::vector<NodeId> ids_from_json(const json& j, const char* key) {
    if (!j.contains(key) || !j[key].is_array())
        throw ValidationError(std::string("splits: missing array \"") + key + "\"");
    std::vector<NodeId> out;
    for (const auto& e : j[key]) {
        if (!e.is_number_unsigned())
            throw ValidationError(std::string("splits: non-integer id in \"") + key + "\"");
        out.push_back(e.get<NodeId>());
    }
    return out;
}

}  // namespace

Splits load_splits(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("splits: ") + e.what());
    }
    Splits s;
    s.train = ids_from_json(j, "train");
    s.val = ids_from_json(j, "val");
    s.test = ids_from_json(j, "test");
    return s;
}

Splits load_splits_file(const std::filesystem::path& path) {
    return load_splits(read_text_file(path));
}

void save_splits(const Splits& s, const std::filesystem::path& path) {
    json j;
    j["train"] = s.train;
    j["val"] = s.val;
    j["test"] = s.test;
    write_text_file(path, j.dump(2) + "\n");
}

void validate_splits(const Splits& s, std::size_t n) {
    std::vector<std::uint8_t> seen(n, 0);
    auto check = [&](const std::vector<NodeId>& ids, const char* name) {
        for (NodeId u : ids) {
            if (u >= n)
                throw ValidationError(std::string("splits: id out of range in \"") + name + "\"");
            if (seen[u]++)
                throw ValidationError("splits: node " + std::to_string(u) +
                                      " appears in more than one split");
        }
    };
    check(s.train, "train");
    check(s.val, "val");
    check(s.test, "test");
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open file: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write file: " + path.string());
    out << content;
    if (!out) throw ValidationError("write failed: " + path.string());
}

}  // namespace vcrg
