#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "vcrg/common.hpp"
#include "vcrg/graph.hpp"

namespace vcrg {

struct LabelVector {
    std::vector<std::int32_t> y;  // -1 marks an unlabeled node
    std::int32_t num_classes = 0;
};

struct Splits {
    std::vector<NodeId> train, val, test;
};

struct LoadStats {
    std::size_t self_loops_dropped = 0;
    std::size_t duplicates_merged = 0;
    std::size_t never_seen_ids = 0;  // ids below n absent from the input (isolated)
    bool header_n = false;
};

/// Parse a tab- or space-separated edge list. '#' starts a comment; the
/// special comment "# nodes: N" fixes the node count. Without it,
/// n = 1 + max id seen; never-mentioned ids below n become isolated nodes and
/// are counted in stats (the id space is kept as-is rather than compacted).
Graph load_graph(const std::string& text, LoadStats* stats = nullptr);
Graph load_graph_file(const std::filesystem::path& path, LoadStats* stats = nullptr);
void save_graph(const Graph& g, const std::filesystem::path& path);

/// Headerless CSV of floats, d inferred from the first row.
MatD load_features(const std::string& csv_text);
MatD load_features_file(const std::filesystem::path& path);
void save_features(const MatD& x, const std::filesystem::path& path);

/// One integer label per line; -1 allowed. num_classes = 1 + max label.
LabelVector load_labels(const std::string& text);
LabelVector load_labels_file(const std::filesystem::path& path);
void save_labels(const LabelVector& labels, const std::filesystem::path& path);

/// Validates feature/label row counts against the graph's node count.
std::pair<MatD, LabelVector> load_node_data(const std::string& features_csv,
                                            const std::string& labels_text, std::size_t n);

Splits load_splits(const std::string& json_text);
Splits load_splits_file(const std::filesystem::path& path);
void save_splits(const Splits& s, const std::filesystem::path& path);
void validate_splits(const Splits& s, std::size_t n);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& content);

}  // namespace vcrg
