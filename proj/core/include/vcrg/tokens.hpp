#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "vcrg/common.hpp"
#include "vcrg/data.hpp"
#include "vcrg/graph.hpp"
#include "vcrg/ppr.hpp"
#include "vcrg/rewire.hpp"

namespace vcrg {

/// One node's token matrix: row 0 is the node's own features with appended
/// scalar 1; rows 1..L are hop aggregates with appended decaying hop weights;
/// then k_bar structure-neighbor rows and k_hat content-neighbor rows, each a
/// neighbor's features with its PPR score appended. Missing neighbors leave
/// all-zero rows with mask 0.
struct TokenList {
    NodeId node = 0;
    MatF t;                           // (1 + L + k_bar + k_hat) x (d+1)
    std::vector<std::uint8_t> mask;   // 1 = valid row
};

struct TokenStoreHeader {
    std::uint32_t version = 1;
    std::uint64_t n = 0;
    std::uint32_t d = 0;
    std::uint32_t l_hops = 0;
    std::uint32_t k_bar = 0;
    std::uint32_t k_hat = 0;
    double alpha = 0.85;
    double eps = 1e-6;
    std::uint64_t seed = 0;

    std::size_t rows_per_node() const { return 1 + l_hops + k_bar + k_hat; }
};

struct TokenStore {
    TokenStoreHeader header;
    std::vector<TokenList> lists;

    /// Binary format documented in docs/formats.md; a JSON sidecar mirroring
    /// the header is written next to the file as "<path>.json".
    void save(const std::filesystem::path& path) const;
    static TokenStore load(const std::filesystem::path& path);
};

/// Weights (L-l+1)/sum_{j=1..L} j for l = 1..L; they sum to 1.
std::vector<double> hop_weights(std::size_t l_hops);

/// [P X, P^2 X, ..., P^L X] by repeated spmm.
std::vector<MatD> hop_aggregates(const TransitionMatrix& t, const MatD& x, std::size_t l_hops);

TokenList build_token_list(NodeId u, const MatD& x, const std::vector<MatD>& hops,
                           const RankedNeighbors& structure, const RankedNeighbors& content,
                           std::size_t l_hops, std::size_t k_bar, std::size_t k_hat);

enum class ContentMode { none, train_labels, kmeans };

ContentMode content_mode_from_string(const std::string& s);
std::string to_string(ContentMode mode);

struct TokenizeOptions {
    std::size_t l_hops = 4;
    std::size_t k_bar = 16;
    std::size_t k_hat = 16;
    std::uint32_t s_bar = 16;
    ContentMode content_mode = ContentMode::train_labels;
    std::uint32_t s_hat = 0;  // 0 = automatic (label count / required for kmeans)
    double alpha = 0.85;
    double eps = 1e-6;
    std::uint64_t seed = 0;
    NormKind hop_norm = NormKind::symmetric;  // hop aggregates on the original graph
    unsigned jobs = 1;
};

/// Intermediate pipeline products, exposed for inspection and tests.
struct TokenizeTrace {
    PartitionAssignment partition;
    std::optional<ContentAssignment> content;
    std::vector<std::uint32_t> empty_structure_groups;
    std::vector<std::uint32_t> empty_content_groups;
    std::vector<RankedNeighbors> structure_ranked;  // per node
    std::vector<RankedNeighbors> content_ranked;    // per node (content mode only)
};

/// Full pipeline: partition, structure rewiring, per-node push PPR on the
/// structure-rewired graph, content assignment and rewiring, per-node push PPR
/// there, hop aggregates on the original graph, per-node assembly.
/// `splits` is required for ContentMode::train_labels and ignored otherwise.
TokenStore tokenize_graph(const Graph& g, const MatD& x, const LabelVector& labels,
                          const Splits* splits, const TokenizeOptions& opt,
                          TokenizeTrace* trace = nullptr);

}  // namespace vcrg
