#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "vcrg/common.hpp"

namespace vcrg {

struct GraphBuildStats {
    std::size_t self_loops_dropped = 0;
    std::size_t duplicates_merged = 0;
};

/// Undirected simple graph in CSR layout. Immutable after construction.
/// Nodes n..n+s-1 past ordinary_count are super nodes appended by rewiring;
/// for a freshly loaded graph ordinary_count == num_nodes().
class Graph {
public:
    Graph() = default;

    /// Build from an edge list. Edges may repeat and appear in either
    /// orientation; duplicates are merged and self-loops dropped (counted in
    /// stats). Node ids must be < n.
    static Graph from_edges(std::size_t n, std::span<const std::pair<NodeId, NodeId>> edges,
                            GraphBuildStats* stats = nullptr);

    /// Assemble from prebuilt CSR arrays (used by rewiring). Validates.
    static Graph from_parts(std::vector<std::size_t> offsets, std::vector<NodeId> adj,
                            std::size_t ordinary_count);

    std::size_t num_nodes() const { return offsets_.size() - 1; }
    std::size_t num_edges() const { return adj_.size() / 2; }
    std::size_t ordinary_count() const { return ordinary_count_; }

    std::size_t degree(NodeId u) const { return offsets_[u + 1] - offsets_[u]; }
    std::span<const NodeId> neighbors(NodeId u) const {
        return {adj_.data() + offsets_[u], offsets_[u + 1] - offsets_[u]};
    }
    bool has_edge(NodeId u, NodeId v) const;

    /// All edges as (u, v) with u < v, ascending.
    std::vector<std::pair<NodeId, NodeId>> edge_list() const;

    /// Checks symmetry, sortedness, absence of self-loops and duplicates.
    void validate() const;

private:
    std::vector<std::size_t> offsets_ = {0};
    std::vector<NodeId> adj_;
    std::size_t ordinary_count_ = 0;
};

enum class NormKind { column, row, symmetric, gcn_augmented };

NormKind norm_kind_from_string(const std::string& s);
std::string to_string(NormKind kind);

/// Normalized view of a Graph. Holds a pointer to the graph, which must
/// outlive the view. Degree-0 nodes get zero rows/columns (pure sinks), except
/// under gcn_augmented where the added self-loop gives them P(u,u) = 1.
class TransitionMatrix {
public:
    const Graph& graph() const { return *g_; }
    NormKind kind() const { return kind_; }
    std::size_t dim() const { return g_->num_nodes(); }

    /// Literal matrix-vector product y = P x.
    void apply(std::span<const double> x, std::span<double> y) const;

    /// One step of mass propagation for a distribution x: the result of the
    /// walk "stand at u with probability x(u), move to a uniform neighbor".
    /// Equals apply() for every kind except row, where it is the transpose
    /// (the row kind stores per-source probabilities, so pushing mass through
    /// it means multiplying by P^T).
    void apply_walk(std::span<const double> x, std::span<double> y) const;

    /// Literal matrix-matrix product P · M.
    MatD multiply(const MatD& m) const;

private:
    friend TransitionMatrix normalize(const Graph& g, NormKind kind);
    const Graph* g_ = nullptr;
    NormKind kind_ = NormKind::column;
    std::vector<double> scale_;
};

TransitionMatrix normalize(const Graph& g, NormKind kind);

/// Sparse-dense product T · M with shape checking.
MatD spmm(const TransitionMatrix& t, const MatD& m);

}  // namespace vcrg
