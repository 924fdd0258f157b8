#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "vcrg/common.hpp"
#include "vcrg/graph.hpp"

namespace vcrg {

struct PprEntry {
    NodeId node;
    double mass;
};

enum class PprMethod { power, cpi, push };

/// One source's personalized PageRank as a sparse vector. Entries are sorted
/// ascending by node id with strictly positive mass. The residual is populated
/// by forward push only and satisfies mass + residual ≈ 1.
struct PprVector {
    NodeId source = 0;
    double alpha = 0.85;
    PprMethod method = PprMethod::power;
    std::vector<PprEntry> entries;
    std::vector<PprEntry> residual;

    double at(NodeId u) const;
    double residual_at(NodeId u) const;
    double mass_sum() const;
    double residual_sum() const;
    std::string to_json() const;
};

/// Power iteration on r = alpha P r + (1-alpha) q until the l1 change drops
/// below tol. Throws on non-convergence, carrying the last change.
PprVector ppr_power(const TransitionMatrix& t, NodeId source, double alpha, double tol = 1e-10,
                    std::size_t max_iters = 1000);

/// Cumulative power iteration: accumulates (alpha P)^i (1-alpha) q until the
/// current term's l1 mass drops below tol.
PprVector ppr_cpi(const TransitionMatrix& t, NodeId source, double alpha, double tol = 1e-10);

/// Forward push with (mass, residual) pairs; terminates once every node
/// satisfies residual(u)/degree(u) < eps. The source is pushed once even when
/// eps >= 1; a degree-0 source keeps its unit residual untouched.
PprVector ppr_push(const Graph& g, NodeId source, double alpha, double eps);

struct RankedNeighbors {
    std::vector<PprEntry> items;  // descending score; ties ascending id
    std::size_t k_requested = 0;
    std::size_t k_effective = 0;
};

struct TopkOptions {
    /// Ids at or above this bound are dropped (super nodes). Defaults to "keep
    /// everything".
    std::size_t ordinary_count = std::numeric_limits<std::size_t>::max();
    bool exclude_source = true;
    std::span<const NodeId> exclude = {};
};

RankedNeighbors topk(const PprVector& r, std::size_t k, const TopkOptions& opt = {});

}  // namespace vcrg
