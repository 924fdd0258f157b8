#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vcrg/common.hpp"
#include "vcrg/data.hpp"
#include "vcrg/graph.hpp"

namespace vcrg {

struct PartitionAssignment {
    std::vector<std::uint32_t> cluster;  // per ordinary node
    std::uint32_t s = 0;
    std::uint64_t seed = 0;
    std::vector<std::size_t> sizes;
};

struct ContentAssignment {
    enum class Source { train_labels, kmeans };
    std::vector<std::int32_t> group;  // per ordinary node; -1 = unassigned
    std::uint32_t s = 0;
    Source source = Source::kmeans;
    std::uint64_t seed = 0;
};

/// Streaming balanced partitioner: greedy placement maximizing
/// |N(v) ∩ cluster| − delta_cost(size) with size penalty exponent 1.5 and a
/// hard capacity of ceil(1.1·n/s), over a seeded stream order; empty clusters
/// are repaired deterministically, then greedy move sweeps refine the cut to
/// a fixed point (capped at 50 passes).
PartitionAssignment partition(const Graph& g, std::uint32_t s, std::uint64_t seed);

/// Count of edges with endpoints in different clusters.
std::size_t cut_size(const Graph& g, const std::vector<std::uint32_t>& cluster);

/// Lloyd's algorithm with k-means++ seeding, at most 100 iterations, relative
/// inertia tolerance 1e-4. Empty clusters are reseeded to the point farthest
/// from its current center (ties to the lowest id).
ContentAssignment kmeans_pseudo_labels(const MatD& x, std::uint32_t s, std::uint64_t seed);

/// One group per label class; only nodes in the training split are assigned.
ContentAssignment content_from_train_labels(const LabelVector& labels, const Splits& splits);

struct RewireResult {
    Graph graph;
    std::vector<std::uint32_t> empty_groups;  // super nodes with no members
};

RewireResult add_super_nodes(const Graph& g, const PartitionAssignment& a);
RewireResult add_super_nodes(const Graph& g, const ContentAssignment& a);
/// Core form: group g of `members` becomes super node ordinary_count + g.
RewireResult add_super_nodes(const Graph& g, const std::vector<std::vector<NodeId>>& members);

std::string serialize_partition(const PartitionAssignment& a);
std::string serialize_content(const ContentAssignment& a);
PartitionAssignment parse_partition(const std::string& text);
ContentAssignment parse_content(const std::string& text);

}  // namespace vcrg
