#include "vcrg/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace vcrg {

FeatureMode feature_mode_from_string(const std::string& s) {
    if (s == "label_aligned") return FeatureMode::label_aligned;
    if (s == "label_anti_aligned") return FeatureMode::label_anti_aligned;
    throw ValidationError("unknown feature mode: " + s);
}

std::string to_string(FeatureMode mode) {
    return mode == FeatureMode::label_aligned ? "label_aligned" : "label_anti_aligned";
}

void SbmSpec::validate() const {
    if (n < 2) throw ValidationError("sbm: n must be at least 2");
    if (b < 1 || b > n) throw ValidationError("sbm: block count out of range");
    if (!(p_in >= 0.0 && p_in <= 1.0) || !(p_out >= 0.0 && p_out <= 1.0))
        throw ValidationError("sbm: probabilities must lie in [0,1]");
    if (d < b)
        throw ValidationError("sbm: feature dimension " + std::to_string(d) +
                              " must be at least the block count " + std::to_string(b) +
                              " (class means use one axis each)");
    if (sigma_sep < 0.0) throw ValidationError("sbm: sigma_sep must be nonnegative");
}

namespace {

/// Appends i's forward neighbors in [begin, end) with probability p each,
/// via geometric gap sampling.
void sample_row(Rng& rng, double p, NodeId i, NodeId begin, NodeId end,
                std::vector<std::pair<NodeId, NodeId>>& edges) {
    if (p <= 0.0 || begin >= end) return;
    if (p >= 1.0) {
        for (NodeId j = begin; j < end; ++j) edges.emplace_back(i, j);
        return;
    }
    double log1p = std::log1p(-p);
    NodeId j = begin;
    while (true) {
        double u = rng.unit_pos();
        double gap = std::floor(std::log(u) / log1p);
        if (gap > static_cast<double>(end - j)) break;
        j += static_cast<NodeId>(gap);
        if (j >= end) break;
        edges.emplace_back(i, j);
        ++j;
        if (j >= end) break;
    }
}

bool is_connected(const Graph& g) {
    std::size_t n = g.num_nodes();
    std::vector<std::uint8_t> seen(n, 0);
    std::vector<NodeId> stack = {0};
    seen[0] = 1;
    std::size_t count = 1;
    while (!stack.empty()) {
        NodeId u = stack.back();
        stack.pop_back();
        for (NodeId v : g.neighbors(u)) {
            if (!seen[v]) {
                seen[v] = 1;
                ++count;
                stack.push_back(v);
            }
        }
    }
    return count == n;
}

}  // namespace

SbmData generate_sbm(const SbmSpec& spec) {
    spec.validate();
    Rng root(spec.seed);

    std::size_t n = spec.n;
    std::uint32_t b = spec.b;
    std::vector<NodeId> block_start(b + 1, 0);
    for (std::uint32_t g = 0; g < b; ++g) {
        std::size_t size = n / b + (g < n % b ? 1 : 0);
        block_start[g + 1] = block_start[g] + static_cast<NodeId>(size);
    }

    SbmData out;
    out.labels.num_classes = static_cast<std::int32_t>(b);
    out.labels.y.resize(n);
    for (std::uint32_t g = 0; g < b; ++g)
        for (NodeId i = block_start[g]; i < block_start[g + 1]; ++i)
            out.labels.y[i] = static_cast<std::int32_t>(g);

    std::vector<std::pair<NodeId, NodeId>> edges;
    {
        Rng rng(root.fork(1));
        for (std::uint32_t g = 0; g < b; ++g) {
            for (NodeId i = block_start[g]; i < block_start[g + 1]; ++i) {
                sample_row(rng, spec.p_in, i, i + 1, block_start[g + 1], edges);
                for (std::uint32_t h = g + 1; h < b; ++h)
                    sample_row(rng, spec.p_out, i, block_start[h], block_start[h + 1], edges);
            }
        }
    }
    if (edges.empty()) throw ValidationError("sbm: generated graph has no edges");
    out.graph = Graph::from_edges(n, edges);

    {
        Rng rng(root.fork(2));
        out.features = MatD(n, spec.d);
        double mean_coord = spec.sigma_sep / std::sqrt(2.0);
        for (std::size_t i = 0; i < n; ++i) {
            double* row = out.features.row(i);
            for (std::size_t j = 0; j < spec.d; ++j) row[j] = rng.normal();
            row[static_cast<std::size_t>(out.labels.y[i])] += mean_coord;
        }
    }

    {
        Rng rng(root.fork(3));
        std::vector<NodeId> perm(n);
        std::iota(perm.begin(), perm.end(), 0);
        rng.shuffle(perm);
        std::size_t n_train = n * 6 / 10, n_val = n * 2 / 10;
        out.splits.train.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
        out.splits.val.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train),
                              perm.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
        out.splits.test.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), perm.end());
    }

    out.homophily = edge_homophily(out.graph, out.labels);
    out.connected = is_connected(out.graph);
    bool hetero_probs = spec.p_out > spec.p_in;
    out.regime_warning = (spec.feature_mode == FeatureMode::label_anti_aligned) != hetero_probs;
    return out;
}

double edge_homophily(const Graph& g, const LabelVector& labels) {
    if (g.num_edges() == 0) throw ValidationError("edge_homophily: graph has no edges");
    std::size_t same = 0, total = 0;
    for (NodeId u = 0; u < g.num_nodes(); ++u) {
        for (NodeId v : g.neighbors(u)) {
            if (u >= v) continue;
            if (u >= labels.y.size() || v >= labels.y.size() || labels.y[u] < 0 || labels.y[v] < 0)
                throw ValidationError("edge_homophily: unlabeled endpoint on edge " +
                                      std::to_string(u) + "-" + std::to_string(v));
            ++total;
            if (labels.y[u] == labels.y[v]) ++same;
        }
    }
    return static_cast<double>(same) / static_cast<double>(total);
}

}  // namespace vcrg
