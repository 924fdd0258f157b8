#include "vcrg/graph.hpp"

#include <algorithm>
#include <cmath>

namespace vcrg {

Graph Graph::from_edges(std::size_t n, std::span<const std::pair<NodeId, NodeId>> edges,
                        GraphBuildStats* stats) {
    GraphBuildStats local;
    std::vector<std::pair<NodeId, NodeId>> undirected;
    undirected.reserve(edges.size());
    for (auto [u, v] : edges) {
        if (u >= n || v >= n)
            throw ValidationError("from_edges: node id " + std::to_string(std::max(u, v)) +
                                  " out of range for n=" + std::to_string(n));
        if (u == v) {
            ++local.self_loops_dropped;
            continue;
        }
        if (u > v) std::swap(u, v);
        undirected.emplace_back(u, v);
    }
    std::sort(undirected.begin(), undirected.end());
    auto last = std::unique(undirected.begin(), undirected.end());
    local.duplicates_merged = static_cast<std::size_t>(undirected.end() - last);
    undirected.erase(last, undirected.end());

    Graph g;
    g.ordinary_count_ = n;
    std::vector<std::size_t> deg(n, 0);
    for (auto [u, v] : undirected) {
        ++deg[u];
        ++deg[v];
    }
    g.offsets_.assign(n + 1, 0);
    for (std::size_t i = 0; i < n; ++i) g.offsets_[i + 1] = g.offsets_[i] + deg[i];
    g.adj_.resize(g.offsets_[n]);
    std::vector<std::size_t> cursor(g.offsets_.begin(), g.offsets_.end() - 1);
    for (auto [u, v] : undirected) {
        g.adj_[cursor[u]++] = v;
        g.adj_[cursor[v]++] = u;
    }
    for (std::size_t u = 0; u < n; ++u)
        std::sort(g.adj_.begin() + static_cast<std::ptrdiff_t>(g.offsets_[u]),
                  g.adj_.begin() + static_cast<std::ptrdiff_t>(g.offsets_[u + 1]));
    if (stats) *stats = local;
    return g;
}

Graph Graph::from_parts(std::vector<std::size_t> offsets, std::vector<NodeId> adj,
                        std::size_t ordinary_count) {
    Graph g;
    g.offsets_ = std::move(offsets);
    g.adj_ = std::move(adj);
    g.ordinary_count_ = ordinary_count;
    g.validate();
    return g;
}

bool Graph::has_edge(NodeId u, NodeId v) const {
    auto ns = neighbors(u);
    return std::binary_search(ns.begin(), ns.end(), v);
}

std::vector<std::pair<NodeId, NodeId>> Graph::edge_list() const {
    std::vector<std::pair<NodeId, NodeId>> out;
    out.reserve(num_edges());
    for (NodeId u = 0; u < num_nodes(); ++u)
        for (NodeId v : neighbors(u))
            if (u < v) out.emplace_back(u, v);
    return out;
}

void Graph::validate() const {
    std::size_t n = num_nodes();
    if (offsets_.empty() || offsets_[0] != 0 || offsets_[n] != adj_.size())
        throw ValidationError("graph: inconsistent CSR offsets");
    if (ordinary_count_ > n) throw ValidationError("graph: ordinary_count exceeds node count");
    for (NodeId u = 0; u < n; ++u) {
        auto ns = neighbors(u);
        for (std::size_t i = 0; i < ns.size(); ++i) {
            NodeId v = ns[i];
            if (v >= n) throw ValidationError("graph: neighbor id out of range");
            if (v == u) throw ValidationError("graph: self-loop stored");
            if (i > 0 && ns[i - 1] >= v)
                throw ValidationError("graph: neighbor list not sorted/deduplicated at node " +
                                      std::to_string(u));
            if (!has_edge(v, u)) throw ValidationError("graph: asymmetric edge");
        }
    }
}

NormKind norm_kind_from_string(const std::string& s) {
    if (s == "column") return NormKind::column;
    if (s == "row") return NormKind::row;
    if (s == "symmetric") return NormKind::symmetric;
    if (s == "gcn_augmented") return NormKind::gcn_augmented;
    throw ValidationError("unknown normalization kind: " + s);
}

std::string to_string(NormKind kind) {
    switch (kind) {
        case NormKind::column: return "column";
        case NormKind::row: return "row";
        case NormKind::symmetric: return "symmetric";
        case NormKind::gcn_augmented: return "gcn_augmented";
    }
    return "?";
}

TransitionMatrix normalize(const Graph& g, NormKind kind) {
    TransitionMatrix t;
    t.g_ = &g;
    t.kind_ = kind;
    std::size_t n = g.num_nodes();
    t.scale_.resize(n);
    for (NodeId u = 0; u < n; ++u) {
        double d = static_cast<double>(g.degree(u));
        switch (kind) {
            case NormKind::column:
            case NormKind::row:
                t.scale_[u] = d > 0 ? 1.0 / d : 0.0;
                break;
            case NormKind::symmetric:
                t.scale_[u] = d > 0 ? 1.0 / std::sqrt(d) : 0.0;
                break;
            case NormKind::gcn_augmented:
                t.scale_[u] = 1.0 / std::sqrt(d + 1.0);
                break;
        }
    }
    return t;
}

void TransitionMatrix::apply(std::span<const double> x, std::span<double> y) const {
    std::size_t n = dim();
    if (x.size() != n || y.size() != n)
        throw ValidationError("TransitionMatrix::apply: dimension mismatch");
    switch (kind_) {
        case NormKind::column:
            // y(v) = sum over neighbors u of x(u)/deg(u)
            for (NodeId v = 0; v < n; ++v) {
                double acc = 0.0;
                for (NodeId u : g_->neighbors(v)) acc += x[u] * scale_[u];
                y[v] = acc;
            }
            break;
        case NormKind::row:
            for (NodeId u = 0; u < n; ++u) {
                double acc = 0.0;
                for (NodeId v : g_->neighbors(u)) acc += x[v];
                y[u] = acc * scale_[u];
            }
            break;
        case NormKind::symmetric:
            for (NodeId u = 0; u < n; ++u) {
                double acc = 0.0;
                for (NodeId v : g_->neighbors(u)) acc += x[v] * scale_[v];
                y[u] = acc * scale_[u];
            }
            break;
        case NormKind::gcn_augmented:
            for (NodeId u = 0; u < n; ++u) {
                double acc = x[u] * scale_[u];
                for (NodeId v : g_->neighbors(u)) acc += x[v] * scale_[v];
                y[u] = acc * scale_[u];
            }
            break;
    }
}

void TransitionMatrix::apply_walk(std::span<const double> x, std::span<double> y) const {
    if (kind_ != NormKind::row) {
        apply(x, y);
        return;
    }
    std::size_t n = dim();
    if (x.size() != n || y.size() != n)
        throw ValidationError("TransitionMatrix::apply_walk: dimension mismatch");
    // (P_row^T x)(v) = sum over neighbors u of x(u)/deg(u); on an undirected
    // graph this coincides with the column kind's literal product.
    for (NodeId v = 0; v < n; ++v) {
        double acc = 0.0;
        for (NodeId u : g_->neighbors(v)) acc += x[u] * scale_[u];
        y[v] = acc;
    }
}

MatD TransitionMatrix::multiply(const MatD& m) const {
    std::size_t n = dim();
    if (m.rows != n) throw ValidationError("TransitionMatrix::multiply: row count mismatch");
    MatD out(n, m.cols);
    switch (kind_) {
        case NormKind::column:
            for (NodeId v = 0; v < n; ++v) {
                double* dst = out.row(v);
                for (NodeId u : g_->neighbors(v)) {
                    const double* src = m.row(u);
                    double s = scale_[u];
                    for (std::size_t j = 0; j < m.cols; ++j) dst[j] += src[j] * s;
                }
            }
            break;
        case NormKind::row:
            for (NodeId u = 0; u < n; ++u) {
                double* dst = out.row(u);
                for (NodeId v : g_->neighbors(u)) {
                    const double* src = m.row(v);
                    for (std::size_t j = 0; j < m.cols; ++j) dst[j] += src[j];
                }
                double s = scale_[u];
                for (std::size_t j = 0; j < m.cols; ++j) dst[j] *= s;
            }
            break;
        case NormKind::symmetric:
            for (NodeId u = 0; u < n; ++u) {
                double* dst = out.row(u);
                for (NodeId v : g_->neighbors(u)) {
                    const double* src = m.row(v);
                    double s = scale_[v];
                    for (std::size_t j = 0; j < m.cols; ++j) dst[j] += src[j] * s;
                }
                double s = scale_[u];
                for (std::size_t j = 0; j < m.cols; ++j) dst[j] *= s;
            }
            break;
        case NormKind::gcn_augmented:
            for (NodeId u = 0; u < n; ++u) {
                double* dst = out.row(u);
                const double* self = m.row(u);
                double su = scale_[u];
                for (std::size_t j = 0; j < m.cols; ++j) dst[j] = self[j] * su;
                for (NodeId v : g_->neighbors(u)) {
                    const double* src = m.row(v);
                    double s = scale_[v];
                    for (std::size_t j = 0; j < m.cols; ++j) dst[j] += src[j] * s;
                }
                for (std::size_t j = 0; j < m.cols; ++j) dst[j] *= su;
            }
            break;
    }
    return out;
}

MatD spmm(const TransitionMatrix& t, const MatD& m) { return t.multiply(m); }

}  // namespace vcrg
