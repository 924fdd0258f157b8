#pragma once

#include <sys/wait.h>
#include <unistd.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "vcrg/common.hpp"
#include "vcrg/graph.hpp"

namespace testutil {

using vcrg::Graph;
using vcrg::MatD;
using vcrg::NodeId;

using EdgeList = std::vector<std::pair<NodeId, NodeId>>;

inline Graph path_graph(std::size_t n) {
    EdgeList edges;
    for (std::size_t i = 0; i + 1 < n; ++i)
        edges.emplace_back(static_cast<NodeId>(i), static_cast<NodeId>(i + 1));
    return Graph::from_edges(n, edges);
}

inline Graph cycle_graph(std::size_t n) {
    EdgeList edges;
    for (std::size_t i = 0; i < n; ++i)
        edges.emplace_back(static_cast<NodeId>(i), static_cast<NodeId>((i + 1) % n));
    return Graph::from_edges(n, edges);
}

inline Graph complete_graph(std::size_t n) {
    EdgeList edges;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            edges.emplace_back(static_cast<NodeId>(i), static_cast<NodeId>(j));
    return Graph::from_edges(n, edges);
}

/// Star with the center at node 0 and `leaves` leaves.
inline Graph star_graph(std::size_t leaves) {
    EdgeList edges;
    for (std::size_t i = 1; i <= leaves; ++i) edges.emplace_back(0, static_cast<NodeId>(i));
    return Graph::from_edges(leaves + 1, edges);
}

/// Erdos-Renyi draw; guaranteed to contain at least the edge (0, 1).
inline Graph er_graph(std::size_t n, double p, std::uint64_t seed) {
    vcrg::Rng rng(seed);
    EdgeList edges;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (rng.unit() < p) edges.emplace_back(static_cast<NodeId>(i), static_cast<NodeId>(j));
    if (edges.empty()) edges.emplace_back(0, 1);
    return Graph::from_edges(n, edges);
}

inline MatD random_features(std::size_t n, std::size_t d, std::uint64_t seed) {
    vcrg::Rng rng(seed);
    MatD x(n, d);
    for (auto& v : x.v) v = rng.normal();
    return x;
}

/// Dense n x n copy of a transition matrix, built independently from degrees.
inline MatD dense_transition(const Graph& g, vcrg::NormKind kind) {
    std::size_t n = g.num_nodes();
    MatD p(n, n);
    auto deg = [&](NodeId u) { return static_cast<double>(g.degree(u)); };
    for (NodeId u = 0; u < n; ++u) {
        for (NodeId v : g.neighbors(u)) {
            switch (kind) {
                case vcrg::NormKind::column: p(u, v) = 1.0 / deg(v); break;
                case vcrg::NormKind::row: p(u, v) = 1.0 / deg(u); break;
                case vcrg::NormKind::symmetric: p(u, v) = 1.0 / std::sqrt(deg(u) * deg(v)); break;
                case vcrg::NormKind::gcn_augmented:
                    p(u, v) = 1.0 / std::sqrt((deg(u) + 1.0) * (deg(v) + 1.0));
                    break;
            }
        }
        if (kind == vcrg::NormKind::gcn_augmented) p(u, u) = 1.0 / (deg(u) + 1.0);
    }
    return p;
}

inline MatD dense_matmul(const MatD& a, const MatD& b) {
    MatD c(a.rows, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t k = 0; k < a.cols; ++k) {
            double aik = a(i, k);
            if (aik == 0.0) continue;
            for (std::size_t j = 0; j < b.cols; ++j) c(i, j) += aik * b(k, j);
        }
    return c;
}

/// Solves A x = b by Gaussian elimination with partial pivoting.
inline std::vector<double> dense_solve(MatD a, std::vector<double> b) {
    std::size_t n = a.rows;
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(a(r, col)) > std::abs(a(piv, col))) piv = r;
        if (piv != col) {
            for (std::size_t j = 0; j < n; ++j) std::swap(a(col, j), a(piv, j));
            std::swap(b[col], b[piv]);
        }
        double diag = a(col, col);
        for (std::size_t r = col + 1; r < n; ++r) {
            double f = a(r, col) / diag;
            if (f == 0.0) continue;
            for (std::size_t j = col; j < n; ++j) a(r, j) -= f * a(col, j);
            b[r] -= f * b[col];
        }
    }
    std::vector<double> x(n, 0.0);
    for (std::size_t i = n; i-- > 0;) {
        double s = b[i];
        for (std::size_t j = i + 1; j < n; ++j) s -= a(i, j) * x[j];
        x[i] = s / a(i, i);
    }
    return x;
}

/// PPR reference: solves (I - alpha P_walk) r = (1 - alpha) e_source densely.
inline std::vector<double> solve_ppr(const Graph& g, vcrg::NormKind kind, NodeId source,
                                     double alpha) {
    std::size_t n = g.num_nodes();
    MatD p = dense_transition(g, kind);
    MatD a(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            // Walk semantics: the row kind propagates mass through P^T.
            double pij = (kind == vcrg::NormKind::row) ? p(j, i) : p(i, j);
            a(i, j) = (i == j ? 1.0 : 0.0) - alpha * pij;
        }
    std::vector<double> b(n, 0.0);
    b[source] = 1.0 - alpha;
    return dense_solve(std::move(a), std::move(b));
}

class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        auto base = std::filesystem::temp_directory_path();
        for (int i = 0; i < 10000; ++i) {
            auto candidate = base / (tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(i));
            std::error_code ec;
            if (std::filesystem::create_directory(candidate, ec)) {
                dir_ = candidate;
                return;
            }
        }
        throw std::runtime_error("TempDir: could not create a scratch directory");
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(dir_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return dir_; }
    std::filesystem::path file(const std::string& name) const { return dir_ / name; }

private:
    std::filesystem::path dir_;
};

struct CmdResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

inline std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Runs a shell command with stdout/stderr captured to files in `scratch`.
inline CmdResult run_cmd(const std::string& cmd, const TempDir& scratch) {
    auto out_path = scratch.file("cmd.out");
    auto err_path = scratch.file("cmd.err");
    std::string full = cmd + " >" + out_path.string() + " 2>" + err_path.string();
    int status = std::system(full.c_str());
    CmdResult r;
    r.out = slurp(out_path);
    r.err = slurp(err_path);
    if (status == -1)
        r.exit_code = -1;
    else if (WIFEXITED(status))
        r.exit_code = WEXITSTATUS(status);
    else
        r.exit_code = 128;
    return r;
}

inline const char* cli_binary() { return std::getenv("VCRG_BIN"); }

}  // namespace testutil
