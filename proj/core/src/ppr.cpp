#include "vcrg/ppr.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

#include <nlohmann/json.hpp>

namespace vcrg {

namespace {

std::vector<PprEntry> sparsify(std::span<const double> dense) {
    std::vector<PprEntry> out;
    for (NodeId u = 0; u < dense.size(); ++u)
        if (dense[u] > 0.0) out.push_back({u, dense[u]});
    return out;
}

void check_alpha(double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0))
        throw ValidationError("ppr: alpha must lie in (0,1), got " + std::to_string(alpha));
}

}  // namespace

double PprVector::at(NodeId u) const {
    auto it = std::lower_bound(entries.begin(), entries.end(), u,
                               [](const PprEntry& e, NodeId id) { return e.node < id; });
    return (it != entries.end() && it->node == u) ? it->mass : 0.0;
}

double PprVector::residual_at(NodeId u) const {
    auto it = std::lower_bound(residual.begin(), residual.end(), u,
                               [](const PprEntry& e, NodeId id) { return e.node < id; });
    return (it != residual.end() && it->node == u) ? it->mass : 0.0;
}

double PprVector::mass_sum() const {
    double s = 0.0;
    for (const auto& e : entries) s += e.mass;
    return s;
}

double PprVector::residual_sum() const {
    double s = 0.0;
    for (const auto& e : residual) s += e.mass;
    return s;
}

std::string PprVector::to_json() const {
    nlohmann::json j;
    j["source"] = source;
    j["alpha"] = alpha;
    switch (method) {
        case PprMethod::power: j["method"] = "power"; break;
        case PprMethod::cpi: j["method"] = "cpi"; break;
        case PprMethod::push: j["method"] = "push"; break;
    }
    auto pairs = nlohmann::json::array();
    for (const auto& e : entries) pairs.push_back({e.node, e.mass});
    j["entries"] = pairs;
    if (method == PprMethod::push) {
        auto res = nlohmann::json::array();
        for (const auto& e : residual) res.push_back({e.node, e.mass});
        j["residual"] = res;
    }
    return j.dump();
}

PprVector ppr_power(const TransitionMatrix& t, NodeId source, double alpha, double tol,
                    std::size_t max_iters) {
    check_alpha(alpha);
    if (tol <= 0.0) throw ValidationError("ppr_power: tol must be positive");
    std::size_t n = t.dim();
    if (source >= n) throw ValidationError("ppr_power: source out of range");

    std::vector<double> r(n, 0.0), next(n, 0.0);
    r[source] = 1.0;
    double change = 0.0;
    for (std::size_t it = 0; it < max_iters; ++it) {
        t.apply_walk(r, next);
        for (std::size_t u = 0; u < n; ++u) next[u] *= alpha;
        next[source] += 1.0 - alpha;
        change = 0.0;
        for (std::size_t u = 0; u < n; ++u) change += std::abs(next[u] - r[u]);
        std::swap(r, next);
        if (change < tol) {
            PprVector out;
            out.source = source;
            out.alpha = alpha;
            out.method = PprMethod::power;
            out.entries = sparsify(r);
            return out;
        }
    }
    throw std::runtime_error("ppr_power: no convergence after " + std::to_string(max_iters) +
                             " iterations, last l1 change " + std::to_string(change));
}

PprVector ppr_cpi(const TransitionMatrix& t, NodeId source, double alpha, double tol) {
    check_alpha(alpha);
    if (tol <= 0.0) throw ValidationError("ppr_cpi: tol must be positive");
    std::size_t n = t.dim();
    if (source >= n) throw ValidationError("ppr_cpi: source out of range");

    std::vector<double> r(n, 0.0), term(n, 0.0), next(n, 0.0);
    term[source] = 1.0 - alpha;
    double term_mass = 1.0 - alpha;
    while (term_mass >= tol) {
        for (std::size_t u = 0; u < n; ++u) r[u] += term[u];
        t.apply_walk(term, next);
        term_mass = 0.0;
        for (std::size_t u = 0; u < n; ++u) {
            next[u] *= alpha;
            term_mass += next[u];
        }
        std::swap(term, next);
    }
    for (std::size_t u = 0; u < n; ++u) r[u] += term[u];

    PprVector out;
    out.source = source;
    out.alpha = alpha;
    out.method = PprMethod::cpi;
    out.entries = sparsify(r);
    return out;
}

PprVector ppr_push(const Graph& g, NodeId source, double alpha, double eps) {
    check_alpha(alpha);
    if (eps <= 0.0) throw ValidationError("ppr_push: eps must be positive");
    std::size_t n = g.num_nodes();
    if (source >= n) throw ValidationError("ppr_push: source out of range");

    std::vector<double> p(n, 0.0), res(n, 0.0);
    res[source] = 1.0;

    std::deque<NodeId> queue;
    std::vector<std::uint8_t> queued(n, 0);

    auto push_node = [&](NodeId u) {
        double m = res[u];
        res[u] = 0.0;
        p[u] += (1.0 - alpha) * m;
        std::size_t deg = g.degree(u);
        double share = alpha * m / static_cast<double>(deg);
        for (NodeId v : g.neighbors(u)) {
            res[v] += share;
            std::size_t dv = g.degree(v);
            if (!queued[v] && res[v] >= eps * static_cast<double>(dv)) {
                queued[v] = 1;
                queue.push_back(v);
            }
        }
    };

    // The source is pushed once unconditionally, so even eps >= 1 moves the
    // restart mass (1-alpha) onto it. A degree-0 source is a sink: its
    // residual cannot move, so it stays in the residual map untouched.
    if (g.degree(source) > 0) {
        push_node(source);
        while (!queue.empty()) {
            NodeId u = queue.front();
            queue.pop_front();
            queued[u] = 0;
            if (res[u] >= eps * static_cast<double>(g.degree(u))) push_node(u);
        }
    }

    PprVector out;
    out.source = source;
    out.alpha = alpha;
    out.method = PprMethod::push;
    out.entries = sparsify(p);
    out.residual = sparsify(res);
    return out;
}

RankedNeighbors topk(const PprVector& r, std::size_t k, const TopkOptions& opt) {
    std::vector<PprEntry> cand;
    cand.reserve(r.entries.size());
    for (const auto& e : r.entries) {
        if (e.node >= opt.ordinary_count) continue;
        if (opt.exclude_source && e.node == r.source) continue;
        if (!opt.exclude.empty() &&
            std::find(opt.exclude.begin(), opt.exclude.end(), e.node) != opt.exclude.end())
            continue;
        cand.push_back(e);
    }
    auto better = [](const PprEntry& a, const PprEntry& b) {
        if (a.mass != b.mass) return a.mass > b.mass;
        return a.node < b.node;
    };
    RankedNeighbors out;
    out.k_requested = k;
    out.k_effective = std::min(k, cand.size());
    if (out.k_effective > 0 && out.k_effective < cand.size())
        std::nth_element(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(out.k_effective),
                         cand.end(), better);
    cand.resize(out.k_effective);
    std::sort(cand.begin(), cand.end(), better);
    out.items = std::move(cand);
    return out;
}

}  // namespace vcrg
