#include "vcrg/theory.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <unordered_set>

#include "vcrg/ppr.hpp"

namespace vcrg {

namespace {

constexpr std::size_t kUnreachable = std::numeric_limits<std::size_t>::max();

std::vector<std::size_t> bfs_distances(const Graph& g, NodeId start) {
    std::vector<std::size_t> dist(g.num_nodes(), kUnreachable);
    std::deque<NodeId> queue = {start};
    dist[start] = 0;
    while (!queue.empty()) {
        NodeId u = queue.front();
        queue.pop_front();
        for (NodeId v : g.neighbors(u)) {
            if (dist[v] == kUnreachable) {
                dist[v] = dist[u] + 1;
                queue.push_back(v);
            }
        }
    }
    return dist;
}

std::vector<double> dense_ppr(const TransitionMatrix& t, NodeId source, double alpha, double tol) {
    PprVector r = ppr_power(t, source, alpha, tol, 2000);
    std::vector<double> dense(t.dim(), 0.0);
    for (const auto& e : r.entries) dense[e.node] = e.mass;
    return dense;
}

char sign_of(double x, double tiny) { return x > tiny ? '+' : (x < -tiny ? '-' : '0'); }

}  // namespace

MassTransferReport mass_transfer(const Graph& g, const Graph& rewired, NodeId source, double alpha,
                                 double series_tol) {
    std::size_t n0 = g.num_nodes();
    std::size_t n1 = rewired.num_nodes();
    if (n1 < n0 || rewired.ordinary_count() != g.ordinary_count())
        throw ValidationError("mass_transfer: rewired graph does not extend the original");
    if (source >= n0) throw ValidationError("mass_transfer: source out of range");

    TransitionMatrix p0 = normalize(g, NormKind::column);
    TransitionMatrix p1 = normalize(rewired, NormKind::column);

    // The original walk never reaches super nodes (their columns are zero in
    // the zero-extended P), so r on P equals the original PPR padded with
    // zeros.
    std::vector<double> r(n1, 0.0);
    {
        std::vector<double> r0 = dense_ppr(p0, source, alpha, 1e-13);
        std::copy(r0.begin(), r0.end(), r.begin());
    }
    std::vector<double> r_tilde = dense_ppr(p1, source, alpha, 1e-13);

    auto apply_diff = [&](const std::vector<double>& x, std::vector<double>& y) {
        // y = (P~ - P) x with P zero-extended: subtract the original product
        // on the first n0 coordinates only.
        std::vector<double> yp(n1, 0.0);
        p1.apply_walk(x, yp);
        std::vector<double> x0(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(n0));
        std::vector<double> y0(n0, 0.0);
        p0.apply_walk(x0, y0);
        y = std::move(yp);
        for (std::size_t u = 0; u < n0; ++u) y[u] -= y0[u];
    };

    MassTransferReport rep;
    rep.c.assign(n1, 0.0);
    std::vector<double> term(n1, 0.0), next(n1, 0.0);
    apply_diff(r, term);
    for (double& v : term) v *= alpha;
    double term_mass = 0.0;
    for (double v : term) term_mass += std::abs(v);
    while (term_mass >= series_tol) {
        for (std::size_t u = 0; u < n1; ++u) rep.c[u] += term[u];
        ++rep.series_terms;
        rep.term_norms.push_back(term_mass);
        p1.apply_walk(term, next);
        term_mass = 0.0;
        for (std::size_t u = 0; u < n1; ++u) {
            next[u] *= alpha;
            term_mass += std::abs(next[u]);
        }
        std::swap(term, next);
        if (rep.series_terms > 100000)
            throw std::runtime_error("mass_transfer: series failed to converge");
    }
    for (std::size_t u = 0; u < n1; ++u) rep.c[u] += term[u];
    ++rep.series_terms;
    rep.term_norms.push_back(term_mass);

    rep.r = std::move(r);
    rep.r_tilde = std::move(r_tilde);
    for (std::size_t u = 0; u < n1; ++u) {
        rep.max_identity_dev =
            std::max(rep.max_identity_dev, std::abs(rep.c[u] + rep.r[u] - rep.r_tilde[u]));
        rep.sum_c += rep.c[u];
    }

    NodeClassification cls = classify_nodes(g, rewired, source);
    std::unordered_set<NodeId> brightened(cls.brightened.begin(), cls.brightened.end());
    for (std::size_t u = 0; u < n1; ++u) {
        double cu = rep.c[u];
        if (u == source) {
            rep.target_mass += cu;
        } else if (u >= rewired.ordinary_count()) {
            rep.super_mass += cu;
        } else if (brightened.count(static_cast<NodeId>(u))) {
            rep.brightened_mass += cu;
        } else {
            rep.faded_mass += cu;
        }
    }
    double tiny = 1e-12;
    rep.sign_pattern = std::string("target:") + sign_of(rep.target_mass, tiny) +
                       " faded:" + sign_of(rep.faded_mass, tiny) +
                       " brightened:" + sign_of(rep.brightened_mass, tiny) +
                       " super:" + sign_of(rep.super_mass, tiny);
    return rep;
}

NodeClassification classify_nodes(const Graph& g, const Graph& rewired, NodeId target) {
    if (target >= g.num_nodes()) throw ValidationError("classify_nodes: target out of range");
    if (rewired.num_nodes() < g.num_nodes() || rewired.ordinary_count() != g.ordinary_count())
        throw ValidationError("classify_nodes: rewired graph does not extend the original");

    NodeClassification out;
    out.dist_before = bfs_distances(g, target);
    out.dist_after = bfs_distances(rewired, target);
    for (NodeId u = 0; u < g.ordinary_count(); ++u) {
        if (u == target) continue;
        if (out.dist_after[u] < out.dist_before[u])
            out.brightened.push_back(u);
        else
            out.faded.push_back(u);
    }
    return out;
}

double verify_ppr_series(const TransitionMatrix& t, const MatD& x, double alpha,
                         std::size_t t_max) {
    if (t_max < 1) throw ValidationError("verify_ppr_series: t_max must be at least 1");
    if (!(alpha >= 0.0 && alpha <= 1.0))
        throw ValidationError("verify_ppr_series: alpha must lie in [0,1]");

    MatD h = x;          // recurrence iterate
    MatD power = x;      // P^i X
    MatD closed(x.rows, x.cols);
    double beta = 1.0 - alpha;
    double max_dev = 0.0;

    // closed(t) = sum_{i=0}^{t-1} alpha beta^i P^i X + beta^t P^t X,
    // accumulated incrementally: partial holds the sum through i = t-1.
    MatD partial(x.rows, x.cols);
    double beta_pow = 1.0;  // beta^t alongside power = P^t X
    for (std::size_t step = 1; step <= t_max; ++step) {
        {
            MatD next = t.multiply(h);
            for (std::size_t i = 0; i < h.size(); ++i) h.v[i] = beta * next.v[i] + alpha * x.v[i];
        }
        for (std::size_t i = 0; i < partial.size(); ++i)
            partial.v[i] += alpha * beta_pow * power.v[i];
        power = t.multiply(power);
        beta_pow *= beta;
        for (std::size_t i = 0; i < closed.size(); ++i)
            closed.v[i] = partial.v[i] + beta_pow * power.v[i];

        for (std::size_t i = 0; i < h.size(); ++i)
            max_dev = std::max(max_dev, std::abs(h.v[i] - closed.v[i]));
    }
    return max_dev;
}

double verify_gcn_equivalence(const TokenStore& store, const TransitionMatrix& t_sym,
                              const MatD& x) {
    if (store.header.n != t_sym.dim() || x.rows != t_sym.dim() || store.header.d != x.cols)
        throw ValidationError("verify_gcn_equivalence: store header does not match inputs");
    std::size_t l_hops = store.header.l_hops;
    std::vector<MatD> hops = hop_aggregates(t_sym, x, l_hops);
    std::vector<double> w = hop_weights(l_hops);

    double max_dev = 0.0;
    std::size_t d = x.cols;
    for (const TokenList& list : store.lists) {
        for (std::size_t l = 0; l < l_hops; ++l) {
            const float* row = list.t.row(1 + l);
            const double* expect = hops[l].row(list.node);
            for (std::size_t j = 0; j < d; ++j)
                max_dev = std::max(max_dev, std::abs(static_cast<double>(row[j]) - expect[j]));
            max_dev = std::max(max_dev, std::abs(static_cast<double>(row[d]) - w[l]));
        }
    }
    return max_dev;
}

}  // namespace vcrg
