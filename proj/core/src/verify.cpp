#include "vcrg/verify.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "vcrg/common.hpp"
#include "vcrg/graph.hpp"
#include "vcrg/model.hpp"
#include "vcrg/ppr.hpp"
#include "vcrg/rewire.hpp"
#include "vcrg/synth.hpp"
#include "vcrg/theory.hpp"

namespace vcrg {

namespace {

// Flat random graph via the block model with a single block; retries the seed
// until edge sampling produces a nonempty graph.
Graph random_graph(std::size_t n, double p, std::uint64_t seed) {
    for (std::uint64_t s = seed;; ++s) {
        SbmSpec spec;
        spec.n = n;
        spec.b = 1;
        spec.p_in = p;
        spec.p_out = 0.0;
        spec.d = 1;
        spec.sigma_sep = 0.0;
        spec.seed = s;
        try {
            return generate_sbm(spec).graph;
        } catch (const ValidationError&) {
        }
    }
}

std::vector<double> dense_ppr(const TransitionMatrix& t, NodeId source, double alpha) {
    PprVector r = ppr_power(t, source, alpha, 1e-13, 4000);
    std::vector<double> out(t.dim(), 0.0);
    for (const auto& e : r.entries) out[e.node] = e.mass;
    return out;
}

std::vector<CheckResult> ppr_suite(std::uint64_t seed) {
    const double alpha = 0.85;
    const double eps = 1e-4;
    double cpi_dev = 0.0;
    double under_dev = 0.0;
    double res_ratio = 0.0;
    double l1_ratio = 0.0;
    Rng rng(splitmix64(seed ^ 0x707072ULL));
    for (int trial = 0; trial < 10; ++trial) {
        std::size_t n = 20 + rng.below(100);
        Graph g = random_graph(n, 0.08, rng.next());
        TransitionMatrix t = normalize(g, NormKind::column);
        NodeId source = static_cast<NodeId>(rng.below(g.num_nodes()));

        PprVector power = ppr_power(t, source, alpha, 1e-12);
        PprVector cpi = ppr_cpi(t, source, alpha, 1e-12);
        for (NodeId u = 0; u < g.num_nodes(); ++u)
            cpi_dev = std::max(cpi_dev, std::abs(power.at(u) - cpi.at(u)));

        std::vector<double> exact = dense_ppr(t, source, alpha);
        PprVector push = ppr_push(g, source, alpha, eps);
        double l1 = 0.0;
        for (NodeId u = 0; u < g.num_nodes(); ++u) {
            under_dev = std::max(under_dev, push.at(u) - exact[u]);
            l1 += std::abs(push.at(u) - exact[u]);
        }
        for (const auto& e : push.residual)
            if (g.degree(e.node) > 0)
                res_ratio = std::max(
                    e.mass / (eps * static_cast<double>(g.degree(e.node))), res_ratio);
        double bound = push.residual_sum() / (1.0 - alpha);
        if (bound > 0.0) l1_ratio = std::max(l1_ratio, l1 / bound);
    }
    return {
        {"ppr.cpi_vs_power", cpi_dev <= 1e-10, cpi_dev, 1e-10, "max |cpi - power| over 10 graphs"},
        {"ppr.push_underestimate", under_dev <= 1e-12, under_dev, 1e-12,
         "max (push - exact); push never overshoots"},
        {"ppr.push_residual_degree", res_ratio < 1.0, res_ratio, 1.0,
         "max residual/(eps*degree) at termination, strictly below 1"},
        {"ppr.push_mass_bound", l1_ratio <= 1.0, l1_ratio, 1.0,
         "l1(push - exact) against residual/(1-restart) bound"},
    };
}

std::vector<CheckResult> theorem_suite(std::uint64_t seed) {
    const double alpha = 0.85;
    Rng rng(splitmix64(seed ^ 0x74686dULL));

    double identity_dev = 0.0;
    double sum_dev = 0.0;
    for (int trial = 0; trial < 8; ++trial) {
        std::size_t n = 20 + rng.below(60);
        Graph g = random_graph(n, 0.1, rng.next());
        std::size_t groups = 2 + rng.below(4);
        std::vector<std::vector<NodeId>> members(groups);
        for (std::size_t c = 0; c < groups; ++c) {
            std::size_t size = 2 + rng.below(g.num_nodes() / 2);
            for (std::size_t i = 0; i < size; ++i)
                members[c].push_back(static_cast<NodeId>(rng.below(g.num_nodes())));
        }
        RewireResult rw = add_super_nodes(g, members);
        NodeId source = static_cast<NodeId>(rng.below(g.num_nodes()));
        MassTransferReport report = mass_transfer(g, rw.graph, source, alpha);
        identity_dev = std::max(identity_dev, report.max_identity_dev);
        sum_dev = std::max(sum_dev, std::abs(report.sum_c));
    }

    // Rewiring with zero groups leaves the walk untouched; the transfer
    // vector must then be exactly zero.
    double null_dev = 0.0;
    {
        Graph g = random_graph(30, 0.15, splitmix64(seed ^ 0x6e756c6cULL));
        RewireResult rw = add_super_nodes(g, std::vector<std::vector<NodeId>>{});
        MassTransferReport report = mass_transfer(g, rw.graph, 0, alpha);
        for (double v : report.c) null_dev = std::max(null_dev, std::abs(v));
    }

    double series_dev = 0.0;
    Rng srng(splitmix64(seed ^ 0x736572ULL));
    for (int trial = 0; trial < 5; ++trial) {
        std::size_t n = 10 + srng.below(40);
        Graph g = random_graph(n, 0.12, srng.next());
        TransitionMatrix t = normalize(g, NormKind::column);
        MatD x(g.num_nodes(), 3);
        Rng xr(srng.fork(trial));
        for (auto& v : x.v) v = xr.normal();
        series_dev = std::max(series_dev, verify_ppr_series(t, x, 0.15, 20));
    }

    // Path 0-1-2-3-4-5 plus one super node over every vertex: the far half
    // gets strictly closer to node 0, the near half does not.
    std::size_t fixture_mismatch = 0;
    {
        std::vector<std::pair<NodeId, NodeId>> edges;
        for (NodeId u = 0; u + 1 < 6; ++u) edges.emplace_back(u, u + 1);
        Graph path = Graph::from_edges(6, edges);
        RewireResult rw =
            add_super_nodes(path, std::vector<std::vector<NodeId>>{{0, 1, 2, 3, 4, 5}});
        NodeClassification cls = classify_nodes(path, rw.graph, 0);
        std::vector<NodeId> want_bright = {3, 4, 5}, want_faded = {1, 2};
        if (cls.brightened != want_bright) ++fixture_mismatch;
        if (cls.faded != want_faded) ++fixture_mismatch;
    }

    return {
        {"theorem.mass_transfer_identity", identity_dev <= 1e-8, identity_dev, 1e-8,
         "max |c + r - r~| over 8 rewired graphs"},
        {"theorem.mass_transfer_sum", sum_dev <= 1e-10, sum_dev, 1e-10, "max |sum(c)|"},
        {"theorem.null_rewiring", null_dev <= 0.0, null_dev, 0.0,
         "c is exactly zero when nothing is rewired"},
        {"theorem.ppr_series", series_dev <= 1e-10, series_dev, 1e-10,
         "recurrence vs geometric series, t <= 20"},
        {"theorem.brightened_fixture", fixture_mismatch == 0,
         static_cast<double>(fixture_mismatch), 0.0,
         "path + all-member super node splits into {3,4,5} / {1,2}"},
    };
}

TokenList random_token_list(Rng& rng, std::size_t rows, std::size_t token_dim,
                            std::size_t masked) {
    TokenList list;
    list.t = MatF(rows, token_dim);
    for (auto& v : list.t.v) v = static_cast<float>(rng.normal());
    list.mask.assign(rows, 1);
    for (std::size_t i = 0; i < masked; ++i) {
        std::size_t r = rows - 1 - i;
        list.mask[r] = 0;
        for (std::size_t c = 0; c < token_dim; ++c) list.t(r, c) = 0.0f;
    }
    return list;
}

std::vector<CheckResult> gradient_suite(std::uint64_t seed) {
    ModelConfig cfg;
    cfg.layers = 1;
    cfg.width = 8;
    cfg.heads = 2;
    cfg.token_dim = 5;
    cfg.classes = 3;
    cfg.readout = Readout::mean;

    Rng rng(splitmix64(seed ^ 0x67726164ULL));
    std::vector<TokenList> lists;
    for (int i = 0; i < 3; ++i) lists.push_back(random_token_list(rng, 6, cfg.token_dim, i));
    std::vector<const TokenList*> batch;
    for (const auto& l : lists) batch.push_back(&l);
    std::vector<std::int32_t> labels = {0, 2, 1};

    ModelParamsD params = ModelParamsD::init(cfg, splitmix64(seed ^ 0x70ULL));
    GradCheckReport at_init = gradient_check(params, batch, labels);

    TrainConfig tc;
    tc.model = cfg;
    Adam<double> opt(tc, params);
    ModelParamsD grads = ModelParamsD::zeros(cfg);
    for (int step = 0; step < 10; ++step) {
        loss_and_backward(params, batch, labels, grads);
        opt.step(params, grads);
    }
    GradCheckReport after = gradient_check(params, batch, labels);

    return {
        {"gradients.at_init", at_init.pass(1e-4), at_init.max_rel_err, 1e-4,
         "analytic vs central difference, fresh parameters"},
        {"gradients.after_10_steps", after.pass(1e-4), after.max_rel_err, 1e-4,
         "analytic vs central difference after 10 optimizer steps"},
    };
}

}  // namespace

std::vector<CheckResult> run_verify_suite(const std::string& suite, std::uint64_t seed) {
    if (suite == "ppr") return ppr_suite(seed);
    if (suite == "theorems") return theorem_suite(seed);
    if (suite == "gradients") return gradient_suite(seed);
    if (suite == "all") {
        std::vector<CheckResult> all = ppr_suite(seed);
        for (auto& c : theorem_suite(seed)) all.push_back(std::move(c));
        for (auto& c : gradient_suite(seed)) all.push_back(std::move(c));
        return all;
    }
    throw ValidationError("unknown verify suite: " + suite +
                          " (expected ppr, theorems, gradients, or all)");
}

bool all_passed(const std::vector<CheckResult>& checks) {
    return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.pass; });
}

std::string checks_to_json(const std::vector<CheckResult>& checks) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& c : checks)
        arr.push_back({{"name", c.name},
                       {"pass", c.pass},
                       {"value", c.value},
                       {"threshold", c.threshold},
                       {"detail", c.detail}});
    nlohmann::json root;
    root["checks"] = arr;
    root["all_passed"] = all_passed(checks);
    return root.dump(2) + "\n";
}

}  // namespace vcrg
