#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "vcrg/common.hpp"
#include "vcrg/graph.hpp"
#include "vcrg/tokens.hpp"

namespace vcrg {

/// Mass-transfer characterization of a rewiring: with r the PPR vector on the
/// original walk (zero-extended over super nodes, which act as dangling
/// nodes), r~ the PPR vector on the rewired walk, the transfer vector
/// c = alpha * sum_i alpha^i P~^i (P~ - P) r satisfies c + r = r~ and
/// sum(c) = 0. Both identities are evaluated numerically; the sign split of c
/// over brightened/faded/super nodes is reported, not asserted.
struct MassTransferReport {
    std::vector<double> c, r, r_tilde;
    double max_identity_dev = 0.0;  // max |c + r - r~|
    double sum_c = 0.0;
    std::size_t series_terms = 0;
    std::vector<double> term_norms;  // l1 norm of each accumulated series term
    double brightened_mass = 0.0;
    double faded_mass = 0.0;
    double super_mass = 0.0;
    double target_mass = 0.0;
    std::string sign_pattern;
};

MassTransferReport mass_transfer(const Graph& g, const Graph& rewired, NodeId source, double alpha,
                                 double series_tol = 1e-12);

struct NodeClassification {
    std::vector<std::size_t> dist_before, dist_after;  // SIZE_MAX = unreachable
    std::vector<NodeId> brightened;                    // distance strictly decreased
    std::vector<NodeId> faded;                         // distance unchanged
};

/// BFS on both graphs from target; super nodes are traversable in the rewired
/// graph but excluded from the reported sets.
NodeClassification classify_nodes(const Graph& g, const Graph& rewired, NodeId target);

/// Checks the recurrence H^{t+1} = (1-alpha) P H^t + alpha X, H^0 = X against
/// its closed form sum_{i<t} alpha (1-alpha)^i P^i X + (1-alpha)^t P^t X for
/// every t <= t_max. Note the convention flip relative to the PPR fixed
/// point: alpha here is the restart mass (alpha_here = 1 - alpha_ppr).
double verify_ppr_series(const TransitionMatrix& t, const MatD& x, double alpha, std::size_t t_max);

/// Recomputes every hop aggregate and compares against the stored hop token
/// rows (features and the appended weight column); returns the max deviation.
double verify_gcn_equivalence(const TokenStore& store, const TransitionMatrix& t_sym, const MatD& x);

}  // namespace vcrg
