#include "vcrg/rewire.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <deque>
#include <numeric>

#include <nlohmann/json.hpp>

namespace vcrg {

namespace {

constexpr double kFennelGamma = 1.5;
constexpr double kFennelSlack = 1.1;

std::size_t ordinary_degree(const Graph& g, NodeId u) {
    std::size_t count = 0;
    for (NodeId v : g.neighbors(u))
        if (v < g.ordinary_count()) ++count;
    return count;
}

}  // namespace

std::size_t cut_size(const Graph& g, const std::vector<std::uint32_t>& cluster) {
    std::size_t cut = 0;
    for (NodeId u = 0; u < cluster.size(); ++u)
        for (NodeId v : g.neighbors(u))
            if (u < v && v < cluster.size() && cluster[u] != cluster[v]) ++cut;
    return cut;
}

PartitionAssignment partition(const Graph& g, std::uint32_t s, std::uint64_t seed) {
    std::size_t n = g.ordinary_count();
    if (s < 1 || s > n)
        throw ValidationError("partition: cluster count " + std::to_string(s) +
                              " out of range [1, " + std::to_string(n) + "]");

    std::size_t m = 0;
    for (NodeId u = 0; u < n; ++u) m += ordinary_degree(g, u);
    m /= 2;

    const std::size_t capacity =
        static_cast<std::size_t>(std::ceil(kFennelSlack * static_cast<double>(n) / s));
    const double alpha_f =
        std::sqrt(static_cast<double>(s)) * static_cast<double>(m) / std::pow(static_cast<double>(n), 1.5);
    auto delta_cost = [&](std::size_t size) {
        return alpha_f * kFennelGamma * std::sqrt(static_cast<double>(size));
    };

    constexpr std::uint32_t kUnassigned = std::numeric_limits<std::uint32_t>::max();
    std::vector<std::uint32_t> cluster(n, kUnassigned);
    std::vector<std::size_t> sizes(s, 0);
    std::vector<double> neigh_count(s, 0.0);

    // Stream in BFS order from a seeded root so most nodes arrive with placed
    // neighbors; a shuffled stream starves the greedy placement of signal on
    // sparse graphs.
    Rng rng(splitmix64(seed ^ 0x7061727469746eULL));
    std::vector<NodeId> order;
    order.reserve(n);
    std::vector<std::uint8_t> seen(n, 0);
    std::deque<NodeId> queue;
    auto enqueue = [&](NodeId v) {
        if (!seen[v]) {
            seen[v] = 1;
            queue.push_back(v);
        }
    };
    if (n > 0) enqueue(static_cast<NodeId>(rng.below(n)));
    NodeId scan = 0;
    while (order.size() < n) {
        if (queue.empty()) {
            while (seen[scan]) ++scan;
            enqueue(scan);
        }
        NodeId v = queue.front();
        queue.pop_front();
        order.push_back(v);
        for (NodeId w : g.neighbors(v))
            if (w < n) enqueue(w);
    }

    for (NodeId v : order) {
        for (NodeId w : g.neighbors(v))
            if (w < n && cluster[w] != kUnassigned) neigh_count[cluster[w]] += 1.0;
        double best = -std::numeric_limits<double>::infinity();
        std::uint32_t best_c = 0;
        for (std::uint32_t c = 0; c < s; ++c) {
            if (sizes[c] >= capacity) continue;
            double score = neigh_count[c] - delta_cost(sizes[c]);
            if (score > best) {
                best = score;
                best_c = c;
            }
        }
        cluster[v] = best_c;
        ++sizes[best_c];
        for (NodeId w : g.neighbors(v))
            if (w < n && cluster[w] != kUnassigned) neigh_count[cluster[w]] = 0.0;
        neigh_count[best_c] = 0.0;
    }

    // Deterministic repair: feed each empty cluster the loosest-attached node
    // of the currently largest cluster.
    auto intra_degree = [&](NodeId v) {
        std::size_t count = 0;
        for (NodeId w : g.neighbors(v))
            if (w < n && cluster[w] == cluster[v]) ++count;
        return count;
    };
    for (std::uint32_t empty = 0; empty < s; ++empty) {
        if (sizes[empty] > 0) continue;
        std::uint32_t donor = 0;
        for (std::uint32_t c = 1; c < s; ++c)
            if (sizes[c] > sizes[donor]) donor = c;
        NodeId pick = 0;
        std::size_t pick_intra = std::numeric_limits<std::size_t>::max();
        for (NodeId v = 0; v < n; ++v) {
            if (cluster[v] != donor) continue;
            std::size_t d = intra_degree(v);
            if (d < pick_intra) {
                pick_intra = d;
                pick = v;
            }
        }
        cluster[pick] = empty;
        --sizes[donor];
        ++sizes[empty];
    }

    // Greedy refinement: sweep nodes, moving each to the neighboring cluster
    // with the largest positive cut reduction, capacity permitting. Every
    // accepted move cuts at least one edge fewer, so iterating sweeps to a
    // fixed point terminates; the pass cap is a wall-clock guard.
    for (int pass = 0; pass < 50; ++pass) {
        bool moved = false;
        for (NodeId v = 0; v < n; ++v) {
            std::uint32_t c = cluster[v];
            if (sizes[c] <= 1) continue;
            for (NodeId w : g.neighbors(v))
                if (w < n) neigh_count[cluster[w]] += 1.0;
            double here = neigh_count[c];
            double best_gain = 0.0;
            std::uint32_t best_c = c;
            for (NodeId w : g.neighbors(v)) {
                if (w >= n) continue;
                std::uint32_t k = cluster[w];
                if (k == c || sizes[k] >= capacity) continue;
                double gain = neigh_count[k] - here;
                if (gain > best_gain || (gain == best_gain && best_c != c && k < best_c)) {
                    best_gain = gain;
                    best_c = k;
                }
            }
            for (NodeId w : g.neighbors(v))
                if (w < n) neigh_count[cluster[w]] = 0.0;
            if (best_c != c) {
                cluster[v] = best_c;
                --sizes[c];
                ++sizes[best_c];
                moved = true;
            }
        }
        if (!moved) break;
    }

    PartitionAssignment out;
    out.cluster = std::move(cluster);
    out.s = s;
    out.seed = seed;
    out.sizes = std::move(sizes);
    return out;
}

ContentAssignment kmeans_pseudo_labels(const MatD& x, std::uint32_t s, std::uint64_t seed) {
    std::size_t n = x.rows, d = x.cols;
    if (s < 1) throw ValidationError("kmeans: cluster count must be at least 1");
    if (s > n)
        throw ValidationError("kmeans: cluster count " + std::to_string(s) + " exceeds point count " +
                              std::to_string(n));

    auto dist2 = [&](const double* a, const double* b) {
        double acc = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            double diff = a[j] - b[j];
            acc += diff * diff;
        }
        return acc;
    };

    Rng rng(splitmix64(seed ^ 0x6b6d65616e73ULL));
    MatD centers(s, d);
    std::vector<double> min_d2(n, std::numeric_limits<double>::infinity());

    // k-means++ seeding.
    std::size_t first = static_cast<std::size_t>(rng.below(n));
    std::copy_n(x.row(first), d, centers.row(0));
    for (std::uint32_t c = 1; c < s; ++c) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double d2 = dist2(x.row(i), centers.row(c - 1));
            min_d2[i] = std::min(min_d2[i], d2);
            total += min_d2[i];
        }
        std::size_t pick = 0;
        if (total > 0.0) {
            double target = rng.unit() * total, acc = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                acc += min_d2[i];
                if (acc >= target) {
                    pick = i;
                    break;
                }
            }
        } else {
            pick = static_cast<std::size_t>(rng.below(n));
        }
        std::copy_n(x.row(pick), d, centers.row(c));
    }

    std::vector<std::int32_t> assign(n, 0);
    std::vector<std::size_t> counts(s, 0);
    double prev_inertia = std::numeric_limits<double>::infinity();

    for (int iter = 0; iter < 100; ++iter) {
        std::fill(counts.begin(), counts.end(), 0);
        double inertia = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::infinity();
            std::uint32_t best_c = 0;
            for (std::uint32_t c = 0; c < s; ++c) {
                double d2 = dist2(x.row(i), centers.row(c));
                if (d2 < best) {
                    best = d2;
                    best_c = c;
                }
            }
            assign[i] = static_cast<std::int32_t>(best_c);
            ++counts[best_c];
            inertia += best;
        }
        double denom = std::max(prev_inertia, 1e-12);
        if (std::isfinite(prev_inertia) && std::abs(prev_inertia - inertia) / denom <= 1e-4) break;
        prev_inertia = inertia;

        // Empty clusters: reseed the center onto the point farthest from its
        // own center (lowest id on ties), one distinct point per empty cluster.
        std::vector<std::uint8_t> used(n, 0);
        for (std::uint32_t c = 0; c < s; ++c) {
            if (counts[c] > 0) continue;
            double far = -1.0;
            std::size_t pick = 0;
            for (std::size_t i = 0; i < n; ++i) {
                if (used[i]) continue;
                double d2 = dist2(x.row(i), centers.row(static_cast<std::size_t>(assign[i])));
                if (d2 > far) {
                    far = d2;
                    pick = i;
                }
            }
            used[pick] = 1;
            std::copy_n(x.row(pick), d, centers.row(c));
        }

        for (std::uint32_t c = 0; c < s; ++c)
            if (counts[c] > 0) std::fill_n(centers.row(c), d, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            double* ctr = centers.row(static_cast<std::size_t>(assign[i]));
            const double* xi = x.row(i);
            for (std::size_t j = 0; j < d; ++j) ctr[j] += xi[j];
        }
        for (std::uint32_t c = 0; c < s; ++c) {
            if (counts[c] == 0) continue;
            double inv = 1.0 / static_cast<double>(counts[c]);
            for (std::size_t j = 0; j < d; ++j) centers(c, j) *= inv;
        }
    }

    ContentAssignment out;
    out.group = std::move(assign);
    out.s = s;
    out.source = ContentAssignment::Source::kmeans;
    out.seed = seed;
    return out;
}

ContentAssignment content_from_train_labels(const LabelVector& labels, const Splits& splits) {
    ContentAssignment out;
    out.group.assign(labels.y.size(), -1);
    out.s = static_cast<std::uint32_t>(labels.num_classes);
    out.source = ContentAssignment::Source::train_labels;
    for (NodeId u : splits.train) {
        if (u >= labels.y.size()) throw ValidationError("content assignment: train id out of range");
        std::int32_t y = labels.y[u];
        if (y >= 0) out.group[u] = y;
    }
    return out;
}

RewireResult add_super_nodes(const Graph& g, const std::vector<std::vector<NodeId>>& members) {
    std::size_t n0 = g.num_nodes();
    std::size_t s = members.size();
    std::vector<std::vector<NodeId>> groups(s);
    for (std::size_t gi = 0; gi < s; ++gi) {
        groups[gi] = members[gi];
        std::sort(groups[gi].begin(), groups[gi].end());
        groups[gi].erase(std::unique(groups[gi].begin(), groups[gi].end()), groups[gi].end());
        for (NodeId u : groups[gi])
            if (u >= g.ordinary_count())
                throw ValidationError("add_super_nodes: member " + std::to_string(u) +
                                      " is not an ordinary node");
    }

    std::vector<std::size_t> extra(n0, 0);
    for (const auto& grp : groups)
        for (NodeId u : grp) ++extra[u];

    std::vector<std::size_t> offsets(n0 + s + 1, 0);
    for (std::size_t u = 0; u < n0; ++u) offsets[u + 1] = offsets[u] + g.degree(u) + extra[u];
    for (std::size_t gi = 0; gi < s; ++gi)
        offsets[n0 + gi + 1] = offsets[n0 + gi] + groups[gi].size();

    std::vector<NodeId> adj(offsets.back());
    std::vector<std::size_t> cursor(offsets.begin(), offsets.end() - 1);
    for (NodeId u = 0; u < n0; ++u)
        for (NodeId v : g.neighbors(u)) adj[cursor[u]++] = v;
    // Super ids exceed every original id and ascend with the group index, so
    // appended neighbors keep each row sorted.
    for (std::size_t gi = 0; gi < s; ++gi) {
        NodeId super_id = static_cast<NodeId>(n0 + gi);
        for (NodeId u : groups[gi]) {
            adj[cursor[u]++] = super_id;
            adj[cursor[super_id]++] = u;
        }
    }

    RewireResult out;
    out.graph = Graph::from_parts(std::move(offsets), std::move(adj), g.ordinary_count());
    for (std::size_t gi = 0; gi < s; ++gi)
        if (groups[gi].empty()) out.empty_groups.push_back(static_cast<std::uint32_t>(gi));
    return out;
}

RewireResult add_super_nodes(const Graph& g, const PartitionAssignment& a) {
    if (a.cluster.size() > g.ordinary_count())
        throw ValidationError("add_super_nodes: assignment larger than ordinary node count");
    std::vector<std::vector<NodeId>> members(a.s);
    for (NodeId u = 0; u < a.cluster.size(); ++u) members[a.cluster[u]].push_back(u);
    return add_super_nodes(g, members);
}

RewireResult add_super_nodes(const Graph& g, const ContentAssignment& a) {
    if (a.group.size() > g.ordinary_count())
        throw ValidationError("add_super_nodes: assignment larger than ordinary node count");
    std::vector<std::vector<NodeId>> members(a.s);
    for (NodeId u = 0; u < a.group.size(); ++u) {
        std::int32_t grp = a.group[u];
        if (grp < 0) continue;
        if (static_cast<std::uint32_t>(grp) >= a.s)
            throw ValidationError("add_super_nodes: group id out of range");
        members[static_cast<std::size_t>(grp)].push_back(u);
    }
    return add_super_nodes(g, members);
}

namespace {

const char* source_name(ContentAssignment::Source s) {
    return s == ContentAssignment::Source::train_labels ? "train_labels" : "kmeans";
}

}  // namespace

std::string serialize_partition(const PartitionAssignment& a) {
    nlohmann::json header;
    header["mode"] = "partition";
    header["s"] = a.s;
    header["seed"] = a.seed;
    std::string out = header.dump() + "\n";
    for (std::uint32_t c : a.cluster) out += std::to_string(c) + "\n";
    return out;
}

std::string serialize_content(const ContentAssignment& a) {
    nlohmann::json header;
    header["mode"] = source_name(a.source);
    header["s"] = a.s;
    header["seed"] = a.seed;
    std::string out = header.dump() + "\n";
    for (std::int32_t grp : a.group) out += std::to_string(grp) + "\n";
    return out;
}

namespace {

nlohmann::json parse_assignment_header(const std::string& text, std::size_t& body_start) {
    std::size_t nl = text.find('\n');
    if (nl == std::string::npos) throw ValidationError("assignment: missing header line");
    body_start = nl + 1;
    try {
        return nlohmann::json::parse(text.substr(0, nl));
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError(std::string("assignment header: ") + e.what());
    }
}

std::vector<std::int64_t> parse_assignment_body(const std::string& text, std::size_t start) {
    std::vector<std::int64_t> vals;
    std::size_t pos = start;
    std::size_t lineno = 1;
    while (pos < text.size()) {
        std::size_t nl = text.find('\n', pos);
        if (nl == std::string::npos) nl = text.size();
        ++lineno;
        std::string line = text.substr(pos, nl - pos);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) {
            try {
                vals.push_back(std::stoll(line));
            } catch (const std::exception&) {
                throw ValidationError("assignment line " + std::to_string(lineno) + ": bad integer \"" +
                                      line + "\"");
            }
        }
        pos = nl + 1;
    }
    return vals;
}

}  // namespace

PartitionAssignment parse_partition(const std::string& text) {
    std::size_t body = 0;
    auto header = parse_assignment_header(text, body);
    if (header.value("mode", "") != "partition")
        throw ValidationError("assignment: expected mode \"partition\"");
    PartitionAssignment a;
    a.s = header.at("s").get<std::uint32_t>();
    a.seed = header.at("seed").get<std::uint64_t>();
    a.sizes.assign(a.s, 0);
    for (std::int64_t v : parse_assignment_body(text, body)) {
        if (v < 0 || v >= static_cast<std::int64_t>(a.s))
            throw ValidationError("assignment: cluster id out of range");
        a.cluster.push_back(static_cast<std::uint32_t>(v));
        ++a.sizes[static_cast<std::size_t>(v)];
    }
    return a;
}

ContentAssignment parse_content(const std::string& text) {
    std::size_t body = 0;
    auto header = parse_assignment_header(text, body);
    std::string mode = header.value("mode", "");
    ContentAssignment a;
    if (mode == "train_labels") {
        a.source = ContentAssignment::Source::train_labels;
    } else if (mode == "kmeans") {
        a.source = ContentAssignment::Source::kmeans;
    } else {
        throw ValidationError("assignment: unknown content mode \"" + mode + "\"");
    }
    a.s = header.at("s").get<std::uint32_t>();
    a.seed = header.at("seed").get<std::uint64_t>();
    for (std::int64_t v : parse_assignment_body(text, body)) {
        if (v < -1 || v >= static_cast<std::int64_t>(a.s))
            throw ValidationError("assignment: group id out of range");
        a.group.push_back(static_cast<std::int32_t>(v));
    }
    return a;
}

}  // namespace vcrg
