#include "vcrg/tokens.hpp"

#include <algorithm>
#include <fstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "binio.hpp"

namespace vcrg {

namespace {

constexpr char kMagic[4] = {'V', 'C', 'R', 'T'};

}  // namespace

std::vector<double> hop_weights(std::size_t l_hops) {
    std::vector<double> w(l_hops);
    double denom = static_cast<double>(l_hops * (l_hops + 1)) / 2.0;
    for (std::size_t l = 1; l <= l_hops; ++l)
        w[l - 1] = static_cast<double>(l_hops - l + 1) / denom;
    return w;
}

std::vector<MatD> hop_aggregates(const TransitionMatrix& t, const MatD& x, std::size_t l_hops) {
    if (x.rows != t.dim()) throw ValidationError("hop_aggregates: feature row count mismatch");
    std::vector<MatD> hops;
    hops.reserve(l_hops);
    const MatD* prev = &x;
    for (std::size_t l = 0; l < l_hops; ++l) {
        hops.push_back(t.multiply(*prev));
        prev = &hops.back();
    }
    return hops;
}

TokenList build_token_list(NodeId u, const MatD& x, const std::vector<MatD>& hops,
                           const RankedNeighbors& structure, const RankedNeighbors& content,
                           std::size_t l_hops, std::size_t k_bar, std::size_t k_hat) {
    if (hops.size() < l_hops) throw ValidationError("build_token_list: missing hop aggregates");
    std::size_t d = x.cols;
    std::size_t rows = 1 + l_hops + k_bar + k_hat;

    TokenList out;
    out.node = u;
    out.t = MatF(rows, d + 1);
    out.mask.assign(rows, 0);

    auto fill = [&](std::size_t row, const double* feat, double scalar) {
        float* dst = out.t.row(row);
        for (std::size_t j = 0; j < d; ++j) dst[j] = static_cast<float>(feat[j]);
        dst[d] = static_cast<float>(scalar);
        out.mask[row] = 1;
    };

    fill(0, x.row(u), 1.0);
    std::vector<double> w = hop_weights(l_hops);
    for (std::size_t l = 0; l < l_hops; ++l) fill(1 + l, hops[l].row(u), w[l]);

    for (std::size_t i = 0; i < std::min(k_bar, structure.items.size()); ++i)
        fill(1 + l_hops + i, x.row(structure.items[i].node), structure.items[i].mass);
    for (std::size_t i = 0; i < std::min(k_hat, content.items.size()); ++i)
        fill(1 + l_hops + k_bar + i, x.row(content.items[i].node), content.items[i].mass);
    return out;
}

ContentMode content_mode_from_string(const std::string& s) {
    if (s == "none") return ContentMode::none;
    if (s == "train_labels") return ContentMode::train_labels;
    if (s == "kmeans") return ContentMode::kmeans;
    throw ValidationError("unknown content mode: " + s);
}

std::string to_string(ContentMode mode) {
    switch (mode) {
        case ContentMode::none: return "none";
        case ContentMode::train_labels: return "train_labels";
        case ContentMode::kmeans: return "kmeans";
    }
    return "?";
}

TokenStore tokenize_graph(const Graph& g, const MatD& x, const LabelVector& labels,
                          const Splits* splits, const TokenizeOptions& opt,
                          TokenizeTrace* trace) {
    std::size_t n = g.ordinary_count();
    if (g.num_nodes() != n)
        throw ValidationError("tokenize_graph: input graph already contains super nodes");
    if (x.rows != n)
        throw ValidationError("tokenize_graph: features have " + std::to_string(x.rows) +
                              " rows for " + std::to_string(n) + " nodes");

    Rng seeds(opt.seed);

    PartitionAssignment part = partition(g, opt.s_bar, seeds.fork(1));
    RewireResult structure_rw = add_super_nodes(g, part);

    std::optional<ContentAssignment> content;
    RewireResult content_rw;
    if (opt.content_mode == ContentMode::train_labels) {
        if (!splits) throw ValidationError("tokenize_graph: train_labels content mode needs splits");
        if (labels.y.size() != n) throw ValidationError("tokenize_graph: label count mismatch");
        content = content_from_train_labels(labels, *splits);
        if (opt.s_hat != 0 && opt.s_hat != content->s)
            throw ValidationError("tokenize_graph: s_hat " + std::to_string(opt.s_hat) +
                                  " conflicts with label count " + std::to_string(content->s));
    } else if (opt.content_mode == ContentMode::kmeans) {
        if (opt.s_hat == 0)
            throw ValidationError("tokenize_graph: kmeans content mode needs s_hat > 0");
        content = kmeans_pseudo_labels(x, opt.s_hat, seeds.fork(2));
    }
    if (content) content_rw = add_super_nodes(g, *content);

    TransitionMatrix hop_t = normalize(g, opt.hop_norm);
    std::vector<MatD> hops = hop_aggregates(hop_t, x, opt.l_hops);

    TokenStore store;
    store.header.n = n;
    store.header.d = static_cast<std::uint32_t>(x.cols);
    store.header.l_hops = static_cast<std::uint32_t>(opt.l_hops);
    store.header.k_bar = static_cast<std::uint32_t>(opt.k_bar);
    store.header.k_hat = static_cast<std::uint32_t>(opt.k_hat);
    store.header.alpha = opt.alpha;
    store.header.eps = opt.eps;
    store.header.seed = opt.seed;
    store.lists.resize(n);

    if (trace) {
        trace->partition = part;
        trace->content = content;
        trace->empty_structure_groups = structure_rw.empty_groups;
        trace->empty_content_groups = content_rw.empty_groups;
        trace->structure_ranked.resize(n);
        trace->content_ranked.resize(content ? n : 0);
    }

    const Graph& g_structure = structure_rw.graph;
    const Graph* g_content = content ? &content_rw.graph : nullptr;
    RankedNeighbors no_content;

    auto process_range = [&](std::size_t lo, std::size_t hi) {
        for (std::size_t u = lo; u < hi; ++u) {
            NodeId uid = static_cast<NodeId>(u);
            TopkOptions topt;
            topt.ordinary_count = n;

            RankedNeighbors structure_ranked;
            if (opt.k_bar > 0) {
                PprVector r = ppr_push(g_structure, uid, opt.alpha, opt.eps);
                structure_ranked = topk(r, opt.k_bar, topt);
            }
            RankedNeighbors content_ranked;
            if (g_content && opt.k_hat > 0) {
                PprVector r = ppr_push(*g_content, uid, opt.alpha, opt.eps);
                content_ranked = topk(r, opt.k_hat, topt);
            }
            store.lists[u] = build_token_list(uid, x, hops, structure_ranked, content_ranked,
                                              opt.l_hops, opt.k_bar, opt.k_hat);
            if (trace) {
                trace->structure_ranked[u] = std::move(structure_ranked);
                if (content) trace->content_ranked[u] = std::move(content_ranked);
            }
        }
    };

    unsigned jobs = std::max(1u, opt.jobs);
    if (jobs == 1 || n < 2 * jobs) {
        process_range(0, n);
    } else {
        std::vector<std::thread> workers;
        std::size_t chunk = (n + jobs - 1) / jobs;
        for (unsigned w = 0; w < jobs; ++w) {
            std::size_t lo = w * chunk, hi = std::min(n, lo + chunk);
            if (lo >= hi) break;
            workers.emplace_back(process_range, lo, hi);
        }
        for (auto& t : workers) t.join();
    }
    return store;
}

void TokenStore::save(const std::filesystem::path& path) const {
    std::string buf;
    buf.append(kMagic, 4);
    binio::put_u32(buf, header.version);
    binio::put_u64(buf, header.n);
    binio::put_u32(buf, header.d);
    binio::put_u32(buf, header.l_hops);
    binio::put_u32(buf, header.k_bar);
    binio::put_u32(buf, header.k_hat);
    binio::put_f64(buf, header.alpha);
    binio::put_f64(buf, header.eps);
    binio::put_u64(buf, header.seed);
    for (const TokenList& list : lists) {
        binio::put_u64(buf, list.node);
        binio::put_u32(buf, static_cast<std::uint32_t>(list.t.rows));
        for (float v : list.t.v) binio::put_f32(buf, v);
        for (std::uint8_t b : list.mask) buf.push_back(static_cast<char>(b));
    }
    binio::put_u32(buf, crc32_of(buf.data(), buf.size()));

    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("token store: cannot write " + path.string());
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw ValidationError("token store: write failed for " + path.string());

    nlohmann::json side;
    side["version"] = header.version;
    side["n"] = header.n;
    side["d"] = header.d;
    side["l_hops"] = header.l_hops;
    side["k_bar"] = header.k_bar;
    side["k_hat"] = header.k_hat;
    side["alpha"] = header.alpha;
    side["eps"] = header.eps;
    side["seed"] = header.seed;
    write_text_file(path.string() + ".json", side.dump(2) + "\n");
}

TokenStore TokenStore::load(const std::filesystem::path& path) {
    std::string buf = read_text_file(path);
    if (buf.size() < 8) throw ValidationError("token store: truncated file " + path.string());
    std::uint32_t stored_crc = 0;
    {
        binio::Reader tail(buf, "token store");
        tail.bytes(buf.size() - 4);
        stored_crc = tail.u32();
    }
    std::uint32_t actual_crc = crc32_of(buf.data(), buf.size() - 4);
    if (stored_crc != actual_crc)
        throw ValidationError("token store: checksum mismatch in " + path.string());

    binio::Reader rd(buf, "token store");
    if (std::memcmp(rd.bytes(4), kMagic, 4) != 0)
        throw ValidationError("token store: bad magic in " + path.string());
    TokenStore store;
    store.header.version = rd.u32();
    if (store.header.version != 1)
        throw ValidationError("token store: unsupported version " +
                              std::to_string(store.header.version));
    store.header.n = rd.u64();
    store.header.d = rd.u32();
    store.header.l_hops = rd.u32();
    store.header.k_bar = rd.u32();
    store.header.k_hat = rd.u32();
    store.header.alpha = rd.f64();
    store.header.eps = rd.f64();
    store.header.seed = rd.u64();

    std::size_t cols = store.header.d + 1;
    store.lists.resize(store.header.n);
    for (std::uint64_t i = 0; i < store.header.n; ++i) {
        TokenList& list = store.lists[i];
        std::uint64_t id = rd.u64();
        if (id != i)
            throw ValidationError("token store: record " + std::to_string(i) +
                                  " carries node id " + std::to_string(id));
        list.node = static_cast<NodeId>(id);
        std::uint32_t rows = rd.u32();
        if (rows != store.header.rows_per_node())
            throw ValidationError("token store: record " + std::to_string(i) +
                                  " has unexpected row count " + std::to_string(rows));
        list.t = MatF(rows, cols);
        for (float& v : list.t.v) v = rd.f32();
        const char* mask = rd.bytes(rows);
        list.mask.assign(reinterpret_cast<const std::uint8_t*>(mask),
                         reinterpret_cast<const std::uint8_t*>(mask) + rows);
    }
    if (rd.remaining() != 4)
        throw ValidationError("token store: trailing garbage in " + path.string());
    return store;
}

}  // namespace vcrg
