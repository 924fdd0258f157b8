#include <cmath>
#include <fstream>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"
#include "vcrg/tokens.hpp"

using namespace vcrg;

namespace {

struct Fixture {
    Graph g;
    MatD x;
    LabelVector labels;
    Splits splits;
};

Fixture small_fixture(std::size_t n, std::uint64_t seed) {
    Fixture f;
    f.g = testutil::er_graph(n, 0.2, seed);
    f.x = testutil::random_features(n, 4, seed + 1);
    f.labels.y.resize(n);
    f.labels.num_classes = 3;
    Rng rng(seed + 2);
    for (auto& y : f.labels.y) y = static_cast<std::int32_t>(rng.below(3));
    std::vector<NodeId> ids(n);
    std::iota(ids.begin(), ids.end(), 0);
    rng.shuffle(ids);
    std::size_t cut1 = n * 6 / 10, cut2 = n * 8 / 10;
    f.splits.train.assign(ids.begin(), ids.begin() + cut1);
    f.splits.val.assign(ids.begin() + cut1, ids.begin() + cut2);
    f.splits.test.assign(ids.begin() + cut2, ids.end());
    return f;
}

TokenizeOptions small_options() {
    TokenizeOptions opt;
    opt.l_hops = 2;
    opt.k_bar = 4;
    opt.k_hat = 3;
    opt.s_bar = 4;
    opt.content_mode = ContentMode::train_labels;
    opt.alpha = 0.85;
    opt.eps = 1e-5;
    opt.seed = 11;
    return opt;
}

std::string file_bytes(const std::filesystem::path& p) { return testutil::slurp(p); }

}  // namespace

TEST_SUITE_BEGIN("tokens");

TEST_CASE("hop weights decay linearly and sum to one") {
    auto w = hop_weights(3);
    REQUIRE(w.size() == 3);
    CHECK(w[0] == doctest::Approx(3.0 / 6.0).epsilon(1e-15));
    CHECK(w[1] == doctest::Approx(2.0 / 6.0).epsilon(1e-15));
    CHECK(w[2] == doctest::Approx(1.0 / 6.0).epsilon(1e-15));
    CHECK(std::abs(w[0] + w[1] + w[2] - 1.0) <= 1e-12);
    CHECK(hop_weights(0).empty());
}

TEST_CASE("token list shape on the triangle") {
    Graph g = testutil::complete_graph(3);
    MatD x = testutil::random_features(3, 2, 1);
    LabelVector labels;
    labels.y = {0, 1, 0};
    labels.num_classes = 2;
    TokenizeOptions opt;
    opt.l_hops = 1;
    opt.k_bar = 1;
    opt.k_hat = 0;
    opt.s_bar = 1;
    opt.content_mode = ContentMode::none;
    opt.seed = 3;
    TokenStore store = tokenize_graph(g, x, labels, nullptr, opt);
    CHECK(store.header.rows_per_node() == 3);
    CHECK(store.lists.size() == 3);
    for (const auto& list : store.lists) {
        CHECK(list.t.rows == 3);
        CHECK(list.t.cols == 3);  // d + 1
        CHECK(list.mask.size() == 3);
    }
}

TEST_CASE("row zero is the node's own features with a one appended") {
    Fixture f = small_fixture(12, 40);
    TokenStore store = tokenize_graph(f.g, f.x, f.labels, &f.splits, small_options());
    for (NodeId u = 0; u < 12; ++u) {
        const TokenList& list = store.lists[u];
        CHECK(list.node == u);
        CHECK(list.mask[0] == 1);
        for (std::size_t j = 0; j < f.x.cols; ++j)
            CHECK(list.t(0, j) == static_cast<float>(f.x(u, j)));
        CHECK(list.t(0, f.x.cols) == 1.0f);
    }
}

TEST_CASE("hop rows equal the walk aggregates cast to f32") {
    Fixture f = small_fixture(15, 60);
    TokenizeOptions opt = small_options();
    TokenStore store = tokenize_graph(f.g, f.x, f.labels, &f.splits, opt);
    TransitionMatrix p = normalize(f.g, opt.hop_norm);
    std::vector<MatD> hops = hop_aggregates(p, f.x, opt.l_hops);
    std::vector<double> w = hop_weights(opt.l_hops);
    for (NodeId u = 0; u < 15; ++u) {
        for (std::size_t l = 0; l < opt.l_hops; ++l) {
            const TokenList& list = store.lists[u];
            CHECK(list.mask[1 + l] == 1);
            for (std::size_t j = 0; j < f.x.cols; ++j)
                CHECK(list.t(1 + l, j) == static_cast<float>(hops[l](u, j)));
            CHECK(list.t(1 + l, f.x.cols) == static_cast<float>(w[l]));
        }
    }
}

TEST_CASE("neighbor rows carry bit-exact push scores") {
    Fixture f = small_fixture(18, 70);
    TokenizeOptions opt = small_options();
    TokenizeTrace trace;
    TokenStore store = tokenize_graph(f.g, f.x, f.labels, &f.splits, opt, &trace);
    REQUIRE(trace.structure_ranked.size() == 18);
    for (NodeId u = 0; u < 18; ++u) {
        const TokenList& list = store.lists[u];
        const RankedNeighbors& ranked = trace.structure_ranked[u];
        std::size_t base = 1 + opt.l_hops;
        for (std::size_t i = 0; i < opt.k_bar; ++i) {
            if (i < ranked.items.size()) {
                NodeId v = ranked.items[i].node;
                CHECK(v < f.g.ordinary_count());  // no super node leaks into tokens
                CHECK(list.mask[base + i] == 1);
                for (std::size_t j = 0; j < f.x.cols; ++j)
                    CHECK(list.t(base + i, j) == static_cast<float>(f.x(v, j)));
                CHECK(list.t(base + i, f.x.cols) == static_cast<float>(ranked.items[i].mass));
            } else {
                CHECK(list.mask[base + i] == 0);
                for (std::size_t j = 0; j <= f.x.cols; ++j) CHECK(list.t(base + i, j) == 0.0f);
            }
        }
    }
}

TEST_CASE("build_token_list zero-pads missing neighbors") {
    MatD x = testutil::random_features(5, 2, 9);
    RankedNeighbors structure;
    structure.items = {{2, 0.5}};
    structure.k_effective = 1;
    RankedNeighbors content;
    TokenList list = build_token_list(0, x, {}, structure, content, 0, 3, 2);
    REQUIRE(list.t.rows == 6);
    CHECK(list.mask == std::vector<std::uint8_t>{1, 1, 0, 0, 0, 0});
    CHECK(list.t(1, 2) == 0.5f);
    for (std::size_t r = 2; r < 6; ++r)
        for (std::size_t c = 0; c < 3; ++c) CHECK(list.t(r, c) == 0.0f);
}

TEST_CASE("tokenize validates its inputs") {
    Fixture f = small_fixture(10, 80);
    TokenizeOptions opt = small_options();

    MatD bad = testutil::random_features(9, 4, 1);
    CHECK_THROWS_AS(tokenize_graph(f.g, bad, f.labels, &f.splits, opt), ValidationError);

    CHECK_THROWS_AS(tokenize_graph(f.g, f.x, f.labels, nullptr, opt), ValidationError);

    TokenizeOptions km = opt;
    km.content_mode = ContentMode::kmeans;
    km.s_hat = 0;
    CHECK_THROWS_AS(tokenize_graph(f.g, f.x, f.labels, &f.splits, km), ValidationError);

    PartitionAssignment part = partition(f.g, 2, 0);
    RewireResult r = add_super_nodes(f.g, part);
    CHECK_THROWS_AS(tokenize_graph(r.graph, f.x, f.labels, &f.splits, opt), ValidationError);
}

TEST_CASE("store save/load round-trips byte-identically") {
    Fixture f = small_fixture(14, 90);
    TokenStore store = tokenize_graph(f.g, f.x, f.labels, &f.splits, small_options());
    testutil::TempDir tmp("vcrg-tokens");
    auto p1 = tmp.file("a.vcrt");
    auto p2 = tmp.file("b.vcrt");
    store.save(p1);
    TokenStore loaded = TokenStore::load(p1);
    loaded.save(p2);
    CHECK(file_bytes(p1) == file_bytes(p2));
    CHECK(std::filesystem::exists(tmp.file("a.vcrt.json")));

    CHECK(loaded.header.n == store.header.n);
    REQUIRE(loaded.lists.size() == store.lists.size());
    for (std::size_t i = 0; i < store.lists.size(); ++i) {
        CHECK(loaded.lists[i].mask == store.lists[i].mask);
        CHECK(loaded.lists[i].t.v == store.lists[i].t.v);
    }
}

TEST_CASE("tokenize is deterministic per seed") {
    Fixture f = small_fixture(16, 100);
    testutil::TempDir tmp("vcrg-tokens");
    auto p1 = tmp.file("a.vcrt");
    auto p2 = tmp.file("b.vcrt");
    tokenize_graph(f.g, f.x, f.labels, &f.splits, small_options()).save(p1);
    tokenize_graph(f.g, f.x, f.labels, &f.splits, small_options()).save(p2);
    CHECK(file_bytes(p1) == file_bytes(p2));
}

TEST_CASE("worker count does not change the store") {
    Fixture f = small_fixture(16, 110);
    TokenizeOptions opt = small_options();
    TokenStore a = tokenize_graph(f.g, f.x, f.labels, &f.splits, opt);
    opt.jobs = 3;
    TokenStore b = tokenize_graph(f.g, f.x, f.labels, &f.splits, opt);
    REQUIRE(a.lists.size() == b.lists.size());
    for (std::size_t i = 0; i < a.lists.size(); ++i) {
        CHECK(a.lists[i].t.v == b.lists[i].t.v);
        CHECK(a.lists[i].mask == b.lists[i].mask);
    }
}

TEST_CASE("corruption and truncation are detected") {
    Fixture f = small_fixture(10, 120);
    TokenStore store = tokenize_graph(f.g, f.x, f.labels, &f.splits, small_options());
    testutil::TempDir tmp("vcrg-tokens");
    auto p = tmp.file("s.vcrt");
    store.save(p);
    std::string bytes = file_bytes(p);

    SUBCASE("flipped byte fails the checksum") {
        std::string bad = bytes;
        bad[bad.size() / 2] ^= 0x40;
        std::ofstream(tmp.file("bad.vcrt"), std::ios::binary) << bad;
        CHECK_THROWS_WITH_AS(TokenStore::load(tmp.file("bad.vcrt")),
                             doctest::Contains("checksum"), ValidationError);
    }

    SUBCASE("truncated file is rejected") {
        std::ofstream(tmp.file("cut.vcrt"), std::ios::binary)
            << bytes.substr(0, bytes.size() / 2);
        CHECK_THROWS_AS(TokenStore::load(tmp.file("cut.vcrt")), ValidationError);
    }

    SUBCASE("bad magic is rejected") {
        std::string bad = bytes;
        bad[0] = 'X';
        std::ofstream(tmp.file("magic.vcrt"), std::ios::binary) << bad;
        CHECK_THROWS_AS(TokenStore::load(tmp.file("magic.vcrt")), ValidationError);
    }
}

TEST_CASE("kmeans content mode runs without labels") {
    Fixture f = small_fixture(12, 130);
    TokenizeOptions opt = small_options();
    opt.content_mode = ContentMode::kmeans;
    opt.s_hat = 3;
    LabelVector empty_labels;
    empty_labels.y.assign(12, -1);
    empty_labels.num_classes = 1;
    TokenizeTrace trace;
    TokenStore store = tokenize_graph(f.g, f.x, empty_labels, nullptr, opt, &trace);
    CHECK(store.lists.size() == 12);
    REQUIRE(trace.content.has_value());
    CHECK(trace.content->source == ContentAssignment::Source::kmeans);
    // kmeans assigns every node, so every node can have content neighbors.
    for (auto grp : trace.content->group) CHECK(grp >= 0);
}

TEST_CASE("content mode names round-trip") {
    for (ContentMode m : {ContentMode::none, ContentMode::train_labels, ContentMode::kmeans})
        CHECK(content_mode_from_string(to_string(m)) == m);
    CHECK_THROWS_AS(content_mode_from_string("what"), ValidationError);
}

TEST_SUITE_END();
