#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"
#include "vcrg/synth.hpp"

using namespace vcrg;

namespace {

SbmSpec base_spec() {
    SbmSpec spec;
    spec.n = 400;
    spec.b = 4;
    spec.p_in = 0.05;
    spec.p_out = 0.01;
    spec.d = 8;
    spec.sigma_sep = 1.5;
    spec.seed = 1;
    return spec;
}

double expected_homophily(const SbmSpec& s) {
    double nb = static_cast<double>(s.n) / s.b;
    double in = s.p_in * (nb - 1.0);
    double out = s.p_out * static_cast<double>(s.n) * (s.b - 1.0) / s.b;
    return in / (in + out);
}

}  // namespace

TEST_SUITE_BEGIN("synth");

TEST_CASE("no cross-block edges means perfect homophily") {
    SbmSpec spec = base_spec();
    spec.b = 2;
    spec.p_out = 0.0;
    SbmData data = generate_sbm(spec);
    CHECK(data.homophily == 1.0);
}

TEST_CASE("measured homophily tracks the closed form") {
    SbmSpec spec = base_spec();
    spec.n = 1000;
    spec.p_in = 0.03;
    spec.p_out = 0.005;
    SbmData data = generate_sbm(spec);
    CHECK(std::abs(data.homophily - expected_homophily(spec)) <= 0.05);
    CHECK(data.homophily == edge_homophily(data.graph, data.labels));
}

TEST_CASE("homophily grows with the in-block probability") {
    double prev = -1.0;
    for (double p_in : {0.01, 0.03, 0.06}) {
        SbmSpec spec = base_spec();
        spec.n = 800;
        spec.p_in = p_in;
        spec.p_out = 0.01;
        SbmData data = generate_sbm(spec);
        CHECK(data.homophily > prev);
        prev = data.homophily;
    }
}

TEST_CASE("same seed reproduces every artifact byte for byte") {
    SbmSpec spec = base_spec();
    SbmData a = generate_sbm(spec);
    SbmData b = generate_sbm(spec);
    CHECK(a.graph.edge_list() == b.graph.edge_list());
    CHECK(a.features.v == b.features.v);
    CHECK(a.labels.y == b.labels.y);
    CHECK(a.splits.train == b.splits.train);
    CHECK(a.splits.val == b.splits.val);
    CHECK(a.splits.test == b.splits.test);

    SbmSpec other = spec;
    other.seed = 2;
    SbmData c = generate_sbm(other);
    CHECK(a.graph.edge_list() != c.graph.edge_list());
}

TEST_CASE("labels are contiguous near-equal blocks") {
    SbmSpec spec = base_spec();
    spec.n = 402;  // not divisible by b
    SbmData data = generate_sbm(spec);
    REQUIRE(data.labels.y.size() == 402);
    CHECK(std::is_sorted(data.labels.y.begin(), data.labels.y.end()));
    std::vector<std::size_t> counts(spec.b, 0);
    for (auto y : data.labels.y) ++counts[static_cast<std::size_t>(y)];
    auto [lo, hi] = std::minmax_element(counts.begin(), counts.end());
    CHECK(*hi - *lo <= 1);
    CHECK(data.labels.num_classes == 4);
}

TEST_CASE("splits are a disjoint 60/20/20 cover") {
    SbmSpec spec = base_spec();
    spec.n = 500;
    SbmData data = generate_sbm(spec);
    CHECK(data.splits.train.size() == 300);
    CHECK(data.splits.val.size() == 100);
    CHECK(data.splits.test.size() == 100);
    std::set<NodeId> seen;
    for (const auto* part : {&data.splits.train, &data.splits.val, &data.splits.test})
        for (NodeId u : *part) CHECK(seen.insert(u).second);
    CHECK(seen.size() == 500);
}

TEST_CASE("class means separate by sigma_sep") {
    SbmSpec spec = base_spec();
    spec.n = 2000;
    spec.b = 2;
    spec.d = 6;
    spec.sigma_sep = 4.0;
    SbmData data = generate_sbm(spec);
    std::vector<std::vector<double>> mean(2, std::vector<double>(6, 0.0));
    std::vector<std::size_t> count(2, 0);
    for (std::size_t u = 0; u < 2000; ++u) {
        auto y = static_cast<std::size_t>(data.labels.y[u]);
        ++count[y];
        for (std::size_t j = 0; j < 6; ++j) mean[y][j] += data.features(u, j);
    }
    double dist2 = 0.0;
    for (std::size_t j = 0; j < 6; ++j) {
        double diff = mean[0][j] / count[0] - mean[1][j] / count[1];
        dist2 += diff * diff;
    }
    // Sample means of ~1000 points sit within a few percent of the spec.
    CHECK(std::sqrt(dist2) == doctest::Approx(4.0).epsilon(0.1));
}

TEST_CASE("spec validation rejects bad shapes") {
    SbmSpec s = base_spec();
    s.n = 1;
    CHECK_THROWS_AS(s.validate(), ValidationError);
    s = base_spec();
    s.p_in = 1.5;
    CHECK_THROWS_AS(s.validate(), ValidationError);
    s = base_spec();
    s.d = 2;  // below the block count
    CHECK_THROWS_AS(s.validate(), ValidationError);
    s = base_spec();
    s.sigma_sep = -1.0;
    CHECK_THROWS_AS(s.validate(), ValidationError);
}

TEST_CASE("regime warning flags a mode/probability mismatch") {
    SbmSpec spec = base_spec();
    spec.feature_mode = FeatureMode::label_anti_aligned;
    SbmData data = generate_sbm(spec);  // p_in > p_out but anti-aligned requested
    CHECK(data.regime_warning);

    spec.p_in = 0.005;
    spec.p_out = 0.05;
    SbmData hetero = generate_sbm(spec);
    CHECK_FALSE(hetero.regime_warning);
    CHECK(hetero.homophily < 0.5);
}

TEST_CASE("edge homophily endpoints") {
    Graph g = testutil::complete_graph(4);
    LabelVector same;
    same.y = {1, 1, 1, 1};
    same.num_classes = 2;
    CHECK(edge_homophily(g, same) == 1.0);

    // Complete bipartite 2x2 with classes on the two sides.
    Graph bip = Graph::from_edges(4, testutil::EdgeList{{0, 2}, {0, 3}, {1, 2}, {1, 3}});
    LabelVector split;
    split.y = {0, 0, 1, 1};
    split.num_classes = 2;
    CHECK(edge_homophily(bip, split) == 0.0);

    // Random labels on a big graph land near a half.
    Graph big = testutil::er_graph(200, 0.1, 5);
    REQUIRE(big.num_edges() >= 1000);
    LabelVector coin;
    coin.num_classes = 2;
    Rng rng(6);
    for (std::size_t u = 0; u < 200; ++u)
        coin.y.push_back(static_cast<std::int32_t>(rng.below(2)));
    CHECK(std::abs(edge_homophily(big, coin) - 0.5) <= 0.05);

    LabelVector holey;
    holey.y = {0, -1, 1, 0};
    holey.num_classes = 2;
    CHECK_THROWS_AS(edge_homophily(bip, holey), ValidationError);
    CHECK_THROWS_AS(edge_homophily(Graph::from_edges(2, testutil::EdgeList{}), same),
                    ValidationError);
}

TEST_CASE("feature mode names round-trip") {
    for (FeatureMode m : {FeatureMode::label_aligned, FeatureMode::label_anti_aligned})
        CHECK(feature_mode_from_string(to_string(m)) == m);
    CHECK_THROWS_AS(feature_mode_from_string("scrambled"), ValidationError);
}

TEST_SUITE_END();
