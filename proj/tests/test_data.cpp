#include <string>

#include "doctest.h"
#include "helpers.hpp"
#include "vcrg/data.hpp"

using namespace vcrg;

TEST_SUITE_BEGIN("data");

TEST_CASE("node data with matching shapes loads") {
    auto [x, labels] = load_node_data("1.0,0.0\n1.0,0.0\n1.0,0.0\n", "0\n1\n-1\n", 3);
    CHECK(x.rows == 3);
    CHECK(x.cols == 2);
    CHECK(labels.num_classes == 2);
    CHECK(labels.y == std::vector<std::int32_t>{0, 1, -1});
}

TEST_CASE("feature row count must match n") {
    CHECK_THROWS_AS(load_node_data("1.0\n2.0\n", "0\n1\n0\n", 3), ValidationError);
}

TEST_CASE("label count must match n") {
    CHECK_THROWS_AS(load_node_data("1\n1\n1\n", "0\n1\n", 3), ValidationError);
}

TEST_CASE("ragged feature rows are rejected") {
    CHECK_THROWS_AS(load_features("1.0,2.0\n3.0\n"), ValidationError);
}

TEST_CASE("non-finite features are rejected") {
    CHECK_THROWS_AS(load_features("1.0,nan\n"), ValidationError);
    CHECK_THROWS_AS(load_features("inf,0.0\n"), ValidationError);
}

TEST_CASE("labels below -1 are rejected") {
    CHECK_THROWS_AS(load_labels("0\n-2\n"), ValidationError);
}

TEST_CASE("all-unlabeled input still has one class slot") {
    LabelVector l = load_labels("-1\n-1\n");
    CHECK(l.num_classes == 1);
    CHECK(l.y.size() == 2);
}

TEST_CASE("graph header pins the node count") {
    LoadStats stats;
    Graph g = load_graph("# nodes: 6\n0 1\n", &stats);
    CHECK(g.num_nodes() == 6);
    CHECK(stats.header_n);
    CHECK(stats.never_seen_ids == 4);
}

TEST_CASE("sparse ids keep the id space") {
    LoadStats stats;
    Graph g = load_graph("0 5\n", &stats);
    CHECK(g.num_nodes() == 6);
    CHECK(stats.never_seen_ids == 4);
    CHECK(g.degree(3) == 0);
}

TEST_CASE("graph save/load round-trips") {
    testutil::TempDir tmp("vcrg-data");
    Graph g = testutil::er_graph(20, 0.2, 13);
    save_graph(g, tmp.file("g.edges"));
    Graph back = load_graph_file(tmp.file("g.edges"));
    CHECK(back.num_nodes() == g.num_nodes());
    CHECK(back.edge_list() == g.edge_list());
}

TEST_CASE("features save/load round-trips") {
    testutil::TempDir tmp("vcrg-data");
    MatD x = testutil::random_features(7, 3, 21);
    save_features(x, tmp.file("x.csv"));
    MatD back = load_features_file(tmp.file("x.csv"));
    REQUIRE(back.same_shape(x));
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(back.v[i] == x.v[i]);
}

TEST_CASE("labels save/load round-trips") {
    testutil::TempDir tmp("vcrg-data");
    LabelVector l = load_labels("2\n-1\n0\n1\n");
    save_labels(l, tmp.file("y.txt"));
    LabelVector back = load_labels_file(tmp.file("y.txt"));
    CHECK(back.y == l.y);
    CHECK(back.num_classes == l.num_classes);
}

TEST_CASE("splits round-trip and validate") {
    Splits s;
    s.train = {0, 1, 2};
    s.val = {3};
    s.test = {4, 5};
    testutil::TempDir tmp("vcrg-data");
    save_splits(s, tmp.file("splits.json"));
    Splits back = load_splits_file(tmp.file("splits.json"));
    CHECK(back.train == s.train);
    CHECK(back.val == s.val);
    CHECK(back.test == s.test);
    validate_splits(back, 6);
}

TEST_CASE("overlapping splits are rejected") {
    Splits s;
    s.train = {0, 1};
    s.val = {1};
    CHECK_THROWS_AS(validate_splits(s, 4), ValidationError);
}

TEST_CASE("out-of-range split ids are rejected") {
    Splits s;
    s.train = {0, 9};
    CHECK_THROWS_AS(validate_splits(s, 4), ValidationError);
}

TEST_CASE("splits json must carry arrays") {
    CHECK_THROWS_AS(load_splits("{\"train\": 3}"), ValidationError);
    CHECK_THROWS_AS(load_splits("not json"), ValidationError);
}

TEST_SUITE_END();
