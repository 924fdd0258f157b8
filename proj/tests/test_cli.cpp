#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "doctest.h"
#include "helpers.hpp"

using testutil::CmdResult;
using testutil::TempDir;

namespace {

/// The binary under test, injected by ctest; cases bail out loudly without it.
#define REQUIRE_BINARY()                                            \
    const char* bin = testutil::cli_binary();                       \
    if (!bin) {                                                     \
        FAIL("VCRG_BIN is not set; run through ctest or set it");   \
        return;                                                     \
    }

std::string q(const std::filesystem::path& p) { return "'" + p.string() + "'"; }

CmdResult synth_dataset(const char* bin, const TempDir& tmp) {
    return testutil::run_cmd(std::string(bin) +
                                 " synth --out-dir " + q(tmp.path()) +
                                 " --n 60 --b 2 --p-in 0.25 --p-out 0.05 --d 4"
                                 " --sigma-sep 2.0 --seed 11",
                             tmp);
}

CmdResult tokenize_dataset(const char* bin, const TempDir& tmp, const std::string& extra = "") {
    return testutil::run_cmd(std::string(bin) + " tokenize --graph " + q(tmp.file("graph.edges")) +
                                 " --features " + q(tmp.file("features.csv")) + " --labels " +
                                 q(tmp.file("labels.txt")) + " --splits " +
                                 q(tmp.file("splits.json")) + " --store " +
                                 q(tmp.file("store.vcrt")) +
                                 " --l-hops 1 --k-bar 3 --k-hat 2 --s-bar 3"
                                 " --content-mode train_labels --eps 1e-4 --seed 4" +
                                 extra,
                             tmp);
}

CmdResult train_dataset(const char* bin, const TempDir& tmp, const std::string& extra = "") {
    return testutil::run_cmd(std::string(bin) + " train --store " + q(tmp.file("store.vcrt")) +
                                 " --labels " + q(tmp.file("labels.txt")) + " --splits " +
                                 q(tmp.file("splits.json")) + " --out-dir " + q(tmp.path()) +
                                 " --layers 1 --width 8 --heads 2 --epochs 3 --batch-size 16"
                                 " --seed 5" +
                                 extra,
                             tmp);
}

}  // namespace

TEST_SUITE_BEGIN("cli");

TEST_CASE("verify suites report and exit clean") {
    REQUIRE_BINARY();
    TempDir tmp("vcrg-cli");
    CmdResult r = testutil::run_cmd(std::string(bin) + " verify --suite theorems --seed 7", tmp);
    CHECK(r.exit_code == 0);
    auto report = nlohmann::json::parse(r.out);
    CHECK(report.at("all_passed").get<bool>());
    CHECK(report.at("checks").is_array());
    CHECK_FALSE(report.at("checks").empty());
}

TEST_CASE("a missing features path fails naming the field") {
    REQUIRE_BINARY();
    TempDir tmp("vcrg-cli");
    REQUIRE(synth_dataset(bin, tmp).exit_code == 0);
    CmdResult r = testutil::run_cmd(std::string(bin) + " tokenize --graph " +
                                        q(tmp.file("graph.edges")) + " --store " +
                                        q(tmp.file("store.vcrt")),
                                    tmp);
    CHECK(r.exit_code == 1);
    CHECK(r.err.find("features") != std::string::npos);
}

TEST_CASE("a nonexistent features file fails with its path") {
    REQUIRE_BINARY();
    TempDir tmp("vcrg-cli");
    REQUIRE(synth_dataset(bin, tmp).exit_code == 0);
    CmdResult r = testutil::run_cmd(std::string(bin) + " tokenize --graph " +
                                        q(tmp.file("graph.edges")) + " --features " +
                                        q(tmp.file("missing.csv")) + " --labels " +
                                        q(tmp.file("labels.txt")) + " --store " +
                                        q(tmp.file("store.vcrt")),
                                    tmp);
    CHECK(r.exit_code == 1);
    CHECK(r.err.find("missing.csv") != std::string::npos);
}

TEST_CASE("a width mismatch between store and config fails") {
    REQUIRE_BINARY();
    TempDir tmp("vcrg-cli");
    REQUIRE(synth_dataset(bin, tmp).exit_code == 0);
    REQUIRE(tokenize_dataset(bin, tmp).exit_code == 0);

    std::ofstream(tmp.file("bad.json")) << R"({"train": {"token_dim": 9}})";
    CmdResult r = train_dataset(bin, tmp, " --config " + q(tmp.file("bad.json")));
    CHECK(r.exit_code == 1);
    CHECK(r.err.find("token") != std::string::npos);
}

TEST_CASE("the full pipeline runs and leaves resolved configs") {
    REQUIRE_BINARY();
    TempDir tmp("vcrg-cli");
    REQUIRE(synth_dataset(bin, tmp).exit_code == 0);
    CHECK(std::filesystem::exists(tmp.file("graph.edges")));
    CHECK(std::filesystem::exists(tmp.file("dataset.run.json")));

    REQUIRE(tokenize_dataset(bin, tmp).exit_code == 0);
    CHECK(std::filesystem::exists(tmp.file("store.vcrt")));
    CHECK(std::filesystem::exists(tmp.file("store.vcrt.json")));
    CHECK(std::filesystem::exists(tmp.file("store.vcrt.run.json")));

    CmdResult train = train_dataset(bin, tmp);
    REQUIRE(train.exit_code == 0);
    CHECK(std::filesystem::exists(tmp.file("checkpoint.vcrc")));
    CHECK(std::filesystem::exists(tmp.file("metrics.jsonl")));
    CHECK(std::filesystem::exists(tmp.file("checkpoint.vcrc.run.json")));
    auto summary = nlohmann::json::parse(train.out);
    CHECK(summary.at("epochs").get<int>() == 3);

    CmdResult eval = testutil::run_cmd(
        std::string(bin) + " eval --checkpoint " + q(tmp.file("checkpoint.vcrc")) + " --store " +
            q(tmp.file("store.vcrt")) + " --labels " + q(tmp.file("labels.txt")) + " --splits " +
            q(tmp.file("splits.json")) + " --split test",
        tmp);
    REQUIRE(eval.exit_code == 0);
    auto acc = nlohmann::json::parse(eval.out);
    CHECK(acc.at("split").get<std::string>() == "test");
    CHECK(acc.at("accuracy").get<double>() >= 0.0);
    CHECK(acc.at("accuracy").get<double>() <= 1.0);
}

TEST_CASE("rerunning with the same inputs is byte-identical") {
    REQUIRE_BINARY();
    TempDir tmp("vcrg-cli");
    REQUIRE(synth_dataset(bin, tmp).exit_code == 0);
    REQUIRE(tokenize_dataset(bin, tmp).exit_code == 0);
    std::string store1 = testutil::slurp(tmp.file("store.vcrt"));
    REQUIRE(train_dataset(bin, tmp).exit_code == 0);
    std::string metrics1 = testutil::slurp(tmp.file("metrics.jsonl"));

    REQUIRE(tokenize_dataset(bin, tmp).exit_code == 0);
    CHECK(testutil::slurp(tmp.file("store.vcrt")) == store1);
    REQUIRE(train_dataset(bin, tmp).exit_code == 0);
    CHECK(testutil::slurp(tmp.file("metrics.jsonl")) == metrics1);
}

TEST_CASE("config files drive tokenize like flags do") {
    REQUIRE_BINARY();
    TempDir tmp("vcrg-cli");
    REQUIRE(synth_dataset(bin, tmp).exit_code == 0);
    REQUIRE(tokenize_dataset(bin, tmp).exit_code == 0);
    std::string via_flags = testutil::slurp(tmp.file("store.vcrt"));

    nlohmann::json cfg = {
        {"paths",
         {{"graph", tmp.file("graph.edges").string()},
          {"features", tmp.file("features.csv").string()},
          {"labels", tmp.file("labels.txt").string()},
          {"splits", tmp.file("splits.json").string()},
          {"store", tmp.file("store2.vcrt").string()}}},
        {"tokenize",
         {{"l_hops", 1},
          {"k_bar", 3},
          {"k_hat", 2},
          {"s_bar", 3},
          {"content_mode", "train_labels"},
          {"eps", 1e-4},
          {"seed", 4}}}};
    std::ofstream(tmp.file("run.json")) << cfg.dump(2);
    CmdResult r = testutil::run_cmd(
        std::string(bin) + " tokenize --config " + q(tmp.file("run.json")), tmp);
    REQUIRE(r.exit_code == 0);
    CHECK(testutil::slurp(tmp.file("store2.vcrt")) == via_flags);
}

TEST_CASE("bad invocations use distinct exit codes") {
    REQUIRE_BINARY();
    TempDir tmp("vcrg-cli");
    CmdResult help = testutil::run_cmd(std::string(bin) + " --help", tmp);
    CHECK(help.exit_code == 0);

    CmdResult nocmd = testutil::run_cmd(std::string(bin) + " shuffle", tmp);
    CHECK(nocmd.exit_code != 0);

    CmdResult badsuite = testutil::run_cmd(std::string(bin) + " verify --suite banana", tmp);
    CHECK(badsuite.exit_code == 1);
}

TEST_SUITE_END();
