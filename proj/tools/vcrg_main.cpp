#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "vcrg/config.hpp"
#include "vcrg/data.hpp"
#include "vcrg/model.hpp"
#include "vcrg/synth.hpp"
#include "vcrg/tokens.hpp"
#include "vcrg/verify.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Cli {
    std::string config_path;
    vcrg::RunConfig cfg;

    void load_config() {
        if (!config_path.empty()) cfg = vcrg::RunConfig::from_json_file(config_path);
    }
};

void require_path(const std::string& value, const std::string& field) {
    if (value.empty())
        throw vcrg::ValidationError("config: paths." + field + " is required for this command");
}

void ensure_out_dir(vcrg::RunConfig& cfg) {
    if (cfg.paths.out_dir.empty()) cfg.paths.out_dir = ".";
    fs::create_directories(cfg.paths.out_dir);
}

int run_synth(Cli& cli) {
    vcrg::RunConfig& cfg = cli.cfg;
    ensure_out_dir(cfg);
    fs::path dir(cfg.paths.out_dir);
    if (cfg.paths.graph.empty()) cfg.paths.graph = (dir / "graph.edges").string();
    if (cfg.paths.features.empty()) cfg.paths.features = (dir / "features.csv").string();
    if (cfg.paths.labels.empty()) cfg.paths.labels = (dir / "labels.txt").string();
    if (cfg.paths.splits.empty()) cfg.paths.splits = (dir / "splits.json").string();

    vcrg::SbmData data = vcrg::generate_sbm(cfg.synth);
    vcrg::save_graph(data.graph, cfg.paths.graph);
    vcrg::save_features(data.features, cfg.paths.features);
    vcrg::save_labels(data.labels, cfg.paths.labels);
    vcrg::save_splits(data.splits, cfg.paths.splits);
    vcrg::write_resolved_config(cfg, (dir / "dataset").string());

    json summary = {{"nodes", data.graph.num_nodes()},
                    {"edges", data.graph.num_edges()},
                    {"classes", data.labels.num_classes},
                    {"homophily", data.homophily},
                    {"connected", data.connected},
                    {"regime_warning", data.regime_warning},
                    {"graph", cfg.paths.graph},
                    {"features", cfg.paths.features},
                    {"labels", cfg.paths.labels},
                    {"splits", cfg.paths.splits}};
    std::cout << summary.dump(2) << "\n";
    return 0;
}

int run_tokenize(Cli& cli) {
    vcrg::RunConfig& cfg = cli.cfg;
    require_path(cfg.paths.graph, "graph");
    require_path(cfg.paths.features, "features");
    require_path(cfg.paths.store, "store");

    vcrg::LoadStats stats;
    vcrg::Graph g = vcrg::load_graph_file(cfg.paths.graph, &stats);
    if (stats.never_seen_ids > 0)
        std::cerr << "warning: " << stats.never_seen_ids << " node ids never appear in any edge\n";
    vcrg::MatD x = vcrg::load_features_file(cfg.paths.features);

    vcrg::LabelVector labels;
    vcrg::Splits splits;
    const vcrg::Splits* splits_ptr = nullptr;
    if (cfg.tokenize.content_mode == vcrg::ContentMode::train_labels) {
        require_path(cfg.paths.labels, "labels");
        require_path(cfg.paths.splits, "splits");
        labels = vcrg::load_labels_file(cfg.paths.labels);
        splits = vcrg::load_splits_file(cfg.paths.splits);
        splits_ptr = &splits;
    }

    vcrg::TokenizeTrace trace;
    vcrg::TokenStore store = vcrg::tokenize_graph(g, x, labels, splits_ptr, cfg.tokenize, &trace);
    fs::path store_path(cfg.paths.store);
    if (store_path.has_parent_path()) fs::create_directories(store_path.parent_path());
    store.save(store_path);
    vcrg::write_resolved_config(cfg, cfg.paths.store);

    json summary = {{"nodes", store.header.n},
                    {"feature_dim", store.header.d},
                    {"rows_per_node", store.header.rows_per_node()},
                    {"empty_structure_groups", trace.empty_structure_groups.size()},
                    {"empty_content_groups", trace.empty_content_groups.size()},
                    {"store", cfg.paths.store}};
    std::cout << summary.dump(2) << "\n";
    return 0;
}

int run_train(Cli& cli) {
    vcrg::RunConfig& cfg = cli.cfg;
    require_path(cfg.paths.store, "store");
    require_path(cfg.paths.labels, "labels");
    require_path(cfg.paths.splits, "splits");
    ensure_out_dir(cfg);
    fs::path dir(cfg.paths.out_dir);
    if (cfg.paths.checkpoint.empty()) cfg.paths.checkpoint = (dir / "checkpoint.vcrc").string();
    if (cfg.paths.metrics.empty()) cfg.paths.metrics = (dir / "metrics.jsonl").string();

    vcrg::TokenStore store = vcrg::TokenStore::load(cfg.paths.store);
    vcrg::LabelVector labels = vcrg::load_labels_file(cfg.paths.labels);
    vcrg::Splits splits = vcrg::load_splits_file(cfg.paths.splits);

    vcrg::TrainResult result = vcrg::train_model(store, labels, splits, cfg.train);

    vcrg::Checkpoint ckpt;
    ckpt.params = result.best.cast<float>();
    ckpt.cfg = cfg.train;
    ckpt.cfg.model = ckpt.params.cfg;  // token_dim/classes resolved during training
    ckpt.epoch = result.best_epoch;
    ckpt.metrics = result.metrics;
    vcrg::save_checkpoint(cfg.paths.checkpoint, ckpt);
    vcrg::write_text_file(cfg.paths.metrics, vcrg::metrics_to_jsonl(result.metrics));
    vcrg::write_resolved_config(cfg, cfg.paths.checkpoint);

    const vcrg::EpochMetrics& best = result.metrics.at(result.best_epoch - 1);
    json summary = {{"epochs", result.metrics.size()},
                    {"best_epoch", result.best_epoch},
                    {"best_val_acc", result.best_val_acc},
                    {"test_acc_at_best", best.test_acc},
                    {"final_train_loss", result.metrics.back().train_loss},
                    {"checkpoint", cfg.paths.checkpoint},
                    {"metrics", cfg.paths.metrics}};
    std::cout << summary.dump(2) << "\n";
    return 0;
}

int run_eval(Cli& cli, const std::string& split) {
    vcrg::RunConfig& cfg = cli.cfg;
    require_path(cfg.paths.checkpoint, "checkpoint");
    require_path(cfg.paths.store, "store");
    require_path(cfg.paths.labels, "labels");

    vcrg::Checkpoint ckpt = vcrg::load_checkpoint(cfg.paths.checkpoint);
    vcrg::TokenStore store = vcrg::TokenStore::load(cfg.paths.store);
    vcrg::LabelVector labels = vcrg::load_labels_file(cfg.paths.labels);

    std::vector<vcrg::NodeId> ids;
    if (split == "all") {
        for (vcrg::NodeId u = 0; u < labels.y.size(); ++u)
            if (labels.y[u] >= 0) ids.push_back(u);
    } else {
        require_path(cfg.paths.splits, "splits");
        vcrg::Splits splits = vcrg::load_splits_file(cfg.paths.splits);
        if (split == "train") ids = splits.train;
        else if (split == "val") ids = splits.val;
        else if (split == "test") ids = splits.test;
        else throw vcrg::ValidationError("unknown split: " + split);
    }
    if (ids.empty()) throw vcrg::ValidationError("eval: split \"" + split + "\" is empty");

    double acc = vcrg::evaluate_accuracy(ckpt.params, store, labels, ids);
    json summary = {{"split", split}, {"count", ids.size()}, {"accuracy", acc}};
    std::cout << summary.dump(2) << "\n";
    return 0;
}

int run_verify(const std::string& suite, std::uint64_t seed) {
    std::vector<vcrg::CheckResult> checks = vcrg::run_verify_suite(suite, seed);
    std::cout << vcrg::checks_to_json(checks);
    return vcrg::all_passed(checks) ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Graph rewiring, PPR token lists, and a mini-batch transformer"};
    app.require_subcommand(1);

    Cli cli;

    auto add_config_flag = [&](CLI::App* cmd) {
        cmd->add_option("--config", cli.config_path, "JSON run configuration");
    };

    CLI::App* synth = app.add_subcommand("synth", "Generate a planted-partition dataset");
    add_config_flag(synth);
    synth->add_option("--out-dir", cli.cfg.paths.out_dir, "output directory");
    std::uint64_t synth_n = 0, synth_b = 0, synth_d = 0, synth_seed = 0;
    double p_in = -1.0, p_out = -1.0, sigma_sep = -1.0;
    std::string feature_mode;
    synth->add_option("--n", synth_n, "node count");
    synth->add_option("--b", synth_b, "block count");
    synth->add_option("--p-in", p_in, "within-block edge probability");
    synth->add_option("--p-out", p_out, "cross-block edge probability");
    synth->add_option("--d", synth_d, "feature dimension");
    synth->add_option("--feature-mode", feature_mode, "label_aligned | label_anti_aligned");
    synth->add_option("--sigma-sep", sigma_sep, "class mean separation in noise units");
    synth->add_option("--seed", synth_seed, "generator seed");

    CLI::App* tokenize = app.add_subcommand("tokenize", "Build the token store for a graph");
    add_config_flag(tokenize);
    tokenize->add_option("--graph", cli.cfg.paths.graph, "edge list file");
    tokenize->add_option("--features", cli.cfg.paths.features, "feature CSV");
    tokenize->add_option("--labels", cli.cfg.paths.labels, "label file");
    tokenize->add_option("--splits", cli.cfg.paths.splits, "splits JSON");
    tokenize->add_option("--store", cli.cfg.paths.store, "output token store");
    std::uint64_t l_hops = 0, k_bar = 0, k_hat = 0, s_bar = 0, s_hat = 0, tok_seed = 0,
                  jobs = 0;
    double tok_alpha = -1.0, tok_eps = -1.0;
    std::string content_mode, hop_norm;
    tokenize->add_option("--l-hops", l_hops, "hop aggregate count L");
    tokenize->add_option("--k-bar", k_bar, "structure neighbors per node");
    tokenize->add_option("--k-hat", k_hat, "content neighbors per node");
    tokenize->add_option("--s-bar", s_bar, "structure cluster count");
    tokenize->add_option("--s-hat", s_hat, "content group count (kmeans mode)");
    tokenize->add_option("--content-mode", content_mode, "none | train_labels | kmeans");
    tokenize->add_option("--hop-norm", hop_norm, "column | row | symmetric | gcn_augmented");
    tokenize->add_option("--alpha", tok_alpha, "walk continuation probability");
    tokenize->add_option("--eps", tok_eps, "push approximation threshold");
    tokenize->add_option("--seed", tok_seed, "tokenization seed");
    tokenize->add_option("--jobs", jobs, "worker threads for per-node work");

    CLI::App* train = app.add_subcommand("train", "Train the node classifier on a token store");
    add_config_flag(train);
    train->add_option("--store", cli.cfg.paths.store, "token store");
    train->add_option("--labels", cli.cfg.paths.labels, "label file");
    train->add_option("--splits", cli.cfg.paths.splits, "splits JSON");
    train->add_option("--checkpoint", cli.cfg.paths.checkpoint, "output checkpoint");
    train->add_option("--metrics", cli.cfg.paths.metrics, "output metrics JSONL");
    train->add_option("--out-dir", cli.cfg.paths.out_dir, "default output directory");
    std::uint64_t layers = 0, width = 0, heads = 0, batch_size = 0, epochs = 0, train_seed = 0;
    double lr = -1.0, weight_decay = -1.0;
    std::string readout, precision;
    train->add_option("--layers", layers, "encoder layers");
    train->add_option("--width", width, "model width");
    train->add_option("--heads", heads, "attention heads");
    train->add_option("--readout", readout, "mean | sum | attention");
    train->add_option("--lr", lr, "learning rate");
    train->add_option("--weight-decay", weight_decay, "decoupled weight decay");
    train->add_option("--batch-size", batch_size, "mini-batch size");
    train->add_option("--epochs", epochs, "training epochs");
    train->add_option("--seed", train_seed, "training seed");
    train->add_option("--precision", precision, "f32 | f64");

    CLI::App* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a split");
    add_config_flag(eval);
    eval->add_option("--checkpoint", cli.cfg.paths.checkpoint, "checkpoint file");
    eval->add_option("--store", cli.cfg.paths.store, "token store");
    eval->add_option("--labels", cli.cfg.paths.labels, "label file");
    eval->add_option("--splits", cli.cfg.paths.splits, "splits JSON");
    std::string split = "test";
    eval->add_option("--split", split, "train | val | test | all");

    CLI::App* verify = app.add_subcommand("verify", "Run seeded self-checks");
    std::string suite = "all";
    std::uint64_t verify_seed = 0;
    bool verify_seed_given = false;
    verify->add_option("--suite", suite, "ppr | theorems | gradients | all");
    verify->add_option("--seed", verify_seed, "suite seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        // Flag values were captured into cli.cfg.paths directly; everything
        // else overrides the config file only when the flag was given.
        vcrg::PathsConfig flag_paths = cli.cfg.paths;
        cli.load_config();
        auto keep = [](std::string& dst, const std::string& flag) {
            if (!flag.empty()) dst = flag;
        };
        keep(cli.cfg.paths.graph, flag_paths.graph);
        keep(cli.cfg.paths.features, flag_paths.features);
        keep(cli.cfg.paths.labels, flag_paths.labels);
        keep(cli.cfg.paths.splits, flag_paths.splits);
        keep(cli.cfg.paths.store, flag_paths.store);
        keep(cli.cfg.paths.checkpoint, flag_paths.checkpoint);
        keep(cli.cfg.paths.metrics, flag_paths.metrics);
        keep(cli.cfg.paths.out_dir, flag_paths.out_dir);

        if (app.got_subcommand(synth)) {
            if (synth->count("--n")) cli.cfg.synth.n = synth_n;
            if (synth->count("--b")) cli.cfg.synth.b = static_cast<std::uint32_t>(synth_b);
            if (synth->count("--p-in")) cli.cfg.synth.p_in = p_in;
            if (synth->count("--p-out")) cli.cfg.synth.p_out = p_out;
            if (synth->count("--d")) cli.cfg.synth.d = synth_d;
            if (synth->count("--feature-mode"))
                cli.cfg.synth.feature_mode = vcrg::feature_mode_from_string(feature_mode);
            if (synth->count("--sigma-sep")) cli.cfg.synth.sigma_sep = sigma_sep;
            if (synth->count("--seed")) {
                cli.cfg.synth.seed = synth_seed;
                cli.cfg.synth_seed_set = true;
            }
            cli.cfg.apply_seed_fallback();
            return run_synth(cli);
        }
        if (app.got_subcommand(tokenize)) {
            if (tokenize->count("--l-hops")) cli.cfg.tokenize.l_hops = l_hops;
            if (tokenize->count("--k-bar")) cli.cfg.tokenize.k_bar = k_bar;
            if (tokenize->count("--k-hat")) cli.cfg.tokenize.k_hat = k_hat;
            if (tokenize->count("--s-bar"))
                cli.cfg.tokenize.s_bar = static_cast<std::uint32_t>(s_bar);
            if (tokenize->count("--s-hat"))
                cli.cfg.tokenize.s_hat = static_cast<std::uint32_t>(s_hat);
            if (tokenize->count("--content-mode"))
                cli.cfg.tokenize.content_mode = vcrg::content_mode_from_string(content_mode);
            if (tokenize->count("--hop-norm"))
                cli.cfg.tokenize.hop_norm = vcrg::norm_kind_from_string(hop_norm);
            if (tokenize->count("--alpha")) cli.cfg.tokenize.alpha = tok_alpha;
            if (tokenize->count("--eps")) cli.cfg.tokenize.eps = tok_eps;
            if (tokenize->count("--seed")) {
                cli.cfg.tokenize.seed = tok_seed;
                cli.cfg.tokenize_seed_set = true;
            }
            if (tokenize->count("--jobs")) cli.cfg.tokenize.jobs = static_cast<unsigned>(jobs);
            cli.cfg.apply_seed_fallback();
            return run_tokenize(cli);
        }
        if (app.got_subcommand(train)) {
            if (train->count("--layers")) cli.cfg.train.model.layers = layers;
            if (train->count("--width")) cli.cfg.train.model.width = width;
            if (train->count("--heads")) cli.cfg.train.model.heads = heads;
            if (train->count("--readout"))
                cli.cfg.train.model.readout = vcrg::readout_from_string(readout);
            if (train->count("--lr")) cli.cfg.train.lr = lr;
            if (train->count("--weight-decay")) cli.cfg.train.weight_decay = weight_decay;
            if (train->count("--batch-size")) cli.cfg.train.batch_size = batch_size;
            if (train->count("--epochs")) cli.cfg.train.epochs = epochs;
            if (train->count("--seed")) {
                cli.cfg.train.seed = train_seed;
                cli.cfg.train_seed_set = true;
            }
            if (train->count("--precision")) cli.cfg.train.precision = precision;
            cli.cfg.apply_seed_fallback();
            return run_train(cli);
        }
        if (app.got_subcommand(eval)) return run_eval(cli, split);
        if (app.got_subcommand(verify)) {
            verify_seed_given = verify->count("--seed") > 0;
            if (!verify_seed_given)
                if (auto env = vcrg::env_seed()) verify_seed = *env;
            return run_verify(suite, verify_seed);
        }
        return 2;
    } catch (const vcrg::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
