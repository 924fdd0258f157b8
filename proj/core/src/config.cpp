#include "vcrg/config.hpp"

#include <charconv>
#include <cstdlib>
#include <filesystem>

#include <nlohmann/json.hpp>

#include "vcrg/data.hpp"

namespace vcrg {

namespace {

using nlohmann::json;

[[noreturn]] void bad_key(const std::string& path) {
    throw ValidationError("config: unknown key \"" + path + "\"");
}

[[noreturn]] void bad_type(const std::string& path, const char* want) {
    throw ValidationError("config: key \"" + path + "\" must be " + want);
}

std::string get_string(const json& v, const std::string& path) {
    if (!v.is_string()) bad_type(path, "a string");
    return v.get<std::string>();
}

double get_number(const json& v, const std::string& path) {
    if (!v.is_number()) bad_type(path, "a number");
    return v.get<double>();
}

std::uint64_t get_uint(const json& v, const std::string& path) {
    if (!v.is_number_unsigned()) bad_type(path, "a non-negative integer");
    return v.get<std::uint64_t>();
}

void parse_paths(const json& obj, const std::string& prefix, PathsConfig& out) {
    for (const auto& [key, value] : obj.items()) {
        std::string path = prefix + "." + key;
        if (key == "graph") out.graph = get_string(value, path);
        else if (key == "features") out.features = get_string(value, path);
        else if (key == "labels") out.labels = get_string(value, path);
        else if (key == "splits") out.splits = get_string(value, path);
        else if (key == "store") out.store = get_string(value, path);
        else if (key == "checkpoint") out.checkpoint = get_string(value, path);
        else if (key == "metrics") out.metrics = get_string(value, path);
        else if (key == "out_dir") out.out_dir = get_string(value, path);
        else bad_key(path);
    }
}

void parse_tokenize(const json& obj, const std::string& prefix, RunConfig& cfg) {
    TokenizeOptions& out = cfg.tokenize;
    for (const auto& [key, value] : obj.items()) {
        std::string path = prefix + "." + key;
        if (key == "l_hops") out.l_hops = get_uint(value, path);
        else if (key == "k_bar") out.k_bar = get_uint(value, path);
        else if (key == "k_hat") out.k_hat = get_uint(value, path);
        else if (key == "s_bar") out.s_bar = static_cast<std::uint32_t>(get_uint(value, path));
        else if (key == "content_mode") out.content_mode = content_mode_from_string(get_string(value, path));
        else if (key == "s_hat") out.s_hat = static_cast<std::uint32_t>(get_uint(value, path));
        else if (key == "alpha") out.alpha = get_number(value, path);
        else if (key == "eps") out.eps = get_number(value, path);
        else if (key == "seed") { out.seed = get_uint(value, path); cfg.tokenize_seed_set = true; }
        else if (key == "hop_norm") out.hop_norm = norm_kind_from_string(get_string(value, path));
        else if (key == "jobs") out.jobs = static_cast<unsigned>(get_uint(value, path));
        else bad_key(path);
    }
}

void parse_train(const json& obj, const std::string& prefix, RunConfig& cfg) {
    TrainConfig& out = cfg.train;
    for (const auto& [key, value] : obj.items()) {
        std::string path = prefix + "." + key;
        if (key == "layers") out.model.layers = get_uint(value, path);
        else if (key == "width") out.model.width = get_uint(value, path);
        else if (key == "heads") out.model.heads = get_uint(value, path);
        else if (key == "readout") out.model.readout = readout_from_string(get_string(value, path));
        else if (key == "token_dim") out.model.token_dim = get_uint(value, path);
        else if (key == "classes") out.model.classes = get_uint(value, path);
        else if (key == "lr") out.lr = get_number(value, path);
        else if (key == "beta1") out.beta1 = get_number(value, path);
        else if (key == "beta2") out.beta2 = get_number(value, path);
        else if (key == "adam_eps") out.adam_eps = get_number(value, path);
        else if (key == "weight_decay") out.weight_decay = get_number(value, path);
        else if (key == "batch_size") out.batch_size = get_uint(value, path);
        else if (key == "epochs") out.epochs = get_uint(value, path);
        else if (key == "seed") { out.seed = get_uint(value, path); cfg.train_seed_set = true; }
        else if (key == "precision") out.precision = get_string(value, path);
        else bad_key(path);
    }
}

void parse_synth(const json& obj, const std::string& prefix, RunConfig& cfg) {
    SbmSpec& out = cfg.synth;
    for (const auto& [key, value] : obj.items()) {
        std::string path = prefix + "." + key;
        if (key == "n") out.n = get_uint(value, path);
        else if (key == "b") out.b = static_cast<std::uint32_t>(get_uint(value, path));
        else if (key == "p_in") out.p_in = get_number(value, path);
        else if (key == "p_out") out.p_out = get_number(value, path);
        else if (key == "d") out.d = get_uint(value, path);
        else if (key == "feature_mode") out.feature_mode = feature_mode_from_string(get_string(value, path));
        else if (key == "sigma_sep") out.sigma_sep = get_number(value, path);
        else if (key == "seed") { out.seed = get_uint(value, path); cfg.synth_seed_set = true; }
        else bad_key(path);
    }
}

}  // namespace

RunConfig RunConfig::from_json_text(const std::string& text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("config: invalid JSON: ") + e.what());
    }
    if (!root.is_object()) throw ValidationError("config: top level must be an object");

    RunConfig cfg;
    for (const auto& [key, value] : root.items()) {
        if (!value.is_object() && (key == "paths" || key == "tokenize" || key == "train" || key == "synth"))
            bad_type(key, "an object");
        if (key == "paths") parse_paths(value, key, cfg.paths);
        else if (key == "tokenize") parse_tokenize(value, key, cfg);
        else if (key == "train") parse_train(value, key, cfg);
        else if (key == "synth") parse_synth(value, key, cfg);
        else bad_key(key);
    }
    return cfg;
}

RunConfig RunConfig::from_json_file(const std::string& path) {
    return from_json_text(read_text_file(path));
}

std::string RunConfig::to_json_text() const {
    json root;
    root["paths"] = {{"graph", paths.graph},           {"features", paths.features},
                     {"labels", paths.labels},         {"splits", paths.splits},
                     {"store", paths.store},           {"checkpoint", paths.checkpoint},
                     {"metrics", paths.metrics},       {"out_dir", paths.out_dir}};
    root["tokenize"] = {{"l_hops", tokenize.l_hops},
                        {"k_bar", tokenize.k_bar},
                        {"k_hat", tokenize.k_hat},
                        {"s_bar", tokenize.s_bar},
                        {"content_mode", to_string(tokenize.content_mode)},
                        {"s_hat", tokenize.s_hat},
                        {"alpha", tokenize.alpha},
                        {"eps", tokenize.eps},
                        {"seed", tokenize.seed},
                        {"hop_norm", to_string(tokenize.hop_norm)},
                        {"jobs", tokenize.jobs}};
    root["train"] = {{"layers", train.model.layers},
                     {"width", train.model.width},
                     {"heads", train.model.heads},
                     {"readout", to_string(train.model.readout)},
                     {"token_dim", train.model.token_dim},
                     {"classes", train.model.classes},
                     {"lr", train.lr},
                     {"beta1", train.beta1},
                     {"beta2", train.beta2},
                     {"adam_eps", train.adam_eps},
                     {"weight_decay", train.weight_decay},
                     {"batch_size", train.batch_size},
                     {"epochs", train.epochs},
                     {"seed", train.seed},
                     {"precision", train.precision}};
    root["synth"] = {{"n", synth.n},
                     {"b", synth.b},
                     {"p_in", synth.p_in},
                     {"p_out", synth.p_out},
                     {"d", synth.d},
                     {"feature_mode", to_string(synth.feature_mode)},
                     {"sigma_sep", synth.sigma_sep},
                     {"seed", synth.seed}};
    return root.dump(2) + "\n";
}

void RunConfig::apply_seed_fallback() {
    std::optional<std::uint64_t> env = env_seed();
    if (!env) return;
    if (!tokenize_seed_set) tokenize.seed = *env;
    if (!train_seed_set) train.seed = *env;
    if (!synth_seed_set) synth.seed = *env;
}

std::optional<std::uint64_t> env_seed() {
    const char* raw = std::getenv("VCRG_SEED");
    if (!raw || !*raw) return std::nullopt;
    std::uint64_t value = 0;
    auto [ptr, ec] = std::from_chars(raw, raw + std::char_traits<char>::length(raw), value);
    if (ec != std::errc() || *ptr != '\0')
        throw ValidationError(std::string("VCRG_SEED is not a non-negative integer: ") + raw);
    return value;
}

void write_resolved_config(const RunConfig& cfg, const std::string& artifact_path) {
    write_text_file(std::filesystem::path(artifact_path + ".run.json"), cfg.to_json_text());
}

}  // namespace vcrg
