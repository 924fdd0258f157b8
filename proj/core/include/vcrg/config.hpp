#pragma once

#include <optional>
#include <string>

#include "vcrg/model.hpp"
#include "vcrg/synth.hpp"
#include "vcrg/tokens.hpp"

namespace vcrg {

struct PathsConfig {
    std::string graph;
    std::string features;
    std::string labels;
    std::string splits;
    std::string store;
    std::string checkpoint;
    std::string metrics;
    std::string out_dir;
};

/// One JSON document drives every subcommand; each reads the sections it
/// needs. Unknown keys are rejected with the full key path so typos never
/// silently fall back to defaults.
struct RunConfig {
    PathsConfig paths;
    TokenizeOptions tokenize;
    TrainConfig train;
    SbmSpec synth;

    // True once a seed was given explicitly (config key or flag); seeds still
    // at their default fall back to VCRG_SEED.
    bool tokenize_seed_set = false;
    bool train_seed_set = false;
    bool synth_seed_set = false;

    static RunConfig from_json_text(const std::string& text);
    static RunConfig from_json_file(const std::string& path);
    std::string to_json_text() const;

    void apply_seed_fallback();
};

/// VCRG_SEED, if set, seeds every section that was not given an explicit seed.
std::optional<std::uint64_t> env_seed();

void write_resolved_config(const RunConfig& cfg, const std::string& artifact_path);

}  // namespace vcrg
