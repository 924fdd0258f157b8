#pragma once

#include <cstdint>
#include <string>

#include "vcrg/common.hpp"
#include "vcrg/data.hpp"
#include "vcrg/graph.hpp"

namespace vcrg {

enum class FeatureMode { label_aligned, label_anti_aligned };

FeatureMode feature_mode_from_string(const std::string& s);
std::string to_string(FeatureMode mode);

/// Stochastic block model with Gaussian class features. label_anti_aligned
/// marks the intended heterophilous regime (p_out > p_in) and only changes
/// validation warnings; features always follow the labels.
struct SbmSpec {
    std::size_t n = 0;
    std::uint32_t b = 1;
    double p_in = 0.0;
    double p_out = 0.0;
    std::size_t d = 0;
    FeatureMode feature_mode = FeatureMode::label_aligned;
    double sigma_sep = 1.0;
    std::uint64_t seed = 0;

    void validate() const;
};

struct SbmData {
    Graph graph;
    MatD features;
    LabelVector labels;
    Splits splits;
    double homophily = 0.0;
    bool connected = true;
    bool regime_warning = false;  // feature_mode disagrees with p_in vs p_out
};

/// Blocks are contiguous runs of near-equal size; labels equal block ids;
/// class means sit at pairwise distance sigma_sep with unit Gaussian noise;
/// splits are a seeded 60/20/20 shuffle. Deterministic per seed.
SbmData generate_sbm(const SbmSpec& spec);

/// Fraction of edges whose endpoints share a label.
double edge_homophily(const Graph& g, const LabelVector& labels);

}  // namespace vcrg
