#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace vcrg {

/// One verification check. Passing means value <= threshold.
struct CheckResult {
    std::string name;
    bool pass = false;
    double value = 0.0;
    double threshold = 0.0;
    std::string detail;
};

/// Seeded self-checks behind the `verify` subcommand. Suites: "ppr" (power vs
/// cumulative iteration vs push), "theorems" (mass transfer and propagation
/// identities), "gradients" (finite differences), "all".
std::vector<CheckResult> run_verify_suite(const std::string& suite, std::uint64_t seed);

bool all_passed(const std::vector<CheckResult>& checks);
std::string checks_to_json(const std::vector<CheckResult>& checks);

}  // namespace vcrg
