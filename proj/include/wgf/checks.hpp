#pragma once

#include <string>
#include <vector>

namespace wgf::checks {

struct CheckResult {
    std::string id;           // "criterion-7"
    std::string description;
    bool pass = false;
    std::string measured;     // human/machine readable measured values
};

/// Suites: ot-core {1,2,3}, velocity {4,12,13}, flow {6,7,8},
/// generator {5,9,10,11}, all {1..14}.
std::vector<std::string> suite_names();

/// Runs one suite; `progress` echoes per-criterion lines to stderr as they
/// finish (the long criteria take minutes).
std::vector<CheckResult> run_suite(const std::string& suite, bool progress = false);

}  // namespace wgf::checks
