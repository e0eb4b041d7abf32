// acceptance.hpp - the acceptance fixtures shared by the `check` verb and the acceptance binary.
#pragma once

#include <functional>
#include <string>
#include <vector>

namespace qdev::acceptance {

struct CriterionResult {
    int id = 0;
    std::string name;
    bool pass = false;
    std::string detail;
    double seconds = 0.0;
};

struct Options {
    int threads = 1;
    std::string work_dir;  // scratch directory for CLI round trips; a temporary one when empty
};

// One PASS/FAIL line.
std::string format_line(const CriterionResult& r);

std::vector<CriterionResult> run_all(const Options& options,
                                     const std::function<void(const CriterionResult&)>& on_result = {});

}  // namespace qdev::acceptance
