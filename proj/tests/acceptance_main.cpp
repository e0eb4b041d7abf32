// Prints one PASS/FAIL line per acceptance criterion; exit status 0 iff all pass.
#include <cstdlib>
#include <iostream>
#include <string>

#include "qdev/acceptance.hpp"

int main(int argc, char** argv) {
    qdev::acceptance::Options opts;
    for (int i = 1; i + 1 < argc; ++i) {
        const std::string a = argv[i];
        if (a == "--threads") opts.threads = std::atoi(argv[++i]);
        else if (a == "--work-dir") opts.work_dir = argv[++i];
    }
    bool all = true;
    qdev::acceptance::run_all(opts, [&](const qdev::acceptance::CriterionResult& r) {
        std::cout << qdev::acceptance::format_line(r) << std::endl;
        all = all && r.pass;
    });
    return all ? 0 : 1;
}
