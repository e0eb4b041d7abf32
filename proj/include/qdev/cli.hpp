// cli.hpp - command dispatch for the qdev tool.
#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace qdev::cli {

// args excludes the program name. Exit codes: 0 success, 1 validation error, 2 numerical failure.
// Errors are written to err as one JSON object {code, message, context}.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace qdev::cli
