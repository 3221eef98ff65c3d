#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace hdqkd::cli {

enum ExitCode : int { kOk = 0, kDomainError = 1, kInputError = 2 };

// Runs one command line (args excludes the program name) and returns the
// process exit code. Normal output goes to out, diagnostics to err.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace hdqkd::cli
