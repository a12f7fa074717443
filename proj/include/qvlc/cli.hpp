#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace qvlc::cli {

enum ExitCode : int {
    kOk = 0,
    kValidationError = 1,
    kInfeasible = 2,
    kVerificationFailed = 3,
};

/// Entry point of the `qvlc` tool; `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Locale-independent "%.12g".
std::string format_number(double x);

}  // namespace qvlc::cli
