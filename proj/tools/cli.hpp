#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace logicdiag::cli {

enum ExitCode : int {
    kOk = 0,
    kUsage = 1,
    kDataError = 2,
    kContractViolation = 3,
};

// args excludes the program name. Output goes to the given streams so tests
// can run the CLI in-process.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace logicdiag::cli
