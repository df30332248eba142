#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace swingid {

enum ExitCode : int {
    kExitOk = 0,
    kExitUsage = 1,
    kExitValidation = 2,
    kExitNumerical = 3,
    kExitIo = 4,
};

/// Entry point of the `swingid` tool; args excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace swingid
