#pragma once

#include <string>
#include <vector>

namespace xplain {

/// Exit codes: 0 success, 1 validation/usage error, 2 numerical abort.
int run_cli(int argc, char** argv);
/// args[0] is the program name.
int run_cli(const std::vector<std::string>& args);

}  // namespace xplain
