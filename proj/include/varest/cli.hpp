#pragma once

#include <string>
#include <vector>

namespace varest {

// Runs one command line (without the program name). Returns the process exit
// code: 0 ok, 1 usage/config, 2 data/parse, 3 training/numeric.
int run_cli(const std::vector<std::string>& args);

}  // namespace varest
