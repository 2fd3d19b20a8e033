#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace cascade::cli {

/// Runs one subcommand (args excludes the program name). Returns the process
/// exit status: 0 success, 1 usage/config error, 2 data/format error,
/// 3 stage failure.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace cascade::cli
