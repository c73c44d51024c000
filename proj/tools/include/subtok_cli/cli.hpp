#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace subtok::cli {

/// Runs the command line `args` (without the program name). Data goes to
/// `out`, diagnostics to `err`. Returns the process exit code:
/// 0 success, 1 usage error, 2 data error, 3 internal error.
int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err);

}  // namespace subtok::cli
