#pragma once

#include <iosfwd>

namespace matrixpower {

/// Entry point of the `matrixpower` command. Returns the process exit
/// status: 0 success, 1 usage or parse error, 2 domain error (singular
/// design, no effect), 3 numerical failure.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace matrixpower
