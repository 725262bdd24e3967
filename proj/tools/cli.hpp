#pragma once

#include <iosfwd>

namespace elltest {

// Entry point of the command-line tool. Returns the process exit status:
// 0 success, 2 input error, 3 numerical failure.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace elltest
