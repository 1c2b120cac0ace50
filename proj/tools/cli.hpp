#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace crossfit {

// Entry point behind the `crossfit` executable. args excludes the program
// name. Returns the process exit code: 0 success, 1 input or runtime error,
// 2 fit finished without converging (output is still written).
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace crossfit
