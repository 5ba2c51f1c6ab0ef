#pragma once

#include <string>
#include <vector>

namespace boxseg {

// Entry point behind the `boxseg` binary, exposed as a function so tests can
// drive the exact command surface in-process. Returns the process exit code;
// failures print a single "error: ..." line to stderr and return nonzero.
int run_cli(const std::vector<std::string>& args);
int run_cli(int argc, const char* const* argv);

}  // namespace boxseg
