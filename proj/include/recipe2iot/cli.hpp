// Command-line entry point; exposed as a library function so tests can
// drive the full pipeline in-process.
#pragma once

#include <string>
#include <vector>

namespace r2iot {

/// Runs one subcommand. Returns 0 on success, 1 on usage errors, 2 on data
/// errors. All diagnostics go to stderr; primary output goes to files or
/// stdout as requested.
int run_cli(const std::vector<std::string>& args);
int run_cli(int argc, const char* const* argv);

}  // namespace r2iot
