#pragma once

namespace coopperc::cli {

// Full command-line surface: parses argv, dispatches to a subcommand, writes
// artifacts. Returns the process exit code; machine-readable errors go to
// stderr as a single JSON object.
int run(int argc, char** argv);

}  // namespace coopperc::cli
