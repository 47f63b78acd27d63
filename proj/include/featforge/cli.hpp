#pragma once

namespace featforge::cli {

/// Entry point for the feat-forge command line; returns the process exit code.
int run(int argc, char** argv);

}  // namespace featforge::cli
