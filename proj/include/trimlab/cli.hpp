#pragma once

namespace trimlab {

// Full command-line entry point; returns the process exit code.
// 0: success, 1: runtime failure or interrupted run, 2: usage or config error.
int run_cli(int argc, char** argv);

}  // namespace trimlab
