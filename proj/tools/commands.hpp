#pragma once

#include <string>
#include <vector>

namespace confret::cli {

enum ExitCode : int {
  kOk = 0,
  kUsage = 1,
  kData = 2,
  kInternal = 3,
};

// Parses args (without the program name) and runs one subcommand:
// retrieve, calibrate, evaluate, tune, synth, bench.
int run(const std::vector<std::string>& args);

}  // namespace confret::cli
