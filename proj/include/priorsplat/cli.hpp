#pragma once

#include <string>
#include <vector>

namespace priorsplat {

enum ExitCode : int { kExitOk = 0, kExitPartial = 1, kExitValidation = 2, kExitEmpty = 3 };

// Entry point for the priorsplat executable; returns the process exit code.
int run_cli(int argc, char** argv);
int run_cli(const std::vector<std::string>& args);

}  // namespace priorsplat
