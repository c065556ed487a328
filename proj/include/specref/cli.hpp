#pragma once

#include <string>
#include <vector>

namespace specref {

// Command-line entry point (subcommands: generate, solve, train, finetune,
// evaluate, spectra, verify). Returns the process exit code: 0 on success,
// 1 on runtime failure, 2 on usage errors.
int run_cli(const std::vector<std::string>& args);

}  // namespace specref
