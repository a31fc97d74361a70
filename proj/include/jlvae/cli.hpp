#pragma once

#include <string>
#include <vector>

namespace jlvae {

inline constexpr const char* kToolVersion = "1.0.0";

// Full command-line front end (subcommands: preprocess, train, score, eval,
// robustness, synth). `args` excludes the program name. Returns the process
// exit code; failures print a machine-readable error JSON to stderr.
int run_cli(const std::vector<std::string>& args);

}  // namespace jlvae
