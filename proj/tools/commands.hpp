#pragma once

#include <string>
#include <utility>
#include <vector>

#include "emsco/experiment.hpp"

namespace emsco::cli {

/// Files produced by a command, written only after every one of them has
/// been computed.
using Artifacts = std::vector<std::pair<std::string, std::string>>;

Artifacts cmd_synth(const RunConfig& cfg);
Artifacts cmd_split(const RunConfig& cfg);
Artifacts cmd_evolve(const RunConfig& cfg);
Artifacts cmd_bruteforce(const RunConfig& cfg);
Artifacts cmd_baseline(const RunConfig& cfg);
Artifacts cmd_neighborhood(const RunConfig& cfg);
Artifacts cmd_report(const RunConfig& cfg);

/// Creates the output directory and writes each artifact with rename.
void commit(const Artifacts& artifacts);

/// Full command-line entry point; returns the process exit status.
int run_cli(int argc, char** argv);

}  // namespace emsco::cli
