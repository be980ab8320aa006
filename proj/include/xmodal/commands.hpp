#pragma once

#include <ostream>

#include "xmodal/config.hpp"

namespace xmodal {

// Exit codes shared by every subcommand.
enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitData = 2,
  kExitNumerical = 3,
};

void cmd_synth(const RunConfig& config, std::ostream& out, std::ostream& diag);
void cmd_encode(const RunConfig& config, std::ostream& out, std::ostream& diag);
void cmd_train(const RunConfig& config, std::ostream& out, std::ostream& diag);
void cmd_embed(const RunConfig& config, std::ostream& out, std::ostream& diag);
void cmd_eval(const RunConfig& config, std::ostream& out, std::ostream& diag);
void cmd_project(const RunConfig& config, std::ostream& out, std::ostream& diag);

// Full command-line entry point: parses argv, resolves the configuration
// and runs one subcommand. Returns an ExitCode.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& diag);

}  // namespace xmodal
