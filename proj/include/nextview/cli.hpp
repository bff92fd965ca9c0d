// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "nextview/config.hpp"

namespace nbv {

// Subcommand bodies. Each validates its config, resolves the output
// directory (falling back to $NEXTVIEW_OUT, then the working directory),
// writes the serialized config next to its outputs, and returns the
// directory it wrote. Human-readable summaries go to `out`.
std::filesystem::path cmd_gen(RunConfig config, std::ostream& out);
std::filesystem::path cmd_train(RunConfig config, std::ostream& out);
std::filesystem::path cmd_select(RunConfig config, std::ostream& out);
std::filesystem::path cmd_eval(RunConfig config, std::ostream& out);
std::filesystem::path cmd_report(RunConfig config, std::ostream& out);

// Argv-level entry point (args excludes the program name). Parses flags,
// dispatches, and maps errors to exit codes: 0 success, 2 configuration
// error, 3 data error, 4 numeric divergence.
int run_cli(std::vector<std::string> args, std::ostream& out);

}  // namespace nbv
