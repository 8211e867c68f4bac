// SPDX-License-Identifier: Apache-2.0
#pragma once

namespace csidn {

/// Entry point for the csidn command line tool (subcommands: generate,
/// train, evaluate). Returns the process exit code; errors are printed to
/// stderr as a single line with a machine-parsable category prefix.
int run_cli(int argc, const char* const* argv);

}  // namespace csidn
