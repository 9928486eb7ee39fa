// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

namespace autoprune::cli {

/// Entry point behind the `autoprune` binary. argv-style arguments without
/// the program name; returns the process exit code (0 on success, 2 for
/// usage/config errors, 1 for runtime failures).
int run_command(const std::vector<std::string>& args);

} // namespace autoprune::cli
