#pragma once

#include <string>
#include <vector>

namespace xrc {

/// Entry point behind the xrc binary; returns the process exit code.
/// Subcommands: train, compress, decompress, eval, info.
int run_cli(const std::vector<std::string>& args);

}  // namespace xrc
