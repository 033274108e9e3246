#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace sfpe {

/// Exit statuses of the command-line runner.
enum ExitCode : int {
    kExitOk = 0,
    /// A verification subcommand ran but reported failing rows.
    kExitCheckFailed = 1,
    /// Invalid configuration or problem file.
    kExitConfig = 2,
    /// Failed sweep, diverging iteration or ill-conditioned diffusion.
    kExitNumerical = 3,
};

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view data);

/// Runs one command line (args[0] is the program name). Artifacts go to the
/// files named on the command line; `out` receives a short human summary and
/// `err` a JSON error record on failure.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace sfpe
