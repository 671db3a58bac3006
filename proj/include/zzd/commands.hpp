#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace zzd {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

/// Runs one subcommand (prepare, train, eval-matrix, ablate, detect, bench).
/// `args` excludes the program name. Results go to `out`, diagnostics to
/// `err`. Returns the process exit code.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace zzd
