#pragma once

namespace cavityqfi {

/// Command-line entry point: subcommands simulate, sweep, map, fit,
/// oracle-check. Returns 0 on success, 1 on configuration/usage errors,
/// 2 on numerical failures.
int run_cli(int argc, const char* const* argv);

}  // namespace cavityqfi
