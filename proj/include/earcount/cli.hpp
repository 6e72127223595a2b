#pragma once

namespace earcount {

/// Exit codes: 0 success, 1 usage or config error, 2 runtime or data error.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitRuntime = 2;

int run_cli(int argc, char** argv);

}  // namespace earcount
