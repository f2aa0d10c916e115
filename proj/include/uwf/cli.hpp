#pragma once

#include <string>
#include <vector>

namespace uwf {

inline constexpr const char* kToolVersion = "0.1.0";

/// Entry point behind the `uwf` binary. Dispatches the subcommands
/// (simulate, sdf, make-dataset, train, evaluate, matrix, report) and maps
/// failures to exit codes: 0 success, 2 config error, 3 data error,
/// 4 training diverged, 5 simulation diverged.
int run_cli(const std::vector<std::string>& args);

} // namespace uwf
