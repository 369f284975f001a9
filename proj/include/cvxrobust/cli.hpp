#pragma once

// The `cvxrobust` command line: train-poly, certify, train-relu, attack and
// fit-activation. Options come from flags, then an optional JSON config
// (--config), then defaults; flags win. CVXROBUST_OUT overrides the output
// directory unless --out is given. Every run writes its resolved options to
// config.json in the output directory.

#include <iosfwd>
#include <string>
#include <vector>

namespace cvxrobust::cli {

inline constexpr int exit_ok = 0;
inline constexpr int exit_numerical = 1;
inline constexpr int exit_usage = 2;

inline constexpr const char* output_env = "CVXROBUST_OUT";

/// args[0] is the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace cvxrobust::cli
