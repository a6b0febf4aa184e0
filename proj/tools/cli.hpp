#pragma once

#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace stme::cli {

inline constexpr std::string_view kVersion = "0.1.0";

/// Runs one subcommand. `args` excludes the program name. Returns 0 on
/// success, 1 on a compute failure, 2 on a usage or input error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace stme::cli
