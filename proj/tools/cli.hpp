#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace varhardy::cli {

/// args excludes the program name. Exit codes: 0 success, 1 validation or
/// domain error (including bad flags), 2 resource limit, 3 numerical failure.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace varhardy::cli
