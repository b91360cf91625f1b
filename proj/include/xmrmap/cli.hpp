#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace xmrmap::cli {

// Runs one `xmrmap` invocation; `args` excludes the program name.
// Exit codes: 0 success, 1 input error, 2 protocol/schema error,
// 3 internal invariant violation.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace xmrmap::cli
