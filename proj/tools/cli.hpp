#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace flowinv::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitRuntime = 2;

// Runs one command line (without the program name). Help and summaries go
// to `out`; failures end with a single "error[<code>]: <message>" line on
// `err`.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace flowinv::cli
