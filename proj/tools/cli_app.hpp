#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace birdsong::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitProcessing = 1;
inline constexpr int kExitUsage = 2;

/// Runs one command line (without the program name). Failures are reported on
/// `err` as `error: code=<Code> message="<text>"`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace birdsong::cli
