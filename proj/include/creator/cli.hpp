#pragma once

// Command-line front end.  Exit codes:
//   0 success, 1 usage or configuration error, 2 IO or malformed input,
//   3 structural failure of a pipeline stage, 4 missing ground truth.

#include <iosfwd>

namespace creator {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitIo = 2;
inline constexpr int kExitStructural = 3;
inline constexpr int kExitNoGroundTruth = 4;

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace creator
