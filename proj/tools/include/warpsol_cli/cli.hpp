#pragma once

#include <iosfwd>
#include <string>
#include <vector>

// Command-line front end over the warpsol library. Kept as a library so
// tests can drive the full argument-to-report path in process; main() is
// a thin wrapper.
//
// Exit codes: 0 verdict pass (or probe completed), 1 verdict fail,
// 2 configuration, parse, or domain error.

namespace warpsol::cli {

inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr const char* kReportSchema = "warpsol-report/1";

int run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err);

}  // namespace warpsol::cli
