#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace shapecox::cli {

// Exit codes are part of the command-line contract.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInvalid = 1;  // bad flags, unreadable or invalid data, fit/data mismatch
inline constexpr int kExitFitFailed = 2;

inline constexpr const char* kFitSchema = "shapecox.fit/1";
inline constexpr const char* kToolVersion = "1.0.0";

// Entry point shared by the executable and the tests. args excludes argv[0].
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace shapecox::cli
