#pragma once

#include <string>
#include <vector>

namespace ebench::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInternal = 1;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitPartial = 3;

// Entry point of the `ebench` binary; returns the process exit code.
int run(int argc, const char* const* argv);
int run(const std::vector<std::string>& args);

}  // namespace ebench::cli
