#pragma once

#include <string>
#include <vector>

namespace unigest {

// Command-line entry point. Exit codes: 0 success, 1 usage error,
// 2 data error, 3 runtime failure.
int run(int argc, const char* const* argv);
int run(const std::vector<std::string>& args);  // args without argv[0]

}  // namespace unigest
