#pragma once

#include <iosfwd>

namespace dmmvh::cli {

// Entry point of the `dmmvh` tool. Returns the process exit code: 0 on success,
// 1 on a runtime failure, 2 on bad usage.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace dmmvh::cli
