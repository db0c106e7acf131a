#pragma once

#include <iosfwd>

namespace crstd {

// Exit codes: 0 success, 1 runtime error, 2 validation error.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace crstd
