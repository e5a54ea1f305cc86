#pragma once

#include <iosfwd>

namespace richness {

/// Entry point of the `richness` tool. Exit codes: 0 success, 2 usage or
/// input error, 3 numerical failure; errors are reported as JSON on `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace richness
