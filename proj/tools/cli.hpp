#pragma once

#include <iosfwd>

namespace mismatch::cli {

/// Entry point shared by the binary and the tests. Exit codes: 0 success
/// (check: no floor), 2 floor predicted (check only), 1 input error.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace mismatch::cli
