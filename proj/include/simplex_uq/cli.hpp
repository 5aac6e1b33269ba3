#pragma once

#include <iosfwd>

namespace simplex_uq {

/// Entry point of the simplex-uq command. Returns the process exit status:
/// 0 success, 1 usage/config/parse, 2 rank/shape, 3 numeric, 64 unknown
/// experiment subcommand.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace simplex_uq
