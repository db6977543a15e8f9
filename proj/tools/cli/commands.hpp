#pragma once

#include <iosfwd>

namespace marco::cli {

/// Parses argv, dispatches a subcommand and maps failures to exit codes:
/// 0 success, 1 runtime failure, 2 usage or configuration error.
int run(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace marco::cli
