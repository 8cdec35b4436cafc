#pragma once

#include <iosfwd>

namespace steerlens::cli {

/// Runs one command line. Returns the process exit code; errors are reported
/// on `err` and never escape as exceptions.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace steerlens::cli
