#pragma once

#include <iosfwd>

namespace accudrive::cli {

// Exit codes returned by run().
inline constexpr int kOk = 0;
inline constexpr int kUsageError = 1;
inline constexpr int kDataError = 2;
inline constexpr int kNumericError = 3;

// Subcommands: synth, train, eval, predict, inspect, embed. Results go to
// files or `out`; the resolved configuration and diagnostics go to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run(int argc, const char* const* argv);

}  // namespace accudrive::cli
