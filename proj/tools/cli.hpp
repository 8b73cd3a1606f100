#pragma once

#include <cstdint>
#include <iosfwd>

namespace ris::cli {

/// Seed used when --seed is not given.
inline constexpr std::uint64_t kDefaultSeed = 20240607;

/// Parses argv and runs one subcommand. Returns 0 on success, 1 on usage
/// errors, 2 on runtime failures.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace ris::cli
