#pragma once

#include <iosfwd>

namespace dclnas {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

// Subcommands: pretrain, search, eval-predictor, gen-synthetic, export.
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace dclnas
