#pragma once

namespace tractoform::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

/// Subcommands: space, image, augment, synth, interpret, diffmap.
/// Returns 0 on success, 2 for usage/input errors, 1 for runtime failures.
int run(int argc, const char* const* argv);

}  // namespace tractoform::cli
