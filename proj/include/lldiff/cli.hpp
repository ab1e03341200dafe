#pragma once

namespace lldiff {

// Batch entry point: stats | simulate | glyphs | train | infer | eval |
// eval-text. Returns the process exit code: 0 success, 1 usage error,
// 2 I/O error, 3 numeric/training failure.
int run_cli(int argc, const char* const* argv);

}  // namespace lldiff
