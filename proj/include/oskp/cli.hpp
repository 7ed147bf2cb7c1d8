#pragma once

/**
 * Command-line front end: paper generation, evaluation runs, training, and
 * report emission. Every command writes a manifest of its resolved
 * parameters next to (or inside) its output before any result bytes, and
 * is bytewise reproducible from (inputs, seed).
 */

namespace oskp::cli {

/// Exit codes: 0 success, 2 usage error, 1 runtime failure.
int execute(int argc, const char* const* argv);

}  // namespace oskp::cli
