#ifndef TILTFORGE_CLI_HPP
#define TILTFORGE_CLI_HPP

namespace tiltforge::cli {

/// Entry point of the batch tool; returns the process exit code
/// (0 ok, 2 I/O error, 3 validation error, 4 internal error).
int run(int argc, const char* const* argv);

} // namespace tiltforge::cli

#endif
