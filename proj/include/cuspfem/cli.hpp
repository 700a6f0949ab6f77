#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>

namespace cuspfem::cli {

enum class Command { Solve, TraceSvd, Decompose, TraceNorm, Convergence };

std::string to_string(Command command);
Command parse_command(const std::string& name);

struct RunConfig {
    Command command = Command::Solve;
    std::filesystem::path config_path;
    std::filesystem::path output_dir = ".";
    std::uint64_t seed = 0;
    bool quiet = false;
    int threads = 1;
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitAssertion = 3;

/// Runs one subcommand: reads and validates the config, computes, writes the
/// command's CSV/JSON outputs plus manifest.json into output_dir.  Progress and
/// error messages go to `log`.
int run(const RunConfig& config, std::ostream& log);

/// Hex SHA-256 of a byte string.
std::string sha256_hex(const std::string& bytes);

}  // namespace cuspfem::cli
