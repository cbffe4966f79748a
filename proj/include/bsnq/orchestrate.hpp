/// @file orchestrate.hpp
/// @brief The four subcommands (steady, simulate, stability, verify) and their run directories.
///
/// Every subcommand writes manifest.json (the materialized config plus seed and thread count)
/// into the output directory. On a nonzero exit, error.json holds
/// {"subcommand", "kind", "message"[, "path"]}.
///
/// Exit codes: 0 success, 1 failed gate, 2 configuration or usage error, 3 runtime error.
#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

namespace bsnq {

enum class Subcommand { Steady, Simulate, Stability, Verify };

/// Throws InvalidArgument on an unknown name.
Subcommand parse_subcommand(const std::string& name);
std::string to_string(Subcommand c);

struct Overrides {
    std::optional<std::filesystem::path> config;  ///< required except for verify
    std::optional<std::filesystem::path> out;     ///< overrides output.dir
    std::optional<std::uint64_t> seed;            ///< overrides seed
    int threads = 1;
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitGateFailed = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitRuntime = 3;

/// Runs one subcommand. Human-readable progress and the pass/fail table go to `report`;
/// the machine-readable error record goes to error.json and, as one line, to `err`.
int orchestrate(Subcommand cmd, const Overrides& overrides, std::ostream& report, std::ostream& err);

}  // namespace bsnq
