#ifndef OMCAV_CLI_HPP
#define OMCAV_CLI_HPP

// Command implementations behind the `omcavity` executable. Each command
// reads a JSON config, writes its outputs into the chosen directory, and
// returns an exit code from the stable contract below. The executable in
// tools/ is a thin argument-parsing shell around these.

#include <cstdint>
#include <filesystem>
#include <optional>

namespace omcav::cli {

// Exit codes: stable contract.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 1;          // I/O, parse, schema violations
inline constexpr int kExitDomain = 2;         // no mode / no dip / pull-in ...
inline constexpr int kExitNotConverged = 3;
inline constexpr int kExitInsufficient = 4;   // too few points / traces

struct CommonOptions {
    std::filesystem::path config;
    std::filesystem::path out_dir;           // falls back to the config's out_dir
    std::optional<std::uint64_t> seed;       // overrides the config value
    std::optional<double> snr_db;
    std::optional<double> linear_max_nd;
};

int run_modes(const CommonOptions& options);
int run_simulate(const CommonOptions& options);
int run_fit(const CommonOptions& options);
int run_tune(const CommonOptions& options);

}  // namespace omcav::cli

#endif  // OMCAV_CLI_HPP
