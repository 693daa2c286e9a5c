#pragma once

// Subcommands behind the hqsat executable. Each command writes into its own
// subdirectory of the output directory and always leaves a manifest.json.

#include "hqsat/config.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace hqsat {

enum ExitCode : int { kExitOk = 0, kExitConfig = 2, kExitNumerical = 3, kExitSelfCheck = 4 };

inline constexpr const char* kToolVersion = "0.3.0";

struct CliOptions {
    std::string command;                  ///< gen | fit | sweep | gradcheck | report
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<int> jobs;
    std::optional<std::string> method;    ///< fit only
    std::optional<std::string> data;      ///< fit only
    bool no_timestamp = false;
};

struct GradcheckRow {
    std::vector<int> arch;
    std::size_t parameters = 0;
    double max_rel_error = 0.0;
};

struct GradcheckHooks {
    bool flip_sign = false; ///< negate the analytic gradient (mutation test)
};

/// Central differences against backpropagation for the fixed architecture
/// matrix {[3,8,2,8,3], [1,4,1,4,1], [3,16,8,2,8,16,3]}.
std::vector<GradcheckRow> gradcheck_matrix(const GradcheckHooks& hooks = {});
inline constexpr double kGradcheckTolerance = 1e-4;

/// Runs one command; messages go to `log`. Returns the process exit code.
int run_command(const CliOptions& opts, std::ostream& log, const GradcheckHooks& hooks = {});

/// argv front end (CLI11).
int run_cli(int argc, char** argv);

}  // namespace hqsat
