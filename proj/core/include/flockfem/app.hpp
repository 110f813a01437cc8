#pragma once

// Command drivers shared by the command-line tool and the tests.

#include <filesystem>
#include <optional>
#include <ostream>

#include "flockfem/io.hpp"

namespace flockfem {

/// Process exit codes.
enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 2,
  kExitRuntime = 3,
  kExitCfl = 4,
};

/// Runs an already parsed config. Writes outputs below cfg.output_dir and
/// returns the exit code; `log` receives warnings and a short summary.
int execute(const RunConfig& cfg, std::ostream& log);

/// parse_config + execute, mapping every error to its exit code.
int run_cli(Command command, const std::filesystem::path& config_path,
            const std::optional<std::filesystem::path>& output_dir,
            std::ostream& log);

}  // namespace flockfem
