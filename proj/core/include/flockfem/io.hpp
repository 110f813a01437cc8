#pragma once

// Configuration parsing and deterministic file output.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "flockfem/diagnostics.hpp"
#include "flockfem/scenarios.hpp"

namespace flockfem {

enum class Command { Simulate, Compare, Converge, Check };

std::string to_string(Command c);
Command parse_command(const std::string& name);

struct RunConfig {
  Command command = Command::Simulate;
  ScenarioSpec scenario;
  SweepConfig sweep;  // used by converge
  double entropy_c_param = 1.0;
  std::filesystem::path output_dir = "flockfem_out";
  /// Canonical JSON of every resolved parameter (sorted keys, no output_dir).
  std::string resolved_json;
  /// FNV-1a 64 of resolved_json, 16 hex digits.
  std::string config_hash;
};

/// Reads and validates a JSON config for `command`. A "command" key in the
/// file, when present, must agree. Relative paths inside the file resolve
/// against its directory. Throws ConfigError (with line/column or the field
/// name) and CflViolation when cfl_strict is set and k exceeds the guard.
RunConfig parse_config(const std::filesystem::path& path, Command command);
RunConfig parse_config_text(std::string_view text, Command command,
                            const std::filesystem::path& base_dir = {});

std::uint64_t fnv1a64(std::string_view bytes);
std::string hash_hex(std::uint64_t h);

/// 17 significant digits.
std::string format_number(double v);

/// Exclusive per-directory lock; throws Error if the lock file exists.
class OutputLock {
 public:
  explicit OutputLock(const std::filesystem::path& dir);
  ~OutputLock();
  OutputLock(const OutputLock&) = delete;
  OutputLock& operator=(const OutputLock&) = delete;

 private:
  std::filesystem::path file_;
};

inline constexpr std::string_view kTimeseriesHeader =
    "t,mass,momentum,energy,v2,amplitude,e_min,e_max,rho_min,rho_phi_min,"
    "entropy_H,l1_dev,dxu_max";
inline constexpr std::string_view kSnapshotsHeader = "t,x,rho,w,u,e";
inline constexpr std::string_view kConvergenceHeader = "level,h,k,E0,E1";
inline constexpr std::string_view kDifferencesHeader =
    "t,variant_a,variant_b,sup_u,l2_u,rel_sup_u,sup_rho,l2_rho";
inline constexpr std::string_view kSmallFlockHeader =
    "t,variant,mean_abs_u,displacement";

/// Trailer lines shared by all CSV writers.
struct CsvTrailer {
  std::string config_hash;
  std::optional<RunFailure> failure;
};

std::string timeseries_csv(std::span<const DiagnosticsRecord> records,
                           const CsvTrailer& trailer);
std::string snapshots_csv(std::span<const SimState> snapshots,
                          const KernelTable& table, int per_element,
                          const CsvTrailer& trailer);
std::string convergence_csv(std::span<const SweepRow> rows,
                            const CsvTrailer& trailer);
std::string differences_csv(std::span<const PairDifference> rows,
                            const CsvTrailer& trailer);
std::string small_flock_csv(std::span<const SmallFlockMetric> rows,
                            const CsvTrailer& trailer);

/// Writes `content` to `path` in binary mode; throws Error on I/O failure.
void write_file(const std::filesystem::path& path, std::string_view content);

}  // namespace flockfem
