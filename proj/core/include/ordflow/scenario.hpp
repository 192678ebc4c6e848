#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ordflow/grid.hpp"
#include "ordflow/velocity.hpp"

namespace ordflow {

inline constexpr int kScenarioSchemaVersion = 1;

// Process exit statuses of a scenario run.
enum ExitStatus : int { exit_ok = 0, exit_check_failed = 1, exit_config = 2, exit_guard = 3 };

struct GridSpec {
  Point lower;
  Point upper;
  std::vector<std::size_t> counts;  // may be empty for burgers-selection
  Grid build() const;
};

struct TimeSpec {
  double start = 0.0;
  double end = 1.0;
  std::size_t slices = 10;
  // start + k (end - start) / slices for k = 0..slices.
  std::vector<double> times() const;
};

struct UserGridSpec {
  GridSpec grid;
  std::vector<double> times;
  std::vector<double> values;  // slice-major, then node, then component
  std::string interpolation = "hold";
};

struct ScenarioConfig {
  int version = kScenarioSchemaVersion;
  std::string kind;
  std::string field;
  FieldParams field_params;
  std::optional<UserGridSpec> user_grid;
  std::string nonlinearity;
  FieldParams nonlinearity_params;
  std::optional<GridSpec> grid;
  TimeSpec time;
  std::vector<double> eps_schedule;
  std::vector<double> dt_schedule;
  std::vector<std::size_t> n_schedule;
  std::uint64_t seed = 0;
  std::string output;
  std::string side = "lower";
  FieldParams options;  // kind-specific numeric options

  double option(const std::string& key, double fallback) const;
  std::vector<double> option_list(const std::string& key, std::vector<double> fallback) const;
};

const std::vector<std::string>& scenario_kinds();

// Parses and validates a JSON scenario; throws ConfigError on any schema problem.
ScenarioConfig parse_scenario(std::string_view json_text);

// Field named by the config, including user-grid fields.
FieldPtr build_field(const ScenarioConfig& config);

struct CheckResult {
  std::string name;
  bool passed = false;
  double measured = 0.0;
  double threshold = 0.0;
  std::string detail;
};

struct ScenarioOutput {
  std::vector<std::pair<std::string, std::string>> files;  // name, contents
  std::vector<CheckResult> checks;
  bool passed() const;
};

// Runs the computation without touching the filesystem.
ScenarioOutput execute_scenario(const ScenarioConfig& config);

struct FileRecord {
  std::string path;  // relative to the manifest directory
  std::uintmax_t bytes = 0;
  std::string sha256;
};

struct RunManifest {
  std::string version;
  std::string config_path;
  std::string config_sha256;
  std::string kind;
  std::uint64_t seed = 0;
  std::size_t workers = 0;
  double wall_seconds = 0.0;
  int exit_code = 0;
  std::string status;  // pass, fail, guard
  std::string error;
  std::vector<CheckResult> checks;
  std::vector<FileRecord> files;

  std::string to_json() const;
  static RunManifest from_json(std::string_view text);
};

struct RunOutcome {
  int exit_code = exit_ok;
  std::filesystem::path output_dir;
  std::optional<RunManifest> manifest;
  std::string message;
};

// Reads the config once, hashes exactly those bytes, runs, and writes CSV files plus
// manifest.json. Schema errors write nothing.
RunOutcome run_scenario(const std::filesystem::path& config_path,
                        const std::optional<std::filesystem::path>& output_override = std::nullopt);

struct ManifestCheck {
  bool ok = false;
  std::vector<std::string> problems;
  RunManifest manifest;
};

// Re-hashes the config and every listed file.
ManifestCheck check_manifest(const std::filesystem::path& manifest_path);

std::string sha256_hex(std::string_view bytes);
std::string library_version();
std::string format_catalog(const std::vector<CatalogEntry>& entries);

}  // namespace ordflow
