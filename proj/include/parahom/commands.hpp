#pragma once

// Subcommands of the command-line tool.  Each one runs an experiment from a
// resolved config, writes report.json (plus CSV/SVG files) atomically under
// <output.directory>/<command>/ and returns the exit status:
//   0 every verdict passed, 1 a verdict failed, 2 configuration error,
//   3 numerical failure.
// On a nonzero status failure.json names the first failed check or the error.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "parahom/config.hpp"
#include "parahom/error.hpp"
#include "parahom/report.hpp"

namespace parahom {

struct Check {
  std::string name;
  double value = 0.0;
  double threshold = 0.0;
  std::string relation;  // "<=", ">=", "=="
  bool pass = false;
  std::string note;
};

Check at_most(std::string name, double value, double threshold, std::string note = {});
Check at_least(std::string name, double value, double threshold, std::string note = {});
ojson to_json(const Check& c);

struct CommandOptions {
  std::optional<std::string> tensor_mode;  // overrides harness.tensor_mode
  bool write = true;                       // false: compute the report only
};

struct CommandOutcome {
  int exit_code = 0;
  ojson report;
  std::vector<Check> checks;
  std::vector<std::filesystem::path> artifacts;
  std::string error;  // message when the command threw
};

const std::vector<std::string>& command_names();

// Exit status for an error raised while loading a config or running.
int exit_code_for(ErrorCode code);

CommandOutcome run_command(const std::string& command, const ExperimentConfig& config,
                           const CommandOptions& options = {});

// The invariant suite behind `verify`: identity_checks on the configured
// coefficient (mean-zero, ellipticity, dual identities, quadratic identity
// and its refinement order) followed by degenerate_checks (constant and
// time-only coefficients of the configured dimension).
std::vector<Check> verify_checks(const ExperimentConfig& config, ojson* details = nullptr);
std::vector<Check> identity_checks(const ExperimentConfig& config, ojson* details = nullptr);
std::vector<Check> degenerate_checks(const ExperimentConfig& config);

// Writes <dir>/failure.json for an error that happened before a command
// could run (unreadable or invalid config).
void write_failure_record(const std::filesystem::path& dir, const std::string& command, int exit_code,
                          const std::string& error_code, const std::string& message);

}  // namespace parahom
