#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "covflow/experiments.hpp"

namespace covflow {

/// Invalid or malformed configuration; maps to its own exit code.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  std::string study;  // theory | simulate | grid | depth-rate | width-rate | joint
  std::string arch = "scaled_resnet";
  nlohmann::json scaling;  // scaling-sequence descriptor (see parse_scaling)
  std::vector<std::int64_t> n_list;
  std::vector<std::int64_t> L_list;
  std::int64_t d = 30;
  std::int64_t trials = 100;
  std::uint64_t master_seed = 42;
  double step = 1e-5;   // flow integrator step
  double tol = 1e-8;    // limit-kernel tail tolerance
  double beta = 0.5;    // shaped-ResNet skip weight
  std::optional<double> c0;  // synthetic input correlation; random pair if unset
  std::string output_dir;    // from config/flag/env, "." as last resort
  std::int64_t workers = 1;
};

/// Parses and validates a scaling descriptor:
///   {"kind":"uniform","gamma":g}
///   {"kind":"series","series":"inverse_power","p":p}
///   {"kind":"series","series":"log_damped"}
///   {"kind":"series","series":"explicit","values":[...]}
///   {"kind":"custom","table":[...]}
/// Throws ConfigError naming the offending key.
ScalingSequence parse_scaling(const nlohmann::json& j);

/// Parses a config object; unknown keys are rejected by name and defaults
/// are filled so that to_json(parse_config(x)) is stable.
RunConfig parse_config(const nlohmann::json& j);
RunConfig parse_config_file(const std::string& path);

nlohmann::json to_json(const RunConfig& config);

/// Architecture tag <-> name used in configs and CSVs.
Arch parse_arch(const std::string& name);

/// Builds the ArchConfig (sequence, beta) a study needs from the run config.
ArchConfig make_arch_config(const RunConfig& config);

/// Executes the study and writes <study>.csv, <study>.dat, manifest.json
/// into config.output_dir. Returns the process exit code:
/// 0 success, 2 configuration error, 3 instability, 1 anything else.
int run(const RunConfig& config);

}  // namespace covflow
