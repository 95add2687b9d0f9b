#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fsens/divergence.hpp"
#include "fsens/effects.hpp"
#include "fsens/estimator.hpp"
#include "fsens/sensitivity.hpp"
#include "fsens/simulation.hpp"

namespace fsens::io {

using json = nlohmann::json;

// Everything a command can be configured with. Loaded from one JSON
// document; command-line flags are applied on top. Unknown keys are
// rejected so that typos cannot silently fall back to defaults.
struct RunConfig {
  std::string divergence = "kl";
  std::optional<double> k;  // Cressie-Read index
  std::optional<double> rho;
  std::vector<double> rho_grid;
  std::string target = "mu10_lower";
  std::string effect = "atc";
  double level = 0.95;
  double threshold = 0.0;
  double eps = 1e-3;
  double clip = 0.01;
  std::uint64_t seed = 1;
  int folds = 3;  // fixed; present so configs can state it
  est::SieveSettings sieve;
  nuisance::RegressorSpec regressor;
  long dgp_n = 15000;
  double dgp_delta = 0.5;
  double dgp_sigma_coef = 1.25;
  std::uint64_t dgp_seed = 1;
  std::string data;  // dataset CSV path
  std::string output_dir = ".";
  int threads = 0;   // 0: OpenMP default
  std::string figure;
  std::string scale = "desk";

  // Throws ConfigError on unknown keys or mistyped values.
  static RunConfig from_json(const json& j);
  json to_json() const;
  // Checks the values a command relies on; throws ConfigError.
  void validate(const std::string& command) const;

  Divergence divergence_spec() const;
  est::EstimatorConfig estimator() const;
  sim::DgpConfig dgp() const;
};

RunConfig load_config(const std::filesystem::path& path);

// FNV-1a (64 bit) of the canonical JSON of the result-relevant settings
// (output_dir and threads excluded), as 16 hex digits.
std::string config_hash(const RunConfig& cfg);
std::string version();

// Output directory precedence: explicit flag, then FSENS_OUTPUT_DIR, then the
// config value.
std::filesystem::path resolve_output_dir(const RunConfig& cfg, const std::optional<std::string>& flag);

// Dataset CSV: header x1,...,xd,t,y (any column order), '.' decimals.
// Throws DataError naming missing columns, bad values or ragged rows.
est::Dataset read_dataset_csv(const std::filesystem::path& path);
// 17 significant digits so values round-trip exactly.
void write_dataset_csv(const std::filesystem::path& path, const est::Dataset& data);

std::string format_double(double v);
void write_text(const std::filesystem::path& path, const std::string& text);
void write_json(const std::filesystem::path& path, const json& j);
// Common sidecar fields: version, config hash, command.
json provenance(const RunConfig& cfg, const std::string& command);

// Commands. Each returns the paths it wrote.
std::vector<std::filesystem::path> cmd_simulate(const RunConfig& cfg, const std::filesystem::path& out);
std::vector<std::filesystem::path> cmd_estimate(const RunConfig& cfg, const std::filesystem::path& out);
std::vector<std::filesystem::path> cmd_curve(const RunConfig& cfg, const std::filesystem::path& out);
std::vector<std::filesystem::path> cmd_reproduce(const RunConfig& cfg, const std::filesystem::path& out);
json cmd_validate_divergence(const RunConfig& cfg);

std::string curve_csv(const sens::SensitivityCurve& curve);
const std::vector<std::string>& figure_ids();

}  // namespace fsens::io
