#pragma once

#include "schauder/operator_model.hpp"
#include "schauder/truncated_solver.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace schauder {

/// Malformed or inconsistent experiment configuration (CLI exit status 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Missing manifest, missing output or checksum mismatch in a run directory.
class ChecksumError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline const std::vector<std::string> kExperimentKinds{"check-hypotheses", "solve", "smoothing", "schauder",
                                                       "mollify-study"};
inline const std::vector<std::string> kPresets{"heat-1d", "ou-1d", "sect4-example-continuous",
                                               "sect4-example-measurable", "two-stage-heat"};

struct SmoothingPair {
  double alpha = 0.0;
  double beta = 1.0;
  double tol = 0.15;       ///< allowed |exponent - (beta - alpha)/2|
  nlohmann::json datum;    ///< null uses the config datum
  bool operator==(const SmoothingPair&) const = default;
};

/// One experiment. Operator, datum and source stay in their JSON form so a
/// config round-trips exactly; they are resolved when the run starts.
struct ExperimentConfig {
  std::string kind = "solve";
  std::string preset;            ///< empty when built from scratch
  nlohmann::json op;             ///< inline operator document, preset name or file path
  nlohmann::json datum = {{"kind", "gaussian"}};
  nlohmann::json source = nlohmann::json::array();

  double h = 1.0 / 32.0;
  double tau = 1e-2;
  double s = 0.0;
  double t_end = 1.0;
  std::vector<double> radii{4.0, 8.0, 16.0, 32.0, 64.0};
  double tol = 1e-4;
  std::string scheme = "backward_euler";
  double r_eval = 2.0;
  std::vector<double> output_times;

  // check-hypotheses
  double box_radius = 4.0;
  int space_samples = 33;
  int time_samples = 9;

  // smoothing
  std::vector<SmoothingPair> pairs;
  std::vector<double> ladder;
  bool bernstein = true;
  double bernstein_n = 8.0;
  nlohmann::json bernstein_datum = {{"kind", "gaussian"}};

  // schauder
  double theta = 0.5;
  double refinement_tol = 0.1;

  // mollify-study
  std::vector<double> n_ladder{4.0, 16.0, 64.0, 256.0};
  double mollify_tol = 1e-2;
  /// Also require residual <= 10 (tau + h^2) for the last member. Off by default:
  /// against the unmollified operator the residual only vanishes as n grows.
  bool residual_bound = false;
  std::string oracle;  ///< "composed_gaussian" or empty

  std::filesystem::path out = "runs/latest";
  std::uint64_t seed = 7;

  bool operator==(const ExperimentConfig&) const = default;
};

nlohmann::json config_to_json(const ExperimentConfig& c);
/// Rejects unknown keys, wrong types and unknown kinds with ConfigError.
/// A "preset" key starts from that preset and the remaining keys override it.
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Bundled preset configured for `kind` (empty kind keeps the preset's own default).
ExperimentConfig preset_config(const std::string& name, const std::string& kind = "");
/// Operator document of a preset.
nlohmann::json preset_operator(const std::string& name);

/// Operator named by a config: inline document, preset name or JSON file path.
OperatorSpec resolve_operator(const nlohmann::json& ref);

/// Data specs: {"kind": "zero" | "constant" | "gaussian" | "tanh" | "kink" | "sine", ...}.
Datum datum_from_json(const nlohmann::json& j);
/// Source spec: array of {"profile": <time profile>, "field": <datum spec>}.
Source source_from_json(const nlohmann::json& j);

struct StageStatus {
  std::string name;
  bool pass = true;
  std::string detail;
};

struct OutputFile {
  std::string path;  ///< relative to the run directory
  std::string sha256;
  std::uintmax_t bytes = 0;
};

struct RunManifest {
  std::string config_hash;
  nlohmann::json versions;
  double wall_clock = 0.0;
  std::vector<StageStatus> stages;
  std::vector<OutputFile> outputs;
  bool pass = true;

  [[nodiscard]] nlohmann::json to_json() const;
  static RunManifest from_json(const nlohmann::json& j);
};

inline constexpr const char* kManifestName = "manifest.json";
inline constexpr const char* kRunMarker = ".schauder-run";

std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::filesystem::path& path);

/// Executes the experiment into c.out (cleared first when it holds an earlier
/// run, refused when it holds anything else), then writes the manifest
/// atomically. Numerical failures are recorded as failed stages with a row in
/// diagnostics.csv; ConfigError propagates.
RunManifest run(const ExperimentConfig& c);

/// Verifies checksums, then writes SVG plots and summary.txt into the run
/// directory. Returns the files written.
std::vector<std::filesystem::path> report(const std::filesystem::path& run_dir);

}  // namespace schauder
