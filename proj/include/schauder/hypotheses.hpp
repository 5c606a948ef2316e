#pragma once

#include "schauder/operator_model.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace schauder {

enum class Verdict { Pass, Fail, Indeterminate };
std::string to_string(Verdict v);
Verdict verdict_from_string(const std::string& s);

struct Witness {
  double t = 0.0;
  std::vector<double> x;
  std::vector<double> xi;
};

struct ConditionRecord {
  std::string id;
  Verdict verdict = Verdict::Pass;
  std::map<std::string, double> constants;
  Witness witness;
  double margin = 0.0;
  std::string note;
};

struct HypothesisReport {
  std::vector<ConditionRecord> conditions;
  nlohmann::json sampling;

  [[nodiscard]] bool all_pass() const;
  [[nodiscard]] const ConditionRecord& find(const std::string& id) const;
  [[nodiscard]] const ConditionRecord* try_find(const std::string& id) const;

  [[nodiscard]] nlohmann::json to_json() const;
  static HypothesisReport from_json(const nlohmann::json& j);
  /// One row per condition.
  void write_csv(const std::filesystem::path& path) const;
};

struct HypothesisOptions {
  double box_radius = 4.0;
  int space_samples = 33;  ///< per axis, >= 8
  int time_samples = 9;
  /// Positive floor for rho so that the compatibility inequality stays meaningful.
  double rho_floor = 1e-3;
  double growth_tolerance = 0.05;  ///< allowed relative ratio growth on box doubling
  double inflation = 1.1;          ///< safety factor on fitted constants
  /// Earlier report on the same operator: its failures and witnesses are kept.
  std::optional<HypothesisReport> previous;
};

/// Machine check of ellipticity, growth, potential, derivative, compatibility and
/// Lyapunov conditions over [0,T] x B(0, R) and [0,T] x B(0, 2R).
HypothesisReport check_hypotheses(const OperatorSpec& op, const HypothesisOptions& opts = {});

}  // namespace schauder
