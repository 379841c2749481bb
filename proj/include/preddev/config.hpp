#pragma once

#include "preddev/design.hpp"
#include "preddev/expression.hpp"
#include "preddev/models.hpp"

#include <json.hpp>

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace preddev {

using Json = nlohmann::ordered_json;

struct ModelConfig {
  std::string name;                          // registry name, or the inline model's name
  std::optional<InlineModelSpec> inline_spec;
  std::map<std::string, double> fixed;       // parameters pinned to known values
};

struct ConditionConfig {
  std::string id;
  std::map<std::string, double> factors;
};

struct SeriesConfig {
  std::string observable;
  std::vector<double> times;
  int replicates = 1;
  std::optional<double> sigma;
};

/// Experiments, prediction problems, and candidates all use this shape.
struct ExperimentConfig {
  std::string id;
  std::string condition;
  std::vector<SeriesConfig> series;
};

struct SimulationConfig {
  std::optional<std::vector<double>> theta_true;  // model default when absent
  NoiseSpec noise;
  std::optional<std::uint64_t> seed;  // derived from the scenario seed when absent
};

struct DataConfig {
  std::optional<std::string> file;
  std::map<std::string, double> variances;  // per observable, for files without replicates
  std::optional<SimulationConfig> simulate;
};

struct DesignConfig {
  int rounds = 3;
  double reduction_flag = 0.95;
  double stop_reduction = 0.02;
  int stop_patience = 2;
  /// Where new data comes from: simulated at the data truth, or served from a file.
  std::optional<std::string> candidate_file;
};

struct CoverageConfig {
  int trials = 200;
};

struct Lemma1Config {
  std::vector<std::string> distributions{"normal", "uniform"};
  std::vector<double> xs;  // 0, 0.1, ..., 3 when empty
  std::vector<double> as;  // -3, ..., 3 when empty
  double tol = 1e-12;
};

struct OrderingConfig {
  int trials = 1000;
};

struct PropositionConfig {
  int pairs = 1000;
  std::string candidate;        // id of a declared candidate; first one when empty
  std::optional<double> eta;    // the eta rule of the scenario when absent
  double spread = 0.05;
};

struct WorstCaseConfig {
  int trials = 50;
  double min_reduction = 0.2;
  double tolerance = 0.1;
};

struct ValidationConfig {
  std::optional<CoverageConfig> coverage;
  std::optional<Lemma1Config> lemma1;
  std::optional<OrderingConfig> ordering;
  std::optional<PropositionConfig> proposition;
  std::optional<WorstCaseConfig> worst_case;
};

/// A complete scenario. Parsing fills every default, so serializing a
/// parsed config and parsing it again gives the same config.
struct ScenarioConfig {
  std::string name;
  std::uint64_t seed = 0;
  std::vector<std::string> stages;
  ModelConfig model;
  std::optional<ParameterSpace> parameters;  // model default when absent
  std::vector<ConditionConfig> conditions;
  std::vector<ExperimentConfig> experiments;
  std::vector<ExperimentConfig> predictions;
  std::vector<ExperimentConfig> candidates;
  DataConfig data;
  BootstrapOptions bootstrap;  // includes the fit options
  DeviationOptions deviation;
  EtaOptions eta;
  DesignConfig design;
  ValidationConfig validation;
};

/// Stage names in execution order.
const std::vector<std::string>& pipeline_stages();

/// Expands `{"start", "stop", "step"}` or `{"start", "stop", "count"}` grids.
std::vector<double> parse_times(const Json& j);

ScenarioConfig parse_config(const Json& j);
ScenarioConfig load_config(const std::string& path);
Json to_json(const ScenarioConfig& config);

/// The model, box, and conditions a config refers to, ready to use.
struct ResolvedScenario {
  ModelSystem model;
  ParameterSpace space;
  Vector default_theta;  // empty when the model has none
  std::vector<Experiment> experiments;
  std::vector<PredictionProblem> predictions;
  std::vector<Experiment> candidates;
};

ResolvedScenario resolve(const ScenarioConfig& config);

/// Truth for simulated data: the configured vector or the model default.
Vector truth(const ScenarioConfig& config, const ResolvedScenario& scenario);

DesignSettings design_settings(const ScenarioConfig& config);

}  // namespace preddev
