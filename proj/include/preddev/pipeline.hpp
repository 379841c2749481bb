#pragma once

#include "preddev/config.hpp"

#include <optional>
#include <string>
#include <vector>

namespace preddev {

inline constexpr const char* kVersion = "0.1.0";

struct StageFailure {
  std::string stage;
  std::string kind;  // "config", "data", "solver"
  std::string message;
  int exit_code = 1;
};

struct PipelineOutcome {
  Json report;
  Dataset data;  // the data the fit stages used (empty when none was needed)
  std::optional<StageFailure> failure;
};

/// Runs `stages` (the config's own list when empty) plus the stages they
/// depend on, in order. A failing stage ends the run; everything finished
/// before it stays in the report next to a failure record.
PipelineOutcome run_pipeline(const ScenarioConfig& config, std::vector<std::string> stages = {});

/// Writes one CSV per plot table of the report plus manifest.json listing
/// them. Returns the written file names.
std::vector<std::string> emit_plot_data(const Json& report, const std::string& out_dir);

/// Maps an exception to the failure kind and exit code of the command line.
StageFailure classify(const std::string& stage, const std::exception& e);

/// JSON view of the main result types.
Json to_json(const FitResult& fit, const ParameterSpace& space);
Json to_json(const DeviationResult& dev, const ParameterSpace& space);
Json to_json(const ImpactEstimate& est, const ParameterSpace& space);

}  // namespace preddev
