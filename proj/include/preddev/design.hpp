#pragma once

#include "preddev/deviation.hpp"
#include "preddev/estimation.hpp"
#include "preddev/models.hpp"

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace preddev {

enum class EtaMode { Ratio, ChiSquare, Fixed };

EtaMode parse_eta_mode(const std::string& s);
const char* to_string(EtaMode m);

struct EtaOptions {
  EtaMode mode = EtaMode::Ratio;
  double multiplier = 1.0;  // 1 as printed in the closeness constraint, 4 for the derived bound
  double alpha = 0.05;      // chi-square mode
  double fixed = 1.0;       // fixed mode
};

/// eta for a candidate with `candidate_count` scheduled observations after
/// `completed_count` observations with bootstrap bound z_u:
/// ratio z_u |P'| / |P|, the (1 - alpha) chi-square quantile with |P'|
/// degrees of freedom, or a fixed value; times the multiplier. 0 when |P'| = 0.
double eta_default(double z_upper, std::size_t candidate_count, std::size_t completed_count,
                   const EtaOptions& options = {});
double eta_default(double z_upper, const Experiment& candidate, const std::vector<Experiment>& completed,
                   const EtaOptions& options = {});

struct DesignSettings {
  BootstrapOptions bootstrap;
  DeviationOptions deviation;
  EtaOptions eta;
  double reduction_flag = 0.95;  // flag candidates with value < flag * current deviation
  double stop_reduction = 0.02;  // sequential stop: best predicted reduction below this ...
  int stop_patience = 2;         // ... for this many consecutive rounds
};

/// Everything known after the completed experiments: fit, bootstrap bound,
/// and the prediction deviation.
class DesignContext {
 public:
  static DesignContext build(const ModelSystem& model, const ParameterSpace& space,
                             std::vector<Experiment> experiments, Dataset data,
                             const std::vector<PredictionProblem>& problems, const DesignSettings& settings,
                             std::uint64_t seed);

  /// Same, reusing a fit that already carries its bootstrap interval.
  static DesignContext from_fit(const ModelSystem& model, const ParameterSpace& space,
                                std::vector<Experiment> experiments, Dataset data,
                                const std::vector<PredictionProblem>& problems, const DesignSettings& settings,
                                std::uint64_t seed, FitResult fitted);

  /// Estimated impact of one candidate, warm-started from the deviation
  /// pair. If the solve finds a pair that beats the stored deviation (it is
  /// feasible for the deviation problem too), the deviation is re-solved
  /// from that pair so the stored value stays an upper bound.
  ImpactEstimate impact(const Experiment& candidate);

  /// Refit, re-bootstrap, and re-solve the deviation with the candidate's data added.
  DesignContext extend(const Experiment& candidate, const Dataset& new_data) const;

  const ModelSystem& model() const { return model_; }
  const ParameterSpace& space() const { return space_; }
  const std::vector<Experiment>& experiments() const { return experiments_; }
  const Dataset& data() const { return data_; }
  const std::vector<PredictionProblem>& problems() const { return problems_; }
  const DesignSettings& settings() const { return settings_; }
  std::uint64_t seed() const { return seed_; }
  const FitResult& fit() const { return fit_; }
  const DeviationResult& deviation() const { return deviation_; }
  std::size_t observation_count() const { return observation_count_; }
  int reconciliations() const { return reconciliations_; }

 private:
  ModelSystem model_;
  ParameterSpace space_;
  std::vector<Experiment> experiments_;
  Dataset data_;
  std::vector<PredictionProblem> problems_;
  DesignSettings settings_;
  std::uint64_t seed_ = 0;
  FitResult fit_;
  DeviationResult deviation_;
  std::vector<std::pair<Vector, Vector>> anchors_;
  std::size_t observation_count_ = 0;
  int reconciliations_ = 0;
};

struct RankedCandidate {
  ImpactEstimate estimate;
  std::size_t declaration_index = 0;
  bool predicted_reduction = false;
};

/// Ascending by estimated value; exact ties go to fewer observations, then
/// declaration order. Failed candidates are kept, after all others.
std::vector<RankedCandidate> rank_candidates(DesignContext& context, const std::vector<Experiment>& candidates);

/// Supplies observations for a chosen candidate.
class DataSource {
 public:
  virtual ~DataSource() = default;
  virtual Dataset acquire(const Experiment& candidate) = 0;
};

/// Draws candidate data from the model at a designated truth; each
/// candidate's noise comes from its own stream, so repeated requests agree.
class SimulatedSource : public DataSource {
 public:
  SimulatedSource(ModelSystem model, Vector theta_true, NoiseSpec noise, std::uint64_t seed);
  Dataset acquire(const Experiment& candidate) override;

 private:
  ModelSystem model_;
  Vector theta_true_;
  NoiseSpec noise_;
  std::uint64_t seed_;
};

/// Serves candidate data from a pre-collected dataset.
class DatasetSource : public DataSource {
 public:
  explicit DatasetSource(Dataset data);
  Dataset acquire(const Experiment& candidate) override;

 private:
  Dataset data_;
};

struct DesignRound {
  int round = 0;
  std::vector<RankedCandidate> ranking;
  std::string chosen;
  double deviation_before = 0.0;
  double predicted = 0.0;
  double deviation_after = 0.0;
  double change = 0.0;  // deviation_after - deviation_before
  double z_upper = 0.0;
  Vector theta_star;
  DeviationResult deviation;
  bool failed = false;
  std::string error;
};

struct DesignTrace {
  std::vector<DesignRound> rounds;
  std::string stop_reason;
};

/// Greedy loop: rank, pick the best, acquire its data, recompute, repeat.
/// `context` is advanced to the state after the last completed round.
DesignTrace sequential_design(DesignContext& context, std::vector<Experiment> candidates, DataSource& source,
                              int rounds);

/// Prediction deviation after adding the candidate's data.
DeviationResult actual_impact(const DesignContext& context, const Experiment& candidate, const Dataset& new_data);

}  // namespace preddev
