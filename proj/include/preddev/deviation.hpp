#pragma once

#include "preddev/data.hpp"
#include "preddev/estimation.hpp"
#include "preddev/objectives.hpp"
#include "preddev/optimize.hpp"
#include "preddev/parameters.hpp"

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace preddev {

struct DeviationOptions {
  int restarts = 20;
  double walk_step = 0.02;      // relative step of the feasible random walk
  double walk_floor = 1e-6;     // absolute floor on linear-scale steps
  int walk_steps = 100;         // accepted steps per restart
  int walk_attempts = 4000;     // proposal cap per restart
  int anchor_pairs = 5;         // warm starts drawn from fit restart endpoints
  BarrierOptions barrier;
  Tolerances barrier_tol = Tolerances::barrier();
  Tolerances polish_tol = Tolerances::fitting();
  double feasibility_tol = 1e-6;
  double no_deviation_tol = 1e-10;
};

struct PairRestart {
  bool warm = false;
  Vector start1, start2;
  Vector theta1, theta2;
  double value = 0.0;
  bool feasible = false;
  int walk_accepted = 0;
  int outer_iterations = 0;
  int inner_iterations = 0;
  std::string reason;
};

struct DeviationResult {
  Vector theta1, theta2;
  double value = 0.0;         // z_dev on the prediction problems
  double z_upper = 0.0;
  double fit1 = 0.0, fit2 = 0.0;
  double residual1 = 0.0, residual2 = 0.0;  // max(z_fit - z_u, 0)
  bool no_deviation = false;
  std::vector<PairRestart> restarts;
  int best_restart = -1;
};

struct ImpactEstimate : DeviationResult {
  std::string candidate_id;
  double eta = 0.0;                // effective bound on the candidate deviation
  double candidate_value = 0.0;    // z_dev on the candidate
  std::size_t candidate_observations = 0;
  bool failed = false;
  std::string error;
};

/// Weighted squared trajectory difference on the prediction problems.
/// Every series needs a sigma. +inf when an integration fails.
double z_dev(const ModelSystem& model, const Vector& theta1, const Vector& theta2,
             const std::vector<PredictionProblem>& problems, const Tolerances& tol = Tolerances::fitting());

/// The pair problem over (theta1, theta2): maximize z_dev on the prediction
/// block subject to both fit errors <= z_u and, optionally, the candidate
/// deviation <= eta. Internal coordinates stack both parameter vectors.
class PairProblem {
 public:
  PairProblem(const ModelSystem& model, const ParameterSpace& space, const std::vector<Experiment>& experiments,
              const Dataset& data, const std::vector<PredictionProblem>& problems, const Vector& theta_star,
              double z_upper, const std::optional<Experiment>& candidate = std::nullopt, double eta = 0.0);

  /// Objective -z_dev and constraints z_u - z_fit(theta_i) [, eta - z_dev(P')].
  ConstrainedEvaluation evaluate(const Vector& U, int order, const Tolerances& tol) const;
  bool strictly_feasible(const Vector& U, const Tolerances& tol) const;

  struct Values {
    double deviation, fit1, fit2, candidate;
  };
  /// Plain values at a pair; +inf entries when integration fails.
  Values values(const Vector& theta1, const Vector& theta2, const Tolerances& tol) const;

  Vector stack(const Vector& theta1, const Vector& theta2) const;
  std::pair<Vector, Vector> unstack(const Vector& U) const;
  Vector center() const { return center_; }

  /// Largest step from the center toward U that stays strictly feasible.
  Vector project(const Vector& U, const Tolerances& tol) const;
  /// Gaussian random walk from the center rejecting infeasible proposals.
  Vector walk(Rng& rng, const DeviationOptions& options, int* accepted = nullptr) const;

  /// One barrier solve from a strictly feasible start.
  PairRestart solve(const Vector& U0, const DeviationOptions& options) const;

  const ParameterSpace& space() const { return space_; }
  bool has_candidate() const { return candidate_block_ >= 0; }
  double eta() const { return eta_; }
  double z_upper() const { return z_upper_; }
  std::size_t candidate_observations() const { return candidate_observations_; }
  const Workspace& workspace() const { return ws_; }
  int prediction_block() const { return prediction_block_; }
  int fit_block() const { return fit_block_; }

 private:
  ParameterSpace space_;
  ParameterSpace pair_;
  Workspace ws_;
  int fit_block_ = 0;
  int prediction_block_ = 0;
  int candidate_block_ = -1;
  double z_upper_ = 0.0;
  double eta_ = 0.0;
  std::size_t candidate_observations_ = 0;
  Vector center_;
};

/// The `count` pairs among `points` with the largest prediction deviation,
/// using only points whose fit error is below z_u. Points are typically the
/// endpoints of the multistart fit, which spread along flat valleys of the
/// fit error where random walks from the best fit do not reach.
std::vector<std::pair<Vector, Vector>> anchor_pairs(const PairProblem& problem, const std::vector<Vector>& points,
                                                    int count, const Tolerances& tol);

/// Endpoints of the converged fit restarts.
std::vector<Vector> restart_points(const FitResult& fit);

/// Best pair over warm starts (projected toward feasibility) followed by
/// `options.restarts` random-walk restarts (streams "dev.restart.k").
DeviationResult solve_pairs(const PairProblem& problem, const DeviationOptions& options, std::uint64_t seed,
                            const std::vector<std::pair<Vector, Vector>>& warm_starts = {});

/// Prediction deviation. Throws ConfigError if z_u < z_fit(theta_star).
DeviationResult solve_prediction_deviation(const ModelSystem& model, const ParameterSpace& space,
                                           const std::vector<Experiment>& experiments, const Dataset& data,
                                           const std::vector<PredictionProblem>& problems,
                                           const Vector& theta_star, double z_upper,
                                           const DeviationOptions& options, std::uint64_t seed,
                                           const std::vector<std::pair<Vector, Vector>>& warm_starts = {});

/// Estimated experiment impact: the deviation problem with the added
/// constraint z_dev(theta1, theta2; candidate) <= eta. `candidate` needs
/// sigmas (see resolve_sigmas). eta = +inf drops the constraint.
ImpactEstimate estimate_impact(const ModelSystem& model, const ParameterSpace& space,
                               const std::vector<Experiment>& experiments, const Dataset& data,
                               const std::vector<PredictionProblem>& problems, const Experiment& candidate,
                               const Vector& theta_star, double z_upper, double eta,
                               const DeviationOptions& options, std::uint64_t seed,
                               const std::vector<std::pair<Vector, Vector>>& warm_starts = {});

/// Throws ConfigError when the candidate measures an observable at a
/// condition and time that the completed experiments already cover.
void check_disjoint(const Experiment& candidate, const std::vector<Experiment>& completed);

}  // namespace preddev
