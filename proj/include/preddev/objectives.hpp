#pragma once

#include "preddev/data.hpp"
#include "preddev/ode.hpp"
#include "preddev/optimize.hpp"

#include <optional>
#include <vector>

namespace preddev {

/// One squared, noise-normalized residual or deviation term.
struct Term {
  int condition = 0;
  double time = 0.0;
  int time_index = -1;
  Vector weights;            // observable as a linear map of the state
  double inv_sigma = 1.0;
  double multiplicity = 1.0; // deviation terms only
  std::vector<double> targets; // fit terms only: replicate values
};

using Simulation = std::vector<Trajectory>;  // indexed by condition; empty when not simulated

/// Owns the distinct conditions of a problem, the union time grid per
/// condition, and blocks of fit / deviation terms referring to them.
/// Every condition is integrated once per parameter vector no matter how
/// many terms read from it.
class Workspace {
 public:
  explicit Workspace(ModelSystem model);

  /// Fit terms for `experiments` against `data` (one term per replicate group).
  int add_fit(const std::vector<Experiment>& experiments, const Dataset& data);
  /// Deviation terms for `problems`; every series must carry a sigma.
  int add_deviation(const std::vector<Experiment>& problems);

  const ModelSystem& model() const { return model_; }
  std::size_t condition_count() const { return factors_.size(); }
  const std::vector<int>& conditions_of(int block) const { return block_conditions_[static_cast<std::size_t>(block)]; }
  std::vector<int> conditions_of(std::initializer_list<int> blocks) const;

  /// Integrates the listed conditions (all when `conditions` is null).
  /// Returns nullopt when any integration fails.
  std::optional<Simulation> simulate(const Vector& theta, const Tolerances& tol, int order,
                                     const std::vector<int>* conditions = nullptr) const;

  Derivatives fit_error(int block, const Simulation& sim, int order) const;
  /// Derivatives with respect to the stacked vector (theta1, theta2).
  Derivatives deviation(int block, const Simulation& first, const Simulation& second, int order) const;

  /// Observable values of every term of a block, in term order.
  std::vector<double> observe(int block, const Simulation& sim) const;
  const std::vector<Term>& terms(int block) const { return blocks_[static_cast<std::size_t>(block)]; }
  /// Replaces the replicate values of every fit term of a block, in term order.
  void set_targets(int block, const std::vector<std::vector<double>>& targets);

 private:
  int condition(const ExternalFactors& nu);
  void add_times(int cond, const std::vector<double>& times);
  void resolve();

  ModelSystem model_;
  std::vector<ExternalFactors> factors_;
  std::vector<Vector> bound_;
  std::vector<std::vector<double>> grids_;
  std::vector<std::vector<Term>> blocks_;
  std::vector<std::vector<int>> block_conditions_;
};

/// Fills in missing series sigmas: the dataset variance of the same
/// (condition, observable) when present, else the mean variance of that
/// observable over observed conditions. Throws when neither exists.
std::vector<Experiment> resolve_sigmas(std::vector<Experiment> experiments, const Dataset& data);

}  // namespace preddev
