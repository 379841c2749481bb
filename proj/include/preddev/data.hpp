#pragma once

#include "preddev/ode.hpp"

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace preddev {

/// One observable measured (or predicted) on a time grid.
struct Series {
  std::string observable;
  std::vector<double> times;
  /// Scheduled replicates per time point. Counts toward observation totals and
  /// weights deviation terms on candidate experiments.
  int replicates = 1;
  /// Noise / deviation scale. Required for prediction problems; for observed
  /// experiments the dataset's variance is used instead.
  std::optional<double> sigma;
};

/// What was (or would be) measured: observables, their time grids, and the
/// external factors of the condition. Prediction problems and candidate
/// experiments share this shape.
struct Experiment {
  std::string id;
  ExternalFactors factors;
  std::vector<Series> series;

  /// Number of scheduled observations, replicates included.
  std::size_t observation_count() const;
};

using PredictionProblem = Experiment;

std::size_t observation_count(const std::vector<Experiment>& experiments);

/// Replicated observations of one observable at one condition.
struct ObservedSeries {
  std::string condition_id;
  std::string observable;
  std::vector<double> times;
  std::vector<std::vector<double>> replicates;  // replicates[k] holds values at times[k]
  std::optional<double> variance;

  std::size_t observation_count() const;
};

struct Dataset {
  std::vector<ObservedSeries> series;

  const ObservedSeries* find(const std::string& condition_id, const std::string& observable) const;
  ObservedSeries* find(const std::string& condition_id, const std::string& observable);
  std::size_t observation_count() const;

  /// Appends every series of `other`; a (condition, observable) pair already
  /// present gets the new time points merged in.
  void merge(const Dataset& other);
  /// Throws unless every series has a positive variance and >=1 replicate per time.
  void validate() const;
};

/// Mean over time points of the unbiased sample variance across replicates.
/// Throws if any time point has fewer than two replicates or the result is 0.
double estimate_noise(const ObservedSeries& s);

/// Fills in every missing variance of `data` via estimate_noise. Series whose
/// variance is already set are left alone.
void estimate_missing_variances(Dataset& data);

/// Restricts `data` to the series named by `experiments` (matching condition
/// and observable, times must be present). Throws on a missing observation.
Dataset select(const Dataset& data, const std::vector<Experiment>& experiments);

}  // namespace preddev
