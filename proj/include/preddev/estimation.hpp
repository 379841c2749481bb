#pragma once

#include "preddev/data.hpp"
#include "preddev/objectives.hpp"
#include "preddev/optimize.hpp"
#include "preddev/parameters.hpp"

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

namespace preddev {

struct FitOptions {
  int restarts = 20;
  std::vector<Vector> initial_points;  // tried before the random restarts
  Tolerances tol = Tolerances::fitting();
  MinimizeOptions minimize;
};

struct RestartRecord {
  Vector start;
  Vector theta;
  double value = std::numeric_limits<double>::infinity();
  bool converged = false;
  int iterations = 0;
  std::string reason;
};

struct FitResult {
  Vector theta_star;
  double z_star = std::numeric_limits<double>::infinity();
  double z_lower = std::numeric_limits<double>::quiet_NaN();
  double z_upper = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> bootstrap_sample;  // sorted
  int bootstrap_discarded = 0;
  std::vector<RestartRecord> restarts;
  int best_restart = -1;

  bool has_interval() const { return z_upper == z_upper; }
};

/// Fit error of a fixed set of experiments and data as a function of the
/// parameters, in theta space or in the internal coordinates of a box.
class FitProblem {
 public:
  FitProblem(const ModelSystem& model, const ParameterSpace& space, const std::vector<Experiment>& experiments,
             const Dataset& data);

  /// z_fit and its derivatives with respect to theta; +inf on integration failure.
  Derivatives at_theta(const Vector& theta, int order, const Tolerances& tol = Tolerances::fitting()) const;
  /// Same in internal coordinates; +inf outside the box.
  Derivatives at_internal(const Vector& u, int order, const Tolerances& tol = Tolerances::fitting()) const;

  /// Local minimization from theta0.
  RestartRecord refine(const Vector& theta0, const FitOptions& options) const;

  const ParameterSpace& space() const { return space_; }
  const Workspace& workspace() const { return ws_; }
  Workspace& workspace() { return ws_; }
  int block() const { return block_; }
  std::size_t observation_count() const;

 private:
  ParameterSpace space_;
  Workspace ws_;
  int block_ = 0;
};

/// Weighted squared error, replicates as separate terms. +inf when the
/// integration fails.
double z_fit(const ModelSystem& model, const Vector& theta, const std::vector<Experiment>& experiments,
             const Dataset& data, const Tolerances& tol = Tolerances::fitting());

/// Best local minimum over `options.initial_points` followed by `restarts`
/// log-uniform starts drawn from the box (stream "fit.restart.k"). Throws SolverError when no restart converges.
FitResult fit(const ModelSystem& model, const ParameterSpace& space, const std::vector<Experiment>& experiments,
              const Dataset& data, const FitOptions& options, std::uint64_t seed);

enum class BootstrapMode { Auto, Replicates, Residuals };

BootstrapMode parse_bootstrap_mode(const std::string& s);
const char* to_string(BootstrapMode m);

struct BootstrapOptions {
  int samples = 200;
  double alpha = 0.05;
  BootstrapMode mode = BootstrapMode::Auto;
  FitOptions fit;
};

struct BootstrapResult {
  double lower = 0.0;
  double upper = 0.0;
  std::vector<double> sample;  // sorted best-fit errors of the kept resamples
  int discarded = 0;
  BootstrapMode mode = BootstrapMode::Replicates;
};

/// Order statistic at level q: sorted[ceil(q n) - 1], clamped to the range.
double percentile(const std::vector<double>& sorted, double q);

/// Percentile interval of the resampled best-fit error. Replicate mode
/// resamples within each (condition, observable, time) cell, residual mode
/// resamples pooled residuals around the fitted values; Auto picks
/// replicates when every cell has at least two. Each refit starts at
/// theta_star (stream "boot.b").
BootstrapResult bootstrap_interval(const ModelSystem& model, const ParameterSpace& space,
                                   const std::vector<Experiment>& experiments, const Dataset& data,
                                   const Vector& theta_star, const BootstrapOptions& options, std::uint64_t seed);

/// fit followed by bootstrap_interval, stored into one FitResult.
FitResult fit_with_interval(const ModelSystem& model, const ParameterSpace& space,
                            const std::vector<Experiment>& experiments, const Dataset& data,
                            const BootstrapOptions& options, std::uint64_t seed);

}  // namespace preddev
