#pragma once

#include "preddev/deviation.hpp"
#include "preddev/design.hpp"
#include "preddev/estimation.hpp"
#include "preddev/models.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace preddev {

/// Monte Carlo check that the deviation pair brackets the truth:
/// z_dev(theta_true, theta_i; Y) <= z_dev(theta_1, theta_2; Y), i = 1, 2.
struct CoverageSpec {
  std::string name;
  ModelSystem model;
  ParameterSpace space;
  Vector theta_true;
  NoiseSpec noise;
  std::vector<Experiment> experiments;
  std::vector<PredictionProblem> problems;
  int trials = 200;
  BootstrapOptions bootstrap;  // alpha lives here
  DeviationOptions deviation;
};

struct CoverageTrial {
  int trial = 0;
  bool excluded = false;
  std::string error;
  bool first = false;   // z_dev(theta_true, theta_1) <= deviation
  bool second = false;  // z_dev(theta_true, theta_2) <= deviation
  double deviation = 0.0;
  double true_vs_first = 0.0;
  double true_vs_second = 0.0;
  double z_star = 0.0;
  double z_upper = 0.0;
  double z_true = 0.0;        // z_fit(theta_true) on the trial data
  double z_star_fresh = 0.0;  // z_fit(theta*) on an independent realization
};

struct CoverageStudy {
  CoverageSpec spec;
  std::vector<CoverageTrial> trials;
  int used = 0;
  int excluded = 0;
  double coverage = 0.0;         // both inequalities
  double truth_feasible = 0.0;   // P(z_fit(theta_true) <= z_u)
  double fresh_bound = 0.0;      // P(z_fit(theta*; fresh data) <= z_u)
  double slack = 0.0;            // 3 sigma binomial slack at 1 - alpha
  bool valid = false;            // at most 10% exclusions
  bool passed = false;           // valid and coverage >= 1 - alpha - slack
};

/// Each trial t draws data from stream "trial.t", fits, bootstraps, and
/// solves the deviation problem. Failed trials are excluded.
CoverageStudy run_coverage_study(const CoverageSpec& spec, std::uint64_t seed);

struct Lemma1Report {
  std::string distribution;
  int checks = 0;
  int violations = 0;
  double max_excess = 0.0;  // max of F(x+a) - F(-x+a) - (F(x) - F(-x))
  bool passed = false;
};

/// F(x + a) - F(-x + a) <= F(x) - F(-x) + tol at every grid point.
Lemma1Report check_lemma1(const std::string& name, const std::function<double(double)>& cdf,
                          const std::vector<double>& xs, const std::vector<double>& as, double tol = 1e-12);
Lemma1Report check_lemma1(const NoiseSpec& noise, const std::vector<double>& xs, const std::vector<double>& as,
                          double tol = 1e-12);

struct OrderingSpec {
  ModelSystem model;
  ParameterSpace space;
  Vector theta_true;
  NoiseSpec noise;
  std::vector<Experiment> experiments;
  int trials = 1000;
  std::optional<Vector> theta_star;  // fitted from a pilot dataset when absent
  std::vector<double> grid;          // exceedance thresholds; pooled deciles when empty
  FitOptions fit;
};

struct OrderingReport {
  Vector theta_star;
  std::vector<double> grid;
  std::vector<double> exceed_true;  // P(z_fit(theta_true) > x)
  std::vector<double> exceed_star;  // P(z_fit(theta*) > x)
  std::vector<double> z_true, z_star;
  double slack = 0.0;
  int violations = 0;
  bool passed = false;
};

/// Stochastic ordering of fit errors over fresh realizations ("trial.t")
/// with theta* held fixed.
OrderingReport check_fit_error_ordering(const OrderingSpec& spec, std::uint64_t seed);

struct PropositionSpec {
  ModelSystem model;
  ParameterSpace space;
  Vector center;               // a point with z_fit <= eta on the candidate data
  Experiment candidate;
  Dataset candidate_data;
  double eta = 1.0;
  int pairs = 1000;
  double spread = 0.05;        // log-scale spread of the pair sampler
  double boundary_fraction = 0.2;
};

struct PropositionReport {
  int pairs = 0;
  int boundary_pairs = 0;
  int chain_violations = 0;  // z_dev > (sqrt f1 + sqrt f2)^2
  int bound_violations = 0;  // (sqrt f1 + sqrt f2)^2 > 4 eta
  double max_dev_over_bound = 0.0;   // max z_dev / (4 eta)
  double mean_triangle_slack = 0.0;  // mean of 1 - z_dev / (sqrt f1 + sqrt f2)^2
  bool passed = false;
};

/// Samples pairs with z_fit(theta_i; candidate) <= eta, some pushed to the
/// boundary z_fit = eta by bisection, and checks both links of
/// z_dev <= (sqrt z_fit1 + sqrt z_fit2)^2 <= 4 eta (relative tolerance 1e-9).
/// Candidate deviation scales are the data's standard deviations.
PropositionReport check_proposition(const PropositionSpec& spec, std::uint64_t seed);

/// Seeded trials of one greedy step: rank the candidates on fresh data,
/// acquire the best one, and compare the realized deviation with the estimate.
struct WorstCaseSpec {
  ModelSystem model;
  ParameterSpace space;
  Vector theta_true;
  NoiseSpec noise;
  std::vector<Experiment> experiments;
  std::vector<PredictionProblem> problems;
  std::vector<Experiment> candidates;
  DesignSettings settings;
  int trials = 50;
  double min_reduction = 0.2;  // trials count when the estimate predicts at least this reduction
  double tolerance = 0.1;      // actual <= estimate * (1 + tolerance)
};

struct WorstCaseTrial {
  int trial = 0;
  bool excluded = false;
  std::string error;
  std::string candidate;
  double deviation = 0.0;
  double estimated = 0.0;
  double actual = 0.0;
  bool qualifying = false;
  bool held = false;
};

struct WorstCaseReport {
  std::vector<WorstCaseTrial> trials;
  int excluded = 0;
  int qualifying = 0;
  int held = 0;
  double fraction = 0.0;  // held / qualifying
  bool passed = false;    // fraction >= 0.9 over at least one qualifying trial
};

WorstCaseReport run_worst_case_study(const WorstCaseSpec& spec, std::uint64_t seed);

/// 3-sigma binomial slack sqrt(p (1 - p) / n) * 3.
double binomial_slack(double p, int n);

}  // namespace preddev
