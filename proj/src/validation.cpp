#include "preddev/validation.hpp"
#include "preddev/errors.hpp"
#include "preddev/rng.hpp"

#include <algorithm>
#include <cmath>

namespace preddev {

double binomial_slack(double p, int n) { return 3.0 * std::sqrt(p * (1.0 - p) / std::max(n, 1)); }

CoverageStudy run_coverage_study(const CoverageSpec& spec, std::uint64_t seed) {
  if (spec.trials < 1) throw ConfigError("coverage study needs at least one trial");
  CoverageStudy study;
  study.spec = spec;
  int both = 0, truth = 0, fresh = 0;
  for (int t = 0; t < spec.trials; ++t) {
    CoverageTrial trial;
    trial.trial = t;
    Rng stream = derive_stream(seed, "trial", t);
    const std::uint64_t data_seed = stream();
    const std::uint64_t fresh_seed = stream();
    const std::uint64_t solve_seed = stream();
    try {
      const Dataset data = simulate_dataset(spec.model, spec.theta_true, spec.experiments, spec.noise, data_seed);
      const FitResult fit = fit_with_interval(spec.model, spec.space, spec.experiments, data, spec.bootstrap, solve_seed);
      const auto problems = resolve_sigmas(spec.problems, data);
      const PairProblem pairs(spec.model, spec.space, spec.experiments, data, problems, fit.theta_star, fit.z_upper);
      const DeviationResult dev = solve_pairs(
          pairs, spec.deviation, solve_seed,
          anchor_pairs(pairs, restart_points(fit), spec.deviation.anchor_pairs, spec.deviation.polish_tol));
      trial.deviation = dev.value;
      trial.true_vs_first = z_dev(spec.model, spec.theta_true, dev.theta1, problems);
      trial.true_vs_second = z_dev(spec.model, spec.theta_true, dev.theta2, problems);
      const double tol = 1e-8 * std::max(1.0, dev.value);
      trial.first = trial.true_vs_first <= dev.value + tol;
      trial.second = trial.true_vs_second <= dev.value + tol;
      trial.z_star = fit.z_star;
      trial.z_upper = fit.z_upper;
      trial.z_true = z_fit(spec.model, spec.theta_true, spec.experiments, data);
      const Dataset other = simulate_dataset(spec.model, spec.theta_true, spec.experiments, spec.noise, fresh_seed);
      trial.z_star_fresh = z_fit(spec.model, fit.theta_star, spec.experiments, other);
    } catch (const std::exception& e) {
      trial.excluded = true;
      trial.error = e.what();
    }
    if (trial.excluded) {
      ++study.excluded;
    } else {
      ++study.used;
      both += trial.first && trial.second;
      truth += trial.z_true <= trial.z_upper;
      fresh += trial.z_star_fresh <= trial.z_upper;
    }
    study.trials.push_back(std::move(trial));
  }
  if (study.used > 0) {
    study.coverage = static_cast<double>(both) / study.used;
    study.truth_feasible = static_cast<double>(truth) / study.used;
    study.fresh_bound = static_cast<double>(fresh) / study.used;
  }
  const double target = 1.0 - spec.bootstrap.alpha;
  study.slack = binomial_slack(target, study.used);
  study.valid = study.excluded * 10 <= spec.trials;
  study.passed = study.valid && study.coverage >= target - study.slack;
  return study;
}

WorstCaseReport run_worst_case_study(const WorstCaseSpec& spec, std::uint64_t seed) {
  if (spec.trials < 1) throw ConfigError("worst-case study needs at least one trial");
  if (spec.candidates.empty()) throw ConfigError("worst-case study needs candidates");
  WorstCaseReport report;
  for (int t = 0; t < spec.trials; ++t) {
    WorstCaseTrial trial;
    trial.trial = t;
    Rng stream = derive_stream(seed, "trial", t);
    const std::uint64_t data_seed = stream();
    const std::uint64_t source_seed = stream();
    const std::uint64_t solve_seed = stream();
    try {
      const Dataset data = simulate_dataset(spec.model, spec.theta_true, spec.experiments, spec.noise, data_seed);
      DesignContext context = DesignContext::build(spec.model, spec.space, spec.experiments, data, spec.problems,
                                                   spec.settings, solve_seed);
      const auto ranking = rank_candidates(context, spec.candidates);
      const RankedCandidate& best = ranking.front();
      if (best.estimate.failed) throw SolverError("every candidate failed: " + best.estimate.error);
      trial.candidate = best.estimate.candidate_id;
      trial.deviation = context.deviation().value;
      trial.estimated = best.estimate.value;
      trial.qualifying = trial.estimated <= (1.0 - spec.min_reduction) * trial.deviation;
      if (trial.qualifying) {
        SimulatedSource source(spec.model, spec.theta_true, spec.noise, source_seed);
        const Experiment& chosen = spec.candidates[best.declaration_index];
        trial.actual = actual_impact(context, chosen, source.acquire(chosen)).value;
        trial.held = trial.actual <= trial.estimated * (1.0 + spec.tolerance);
      }
    } catch (const std::exception& e) {
      trial.excluded = true;
      trial.error = e.what();
    }
    report.excluded += trial.excluded;
    report.qualifying += trial.qualifying;
    report.held += trial.held;
    report.trials.push_back(std::move(trial));
  }
  if (report.qualifying > 0) report.fraction = static_cast<double>(report.held) / report.qualifying;
  report.passed = report.qualifying > 0 && report.fraction >= 0.9;
  return report;
}

Lemma1Report check_lemma1(const std::string& name, const std::function<double(double)>& cdf,
                          const std::vector<double>& xs, const std::vector<double>& as, double tol) {
  Lemma1Report r;
  r.distribution = name;
  for (double x : xs) {
    const double centered = cdf(x) - cdf(-x);
    for (double a : as) {
      const double shifted = cdf(x + a) - cdf(-x + a);
      const double excess = shifted - centered;
      ++r.checks;
      if (r.checks == 1 || excess > r.max_excess) r.max_excess = excess;
      if (excess > tol) ++r.violations;
    }
  }
  r.passed = r.violations == 0;
  return r;
}

Lemma1Report check_lemma1(const NoiseSpec& noise, const std::vector<double>& xs, const std::vector<double>& as,
                          double tol) {
  return check_lemma1(to_string(noise.distribution), [&](double x) { return noise.cdf(x); }, xs, as, tol);
}

OrderingReport check_fit_error_ordering(const OrderingSpec& spec, std::uint64_t seed) {
  if (spec.trials < 1) throw ConfigError("ordering check needs at least one trial");
  OrderingReport r;
  if (spec.theta_star) {
    r.theta_star = *spec.theta_star;
  } else {
    Rng pilot = derive_stream(seed, "pilot");
    const Dataset data = simulate_dataset(spec.model, spec.theta_true, spec.experiments, spec.noise, pilot());
    r.theta_star = fit(spec.model, spec.space, spec.experiments, data, spec.fit, seed).theta_star;
  }
  for (int t = 0; t < spec.trials; ++t) {
    Rng stream = derive_stream(seed, "trial", t);
    const Dataset data = simulate_dataset(spec.model, spec.theta_true, spec.experiments, spec.noise, stream());
    r.z_true.push_back(z_fit(spec.model, spec.theta_true, spec.experiments, data));
    r.z_star.push_back(z_fit(spec.model, r.theta_star, spec.experiments, data));
  }
  r.grid = spec.grid;
  if (r.grid.empty()) {
    std::vector<double> pooled = r.z_true;
    pooled.insert(pooled.end(), r.z_star.begin(), r.z_star.end());
    std::sort(pooled.begin(), pooled.end());
    for (int k = 1; k < 10; ++k) r.grid.push_back(percentile(pooled, k / 10.0));
  }
  const double n = static_cast<double>(spec.trials);
  r.slack = binomial_slack(0.5, spec.trials) * std::sqrt(2.0);
  for (double x : r.grid) {
    const double a = static_cast<double>(std::count_if(r.z_true.begin(), r.z_true.end(), [x](double z) { return z > x; })) / n;
    const double b = static_cast<double>(std::count_if(r.z_star.begin(), r.z_star.end(), [x](double z) { return z > x; })) / n;
    r.exceed_true.push_back(a);
    r.exceed_star.push_back(b);
    if (a > b + r.slack) ++r.violations;
  }
  r.passed = r.violations == 0;
  return r;
}

namespace {

Experiment with_data_scales(Experiment candidate, const Dataset& data) {
  for (auto& s : candidate.series) {
    const ObservedSeries* obs = data.find(candidate.factors.condition_id, s.observable);
    if (!obs || !obs->variance) throw DataError("candidate data lack " + s.observable);
    s.sigma = std::sqrt(*obs->variance);
    std::size_t reps = 0;
    for (double t : s.times) {
      const auto it = std::find(obs->times.begin(), obs->times.end(), t);
      if (it == obs->times.end()) throw DataError("candidate data lack a time point of " + s.observable);
      const std::size_t n = obs->replicates[static_cast<std::size_t>(it - obs->times.begin())].size();
      if (reps != 0 && n != reps) throw DataError("uneven replicate counts in the candidate data");
      reps = n;
    }
    s.replicates = static_cast<int>(reps);
  }
  return candidate;
}

}  // namespace

PropositionReport check_proposition(const PropositionSpec& spec, std::uint64_t seed) {
  const Experiment candidate = with_data_scales(spec.candidate, spec.candidate_data);
  const FitProblem fit_problem(spec.model, spec.space, {candidate}, spec.candidate_data);
  Workspace dev_ws(spec.model);
  const int dev_block = dev_ws.add_deviation({candidate});
  auto fit_at = [&](const Vector& theta) {
    return spec.space.contains(theta) ? fit_problem.at_theta(theta, 0).value : std::numeric_limits<double>::infinity();
  };
  if (!(fit_at(spec.center) <= spec.eta)) throw ConfigError("the sampler center violates z_fit <= eta");

  Rng rng = derive_stream(seed, "proposition");
  std::normal_distribution<double> normal(0.0, 1.0);
  const Vector u0 = spec.space.to_internal(spec.center);
  double spread = spec.spread;
  auto direction = [&]() {
    Vector d(u0.size());
    for (Eigen::Index i = 0; i < d.size(); ++i) d[i] = spread * normal(rng);
    return d;
  };
  auto interior = [&](double* f) {
    for (int miss = 0;; ++miss) {
      if (miss == 100) {
        spread *= 0.5;
        miss = 0;
      }
      const Vector theta = spec.space.to_theta(u0 + direction());
      *f = fit_at(theta);
      if (*f <= spec.eta) return theta;
    }
  };
  auto boundary = [&](double* f) -> std::optional<Vector> {
    const Vector d = direction();
    double lo = 0.0, hi = 1.0;
    while (fit_at(spec.space.to_theta(u0 + hi * d)) <= spec.eta) {
      hi *= 2.0;
      if (hi > 1e6) return std::nullopt;
    }
    for (int i = 0; i < 60; ++i) {
      const double mid = 0.5 * (lo + hi);
      (fit_at(spec.space.to_theta(u0 + mid * d)) <= spec.eta ? lo : hi) = mid;
    }
    const Vector theta = spec.space.to_theta(u0 + lo * d);
    *f = fit_at(theta);
    return theta;
  };

  PropositionReport r;
  const int n_boundary = static_cast<int>(std::round(spec.boundary_fraction * spec.pairs));
  double slack_sum = 0.0;
  int slack_count = 0;
  for (int i = 0; i < spec.pairs; ++i) {
    double f1 = 0.0, f2 = 0.0;
    Vector t1, t2;
    bool on_boundary = false;
    if (i < n_boundary) {
      auto b1 = boundary(&f1);
      auto b2 = boundary(&f2);
      if (b1 && b2) {
        t1 = *b1;
        t2 = *b2;
        on_boundary = true;
      }
    }
    if (!on_boundary) {
      t1 = interior(&f1);
      t2 = interior(&f2);
    }
    const auto s1 = dev_ws.simulate(t1, Tolerances::fitting(), 0);
    const auto s2 = dev_ws.simulate(t2, Tolerances::fitting(), 0);
    if (!s1 || !s2) continue;
    const double dev = dev_ws.deviation(dev_block, *s1, *s2, 0).value;
    const double chain = std::pow(std::sqrt(f1) + std::sqrt(f2), 2);
    ++r.pairs;
    r.boundary_pairs += on_boundary;
    if (dev > chain + 1e-9 * std::max(1.0, chain)) ++r.chain_violations;
    if (chain > 4.0 * spec.eta + 1e-9 * std::max(1.0, 4.0 * spec.eta)) ++r.bound_violations;
    r.max_dev_over_bound = std::max(r.max_dev_over_bound, dev / (4.0 * spec.eta));
    if (chain > 0.0) {
      slack_sum += 1.0 - dev / chain;
      ++slack_count;
    }
  }
  r.mean_triangle_slack = slack_count ? slack_sum / slack_count : 0.0;
  r.passed = r.pairs > 0 && r.chain_violations == 0 && r.bound_violations == 0;
  return r;
}

}  // namespace preddev
