#include "preddev/design.hpp"
#include "preddev/errors.hpp"
#include "preddev/rng.hpp"

#include <boost/math/distributions/chi_squared.hpp>

#include <algorithm>
#include <cmath>

namespace preddev {

EtaMode parse_eta_mode(const std::string& s) {
  if (s == "ratio") return EtaMode::Ratio;
  if (s == "chi2") return EtaMode::ChiSquare;
  if (s == "fixed") return EtaMode::Fixed;
  throw ConfigError("unknown eta mode '" + s + "' (expected ratio, chi2 or fixed)");
}

const char* to_string(EtaMode m) {
  switch (m) {
    case EtaMode::Ratio: return "ratio";
    case EtaMode::ChiSquare: return "chi2";
    case EtaMode::Fixed: return "fixed";
  }
  return "?";
}

double eta_default(double z_upper, std::size_t candidate_count, std::size_t completed_count,
                   const EtaOptions& options) {
  if (candidate_count == 0) return 0.0;
  double eta = 0.0;
  switch (options.mode) {
    case EtaMode::Ratio:
      if (completed_count == 0) throw ConfigError("eta ratio needs at least one completed observation");
      eta = z_upper * static_cast<double>(candidate_count) / static_cast<double>(completed_count);
      break;
    case EtaMode::ChiSquare:
      eta = boost::math::quantile(boost::math::chi_squared(static_cast<double>(candidate_count)), 1.0 - options.alpha);
      break;
    case EtaMode::Fixed:
      eta = options.fixed;
      break;
  }
  return eta * options.multiplier;
}

double eta_default(double z_upper, const Experiment& candidate, const std::vector<Experiment>& completed,
                   const EtaOptions& options) {
  return eta_default(z_upper, candidate.observation_count(), observation_count(completed), options);
}

DesignContext DesignContext::build(const ModelSystem& model, const ParameterSpace& space,
                                   std::vector<Experiment> experiments, Dataset data,
                                   const std::vector<PredictionProblem>& problems, const DesignSettings& settings,
                                   std::uint64_t seed) {
  estimate_missing_variances(data);
  FitResult fitted = fit_with_interval(model, space, experiments, data, settings.bootstrap, seed);
  return from_fit(model, space, std::move(experiments), std::move(data), problems, settings, seed, std::move(fitted));
}

DesignContext DesignContext::from_fit(const ModelSystem& model, const ParameterSpace& space,
                                      std::vector<Experiment> experiments, Dataset data,
                                      const std::vector<PredictionProblem>& problems, const DesignSettings& settings,
                                      std::uint64_t seed, FitResult fitted) {
  if (!fitted.has_interval()) throw ConfigError("design needs a fit with a bootstrap interval");
  DesignContext c;
  c.model_ = model;
  c.space_ = space;
  estimate_missing_variances(data);
  c.problems_ = resolve_sigmas(problems, data);
  c.experiments_ = std::move(experiments);
  c.data_ = std::move(data);
  c.settings_ = settings;
  c.seed_ = seed;
  c.observation_count_ = FitProblem(model, space, c.experiments_, c.data_).observation_count();
  c.fit_ = std::move(fitted);
  const PairProblem pairs(model, space, c.experiments_, c.data_, c.problems_, c.fit_.theta_star, c.fit_.z_upper);
  c.anchors_ = anchor_pairs(pairs, restart_points(c.fit_), settings.deviation.anchor_pairs,
                            settings.deviation.polish_tol);
  c.deviation_ = solve_pairs(pairs, settings.deviation, seed, c.anchors_);
  return c;
}

ImpactEstimate DesignContext::impact(const Experiment& candidate) {
  const double eta = eta_default(fit_.z_upper, candidate.observation_count(), observation_count_, settings_.eta);
  std::vector<std::pair<Vector, Vector>> warm{{deviation_.theta1, deviation_.theta2}};
  warm.insert(warm.end(), anchors_.begin(), anchors_.end());
  ImpactEstimate est = estimate_impact(model_, space_, experiments_, data_, problems_, candidate, fit_.theta_star,
                                       fit_.z_upper, eta, settings_.deviation, seed_, warm);
  if (est.best_restart >= 0 && est.value > deviation_.value * (1.0 + 1e-6)) {
    DeviationResult redo = solve_prediction_deviation(model_, space_, experiments_, data_, problems_,
                                                      fit_.theta_star, fit_.z_upper, settings_.deviation, seed_,
                                                      {{est.theta1, est.theta2}, {deviation_.theta1, deviation_.theta2}});
    if (redo.value < est.value) {
      redo.theta1 = est.theta1;
      redo.theta2 = est.theta2;
      redo.value = est.value;
      redo.fit1 = est.fit1;
      redo.fit2 = est.fit2;
      redo.residual1 = est.residual1;
      redo.residual2 = est.residual2;
      redo.no_deviation = false;
    }
    deviation_ = std::move(redo);
    ++reconciliations_;
  }
  return est;
}

DesignContext DesignContext::extend(const Experiment& candidate, const Dataset& new_data) const {
  std::vector<Experiment> experiments = experiments_;
  experiments.push_back(candidate);
  Dataset data = data_;
  data.merge(new_data);
  DesignSettings settings = settings_;
  settings.bootstrap.fit.initial_points.insert(settings.bootstrap.fit.initial_points.begin(), fit_.theta_star);
  DesignContext next = build(model_, space_, std::move(experiments), std::move(data), problems_, settings, seed_);
  next.settings_ = settings_;
  return next;
}

std::vector<RankedCandidate> rank_candidates(DesignContext& context, const std::vector<Experiment>& candidates) {
  if (candidates.empty()) throw ConfigError("no candidates to rank");
  std::vector<RankedCandidate> out;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    RankedCandidate r;
    r.declaration_index = i;
    try {
      r.estimate = context.impact(candidates[i]);
    } catch (const std::exception& e) {
      r.estimate.candidate_id = candidates[i].id;
      r.estimate.candidate_observations = candidates[i].observation_count();
      r.estimate.failed = true;
      r.estimate.error = e.what();
    }
    out.push_back(std::move(r));
  }
  const double current = context.deviation().value;
  for (auto& r : out) {
    r.predicted_reduction = !r.estimate.failed && r.estimate.value < context.settings().reduction_flag * current;
  }
  std::stable_sort(out.begin(), out.end(), [](const RankedCandidate& a, const RankedCandidate& b) {
    if (a.estimate.failed != b.estimate.failed) return !a.estimate.failed;
    if (a.estimate.value != b.estimate.value) return a.estimate.value < b.estimate.value;
    if (a.estimate.candidate_observations != b.estimate.candidate_observations) {
      return a.estimate.candidate_observations < b.estimate.candidate_observations;
    }
    return a.declaration_index < b.declaration_index;
  });
  return out;
}

SimulatedSource::SimulatedSource(ModelSystem model, Vector theta_true, NoiseSpec noise, std::uint64_t seed)
    : model_(std::move(model)), theta_true_(std::move(theta_true)), noise_(std::move(noise)), seed_(seed) {}

Dataset SimulatedSource::acquire(const Experiment& candidate) {
  Rng stream = derive_stream(seed_, "acquire." + candidate.id);
  return simulate_dataset(model_, theta_true_, {candidate}, noise_, stream());
}

DatasetSource::DatasetSource(Dataset data) : data_(std::move(data)) {}

Dataset DatasetSource::acquire(const Experiment& candidate) {
  Dataset d = select(data_, {candidate});
  estimate_missing_variances(d);
  return d;
}

DesignTrace sequential_design(DesignContext& context, std::vector<Experiment> candidates, DataSource& source,
                              int rounds) {
  DesignTrace trace;
  int low = 0;
  for (int r = 0; r < rounds; ++r) {
    if (candidates.empty()) {
      trace.stop_reason = "candidates exhausted";
      break;
    }
    DesignRound round;
    round.round = r + 1;
    round.ranking = rank_candidates(context, candidates);
    round.deviation_before = context.deviation().value;
    const RankedCandidate& best = round.ranking.front();
    if (best.estimate.failed) {
      round.failed = true;
      round.error = "every candidate failed: " + best.estimate.error;
      trace.rounds.push_back(std::move(round));
      trace.stop_reason = "all candidates failed";
      break;
    }
    round.predicted = best.estimate.value;
    const double reduction =
        round.deviation_before > 0.0 ? (round.deviation_before - round.predicted) / round.deviation_before : 0.0;
    low = reduction < context.settings().stop_reduction ? low + 1 : 0;
    if (low >= context.settings().stop_patience) {
      trace.rounds.push_back(std::move(round));
      trace.stop_reason = "no further predicted reduction";
      break;
    }
    const std::size_t index = best.declaration_index;
    round.chosen = candidates[index].id;
    try {
      const Dataset acquired = source.acquire(candidates[index]);
      DesignContext next = context.extend(candidates[index], acquired);
      context = std::move(next);
    } catch (const std::exception& e) {
      round.failed = true;
      round.error = e.what();
      trace.rounds.push_back(std::move(round));
      trace.stop_reason = "round failed";
      break;
    }
    round.deviation = context.deviation();
    round.deviation_after = round.deviation.value;
    round.change = round.deviation_after - round.deviation_before;
    round.z_upper = context.fit().z_upper;
    round.theta_star = context.fit().theta_star;
    trace.rounds.push_back(std::move(round));
    candidates.erase(candidates.begin() + static_cast<long>(index));
  }
  if (trace.stop_reason.empty()) trace.stop_reason = "round limit";
  return trace;
}

DeviationResult actual_impact(const DesignContext& context, const Experiment& candidate, const Dataset& new_data) {
  return context.extend(candidate, new_data).deviation();
}

}  // namespace preddev
