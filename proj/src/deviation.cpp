#include "preddev/deviation.hpp"
#include "preddev/errors.hpp"
#include "preddev/rng.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace preddev {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Derivatives embed(const Derivatives& d, Eigen::Index p, Eigen::Index offset, int order) {
  Derivatives out;
  out.value = d.value;
  if (order >= 1) {
    out.gradient = Vector::Zero(2 * p);
    out.gradient.segment(offset, p) = d.gradient;
  }
  if (order >= 2) {
    out.hessian = Matrix::Zero(2 * p, 2 * p);
    out.hessian.block(offset, offset, p, p) = d.hessian;
  }
  return out;
}

Derivatives scaled(Derivatives d, double sign, double shift, int order) {
  d.value = shift + sign * d.value;
  if (order >= 1) d.gradient *= sign;
  if (order >= 2) d.hessian *= sign;
  return d;
}

}  // namespace

double z_dev(const ModelSystem& model, const Vector& theta1, const Vector& theta2,
             const std::vector<PredictionProblem>& problems, const Tolerances& tol) {
  Workspace ws(model);
  const int block = ws.add_deviation(problems);
  const auto s1 = ws.simulate(theta1, tol, 0);
  const auto s2 = ws.simulate(theta2, tol, 0);
  if (!s1 || !s2) return kInf;
  return ws.deviation(block, *s1, *s2, 0).value;
}

PairProblem::PairProblem(const ModelSystem& model, const ParameterSpace& space,
                         const std::vector<Experiment>& experiments, const Dataset& data,
                         const std::vector<PredictionProblem>& problems, const Vector& theta_star, double z_upper,
                         const std::optional<Experiment>& candidate, double eta)
    : space_(space), pair_(pair_space(space)), ws_(model), z_upper_(z_upper), eta_(eta) {
  space_.validate();
  if (space_.dim() != model.param_dim()) throw ConfigError("parameter box does not match the model");
  if (problems.empty()) throw ConfigError("no prediction problems");
  if (!space_.contains(theta_star)) throw ConfigError("best fit lies outside the parameter box");
  fit_block_ = ws_.add_fit(experiments, data);
  prediction_block_ = ws_.add_deviation(problems);
  if (candidate && std::isfinite(eta)) {
    candidate_block_ = ws_.add_deviation({*candidate});
    candidate_observations_ = candidate->observation_count();
  }
  center_ = stack(theta_star, theta_star);
}

Vector PairProblem::stack(const Vector& theta1, const Vector& theta2) const {
  Vector t(theta1.size() + theta2.size());
  t << theta1, theta2;
  return pair_.to_internal(t);
}

std::pair<Vector, Vector> PairProblem::unstack(const Vector& U) const {
  const Vector t = pair_.to_theta(U);
  const auto p = U.size() / 2;
  return {t.head(p), t.tail(p)};
}

ConstrainedEvaluation PairProblem::evaluate(const Vector& U, int order, const Tolerances& tol) const {
  ConstrainedEvaluation ev;
  ev.objective.value = kInf;
  const Vector theta = pair_.to_theta(U);
  if (!pair_.contains(theta)) return ev;
  const auto p = U.size() / 2;
  const auto s1 = ws_.simulate(theta.head(p), tol, order);
  if (!s1) return ev;
  const auto s2 = ws_.simulate(theta.tail(p), tol, order);
  if (!s2) return ev;

  auto internal = [&](Derivatives d) {
    if (order >= 2) d.hessian = pair_.hessian_to_internal(U, d.gradient, d.hessian);
    if (order >= 1) d.gradient = pair_.gradient_to_internal(U, d.gradient);
    return d;
  };
  ev.objective = internal(scaled(ws_.deviation(prediction_block_, *s1, *s2, order), -1.0, 0.0, order));
  ev.constraints.push_back(
      internal(scaled(embed(ws_.fit_error(fit_block_, *s1, order), p, 0, order), -1.0, z_upper_, order)));
  ev.constraints.push_back(
      internal(scaled(embed(ws_.fit_error(fit_block_, *s2, order), p, p, order), -1.0, z_upper_, order)));
  if (candidate_block_ >= 0) {
    ev.constraints.push_back(internal(scaled(ws_.deviation(candidate_block_, *s1, *s2, order), -1.0, eta_, order)));
  }
  return ev;
}

bool PairProblem::strictly_feasible(const Vector& U, const Tolerances& tol) const {
  const ConstrainedEvaluation ev = evaluate(U, 0, tol);
  if (!std::isfinite(ev.objective.value)) return false;
  for (const auto& c : ev.constraints) {
    if (!(c.value > 0.0)) return false;
  }
  return true;
}

PairProblem::Values PairProblem::values(const Vector& theta1, const Vector& theta2, const Tolerances& tol) const {
  Values v{kInf, kInf, kInf, kInf};
  const auto s1 = ws_.simulate(theta1, tol, 0);
  const auto s2 = ws_.simulate(theta2, tol, 0);
  if (!s1 || !s2) return v;
  v.deviation = ws_.deviation(prediction_block_, *s1, *s2, 0).value;
  v.fit1 = ws_.fit_error(fit_block_, *s1, 0).value;
  v.fit2 = ws_.fit_error(fit_block_, *s2, 0).value;
  v.candidate = candidate_block_ >= 0 ? ws_.deviation(candidate_block_, *s1, *s2, 0).value : 0.0;
  return v;
}

Vector PairProblem::project(const Vector& U, const Tolerances& tol) const {
  if (strictly_feasible(U, tol)) return U;
  double lo = 0.0, hi = 1.0;
  for (int i = 0; i < 40; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (strictly_feasible(center_ + mid * (U - center_), tol)) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return center_ + lo * (U - center_);
}

Vector PairProblem::walk(Rng& rng, const DeviationOptions& options, int* accepted) const {
  const Vector theta = pair_.to_theta(center_);
  Vector sd(center_.size());
  for (Eigen::Index i = 0; i < sd.size(); ++i) {
    sd[i] = pair_.log_scale[static_cast<std::size_t>(i)]
                ? options.walk_step
                : std::max(options.walk_step * std::abs(theta[i]), options.walk_floor);
  }
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector U = center_;
  int taken = 0, rejected_in_row = 0;
  double scale = 1.0;
  for (int attempt = 0; attempt < options.walk_attempts && taken < options.walk_steps; ++attempt) {
    Vector proposal = U;
    for (Eigen::Index i = 0; i < U.size(); ++i) proposal[i] += scale * sd[i] * normal(rng);
    if (strictly_feasible(proposal, options.barrier_tol)) {
      U = std::move(proposal);
      ++taken;
      rejected_in_row = 0;
    } else if (++rejected_in_row == 50) {
      scale *= 0.5;
      rejected_in_row = 0;
    }
  }
  if (accepted) *accepted = taken;
  return U;
}

PairRestart PairProblem::solve(const Vector& U0, const DeviationOptions& options) const {
  PairRestart r;
  std::tie(r.start1, r.start2) = unstack(U0);
  const ConstrainedProblem problem = [&](const Vector& U, int order, bool polish) {
    return evaluate(U, order, polish ? options.polish_tol : options.barrier_tol);
  };
  const Restore restore = [&](const Vector& U) { return project(U, options.polish_tol); };
  const BarrierResult b = barrier_minimize(problem, U0, options.barrier, restore);
  std::tie(r.theta1, r.theta2) = unstack(b.x);
  r.outer_iterations = b.outer_iterations;
  r.inner_iterations = b.inner_iterations;
  r.reason = b.reason;
  const Values v = values(r.theta1, r.theta2, options.polish_tol);
  r.value = v.deviation;
  const double slack = 1.0 + options.feasibility_tol;
  r.feasible = b.feasible && std::isfinite(v.deviation) && v.fit1 <= z_upper_ * slack && v.fit2 <= z_upper_ * slack &&
               (candidate_block_ < 0 || v.candidate <= eta_ * slack);
  return r;
}

DeviationResult solve_pairs(const PairProblem& problem, const DeviationOptions& options, std::uint64_t seed,
                            const std::vector<std::pair<Vector, Vector>>& warm_starts) {
  DeviationResult res;
  res.z_upper = problem.z_upper();
  const auto [star1, star2] = problem.unstack(problem.center());
  const double z_star = problem.values(star1, star2, options.polish_tol).fit1;
  if (!(z_star <= res.z_upper * (1.0 + options.feasibility_tol) + 1e-12)) {
    throw ConfigError("infeasible configuration: z_u is below z_fit(theta*)");
  }
  if (!problem.strictly_feasible(problem.center(), options.polish_tol)) {
    res.theta1 = star1;
    res.theta2 = star2;
    res.fit1 = res.fit2 = z_star;
    res.no_deviation = true;
    return res;
  }
  for (const auto& [t1, t2] : warm_starts) {
    const Vector U0 = problem.project(problem.stack(t1, t2), options.barrier_tol);
    PairRestart r = problem.solve(U0, options);
    r.warm = true;
    res.restarts.push_back(std::move(r));
  }
  for (int k = 0; k < options.restarts; ++k) {
    Rng rng = derive_stream(seed, "dev.restart", k);
    int accepted = 0;
    const Vector U0 = problem.walk(rng, options, &accepted);
    PairRestart r = problem.solve(U0, options);
    r.walk_accepted = accepted;
    res.restarts.push_back(std::move(r));
  }
  double best = -1.0;
  for (std::size_t i = 0; i < res.restarts.size(); ++i) {
    const auto& r = res.restarts[i];
    if (r.feasible && r.value > best) {
      best = r.value;
      res.best_restart = static_cast<int>(i);
    }
  }
  if (res.best_restart >= 0) {
    const auto& r = res.restarts[static_cast<std::size_t>(res.best_restart)];
    res.theta1 = r.theta1;
    res.theta2 = r.theta2;
  } else {
    std::tie(res.theta1, res.theta2) = problem.unstack(problem.center());
  }
  const auto v = problem.values(res.theta1, res.theta2, options.polish_tol);
  res.value = v.deviation;
  res.fit1 = v.fit1;
  res.fit2 = v.fit2;
  res.residual1 = std::max(v.fit1 - res.z_upper, 0.0);
  res.residual2 = std::max(v.fit2 - res.z_upper, 0.0);
  res.no_deviation = !(res.value > options.no_deviation_tol);
  return res;
}

DeviationResult solve_prediction_deviation(const ModelSystem& model, const ParameterSpace& space,
                                           const std::vector<Experiment>& experiments, const Dataset& data,
                                           const std::vector<PredictionProblem>& problems,
                                           const Vector& theta_star, double z_upper,
                                           const DeviationOptions& options, std::uint64_t seed,
                                           const std::vector<std::pair<Vector, Vector>>& warm_starts) {
  const PairProblem problem(model, space, experiments, data, resolve_sigmas(problems, data), theta_star, z_upper);
  return solve_pairs(problem, options, seed, warm_starts);
}

std::vector<std::pair<Vector, Vector>> anchor_pairs(const PairProblem& problem, const std::vector<Vector>& points,
                                                    int count, const Tolerances& tol) {
  std::vector<std::pair<Vector, Vector>> out;
  if (count <= 0) return out;
  const Workspace& ws = problem.workspace();
  std::vector<Vector> kept;
  std::vector<Simulation> sims;
  for (const auto& x : points) {
    if (!problem.space().contains(x)) continue;
    auto sim = ws.simulate(x, tol, 0);
    if (!sim || !(ws.fit_error(problem.fit_block(), *sim, 0).value < problem.z_upper())) continue;
    kept.push_back(x);
    sims.push_back(std::move(*sim));
  }
  struct Scored {
    double value;
    std::size_t i, j;
  };
  std::vector<Scored> scored;
  for (std::size_t i = 0; i < kept.size(); ++i) {
    for (std::size_t j = i + 1; j < kept.size(); ++j) {
      const double v = ws.deviation(problem.prediction_block(), sims[i], sims[j], 0).value;
      if (std::isfinite(v) && v > 0.0) scored.push_back({v, i, j});
    }
  }
  std::sort(scored.begin(), scored.end(), [](const Scored& a, const Scored& b) { return a.value > b.value; });
  for (std::size_t k = 0; k < scored.size() && static_cast<int>(out.size()) < count; ++k) {
    out.emplace_back(kept[scored[k].i], kept[scored[k].j]);
  }
  return out;
}

std::vector<Vector> restart_points(const FitResult& fit) {
  std::vector<Vector> out;
  for (const auto& r : fit.restarts) {
    if (r.converged) out.push_back(r.theta);
  }
  return out;
}

void check_disjoint(const Experiment& candidate, const std::vector<Experiment>& completed) {
  for (const auto& e : completed) {
    if (e.factors.condition_id != candidate.factors.condition_id) continue;
    for (const auto& s : e.series) {
      for (const auto& c : candidate.series) {
        if (s.observable != c.observable) continue;
        const std::set<double> done(s.times.begin(), s.times.end());
        for (double t : c.times) {
          if (done.count(t)) {
            throw ConfigError("candidate " + candidate.id + " repeats " + c.observable + " at " +
                              candidate.factors.condition_id + " from experiment " + e.id);
          }
        }
      }
    }
  }
}

ImpactEstimate estimate_impact(const ModelSystem& model, const ParameterSpace& space,
                               const std::vector<Experiment>& experiments, const Dataset& data,
                               const std::vector<PredictionProblem>& problems, const Experiment& candidate,
                               const Vector& theta_star, double z_upper, double eta,
                               const DeviationOptions& options, std::uint64_t seed,
                               const std::vector<std::pair<Vector, Vector>>& warm_starts) {
  check_disjoint(candidate, experiments);
  if (eta < 0.0 || std::isnan(eta)) throw ConfigError("eta must be nonnegative");
  const double effective = std::isfinite(eta) ? std::max(eta, 1e-12 * std::max(1.0, z_upper)) : eta;
  const Experiment resolved = resolve_sigmas({candidate}, data).front();
  const PairProblem problem(model, space, experiments, data, resolve_sigmas(problems, data), theta_star, z_upper,
                            resolved, effective);
  ImpactEstimate est;
  static_cast<DeviationResult&>(est) = solve_pairs(problem, options, seed, warm_starts);
  est.candidate_id = candidate.id;
  est.eta = effective;
  est.candidate_observations = candidate.observation_count();
  if (std::isfinite(effective)) {
    est.candidate_value = problem.values(est.theta1, est.theta2, options.polish_tol).candidate;
  } else {
    Workspace ws(model);
    const int block = ws.add_deviation({resolved});
    const auto s1 = ws.simulate(est.theta1, options.polish_tol, 0);
    const auto s2 = ws.simulate(est.theta2, options.polish_tol, 0);
    est.candidate_value = s1 && s2 ? ws.deviation(block, *s1, *s2, 0).value : kInf;
  }
  return est;
}

}  // namespace preddev
