#include "preddev/estimation.hpp"
#include "preddev/errors.hpp"
#include "preddev/rng.hpp"

#include <algorithm>
#include <cmath>

namespace preddev {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Derivatives infinite() {
  Derivatives d;
  d.value = kInf;
  return d;
}

}  // namespace

FitProblem::FitProblem(const ModelSystem& model, const ParameterSpace& space,
                       const std::vector<Experiment>& experiments, const Dataset& data)
    : space_(space), ws_(model) {
  space_.validate();
  if (space_.dim() != model.param_dim()) throw ConfigError("parameter box does not match the model");
  if (experiments.empty()) throw ConfigError("no experiments to fit");
  block_ = ws_.add_fit(experiments, data);
}

Derivatives FitProblem::at_theta(const Vector& theta, int order, const Tolerances& tol) const {
  const auto sim = ws_.simulate(theta, tol, order, &ws_.conditions_of(block_));
  if (!sim) return infinite();
  return ws_.fit_error(block_, *sim, order);
}

Derivatives FitProblem::at_internal(const Vector& u, int order, const Tolerances& tol) const {
  const Vector theta = space_.to_theta(u);
  if (!space_.contains(theta)) return infinite();
  Derivatives d = at_theta(theta, order, tol);
  if (!std::isfinite(d.value)) return d;
  if (order >= 2) d.hessian = space_.hessian_to_internal(u, d.gradient, d.hessian);
  if (order >= 1) d.gradient = space_.gradient_to_internal(u, d.gradient);
  return d;
}

RestartRecord FitProblem::refine(const Vector& theta0, const FitOptions& options) const {
  RestartRecord rec;
  rec.start = theta0;
  const Objective f = [&](const Vector& u, int order) { return at_internal(u, order, options.tol); };
  const MinimizeResult r = minimize(f, space_.to_internal(theta0), options.minimize);
  rec.theta = space_.to_theta(r.x);
  rec.value = r.value;
  rec.converged = r.converged && std::isfinite(r.value);
  rec.iterations = r.iterations;
  rec.reason = r.reason;
  return rec;
}

std::size_t FitProblem::observation_count() const {
  std::size_t n = 0;
  for (const auto& t : ws_.terms(block_)) n += t.targets.size();
  return n;
}

double z_fit(const ModelSystem& model, const Vector& theta, const std::vector<Experiment>& experiments,
             const Dataset& data, const Tolerances& tol) {
  Workspace ws(model);
  const int block = ws.add_fit(experiments, data);
  const auto sim = ws.simulate(theta, tol, 0);
  if (!sim) return kInf;
  return ws.fit_error(block, *sim, 0).value;
}

FitResult fit(const ModelSystem& model, const ParameterSpace& space, const std::vector<Experiment>& experiments,
              const Dataset& data, const FitOptions& options, std::uint64_t seed) {
  if (options.restarts < 1 && options.initial_points.empty()) throw ConfigError("restarts must be at least 1");
  const FitProblem problem(model, space, experiments, data);
  FitResult res;
  std::vector<Vector> starts;
  for (const auto& x : options.initial_points) {
    if (space.contains(x)) starts.push_back(x);
  }
  for (int k = 0; k < options.restarts; ++k) {
    Rng rng = derive_stream(seed, "fit.restart", k);
    starts.push_back(space.sample(rng));
  }
  for (std::size_t k = 0; k < starts.size(); ++k) {
    res.restarts.push_back(problem.refine(starts[k], options));
    const auto& r = res.restarts.back();
    if (r.converged && r.value < res.z_star) {
      res.z_star = r.value;
      res.theta_star = r.theta;
      res.best_restart = static_cast<int>(k);
    }
  }
  if (res.best_restart < 0) {
    std::string msg = "no fit restart converged:";
    for (const auto& r : res.restarts) msg += " [" + r.reason + "]";
    throw SolverError(msg);
  }
  return res;
}

BootstrapMode parse_bootstrap_mode(const std::string& s) {
  if (s == "auto") return BootstrapMode::Auto;
  if (s == "replicates") return BootstrapMode::Replicates;
  if (s == "residuals") return BootstrapMode::Residuals;
  throw ConfigError("unknown bootstrap mode '" + s + "'");
}

const char* to_string(BootstrapMode m) {
  switch (m) {
    case BootstrapMode::Auto: return "auto";
    case BootstrapMode::Replicates: return "replicates";
    case BootstrapMode::Residuals: return "residuals";
  }
  return "?";
}

double percentile(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) throw std::logic_error("percentile of an empty sample");
  const auto n = static_cast<long>(sorted.size());
  const long k = std::clamp(static_cast<long>(std::ceil(q * static_cast<double>(n))) - 1, 0L, n - 1);
  return sorted[static_cast<std::size_t>(k)];
}

BootstrapResult bootstrap_interval(const ModelSystem& model, const ParameterSpace& space,
                                   const std::vector<Experiment>& experiments, const Dataset& data,
                                   const Vector& theta_star, const BootstrapOptions& options, std::uint64_t seed) {
  if (options.samples < 100) throw ConfigError("bootstrap needs at least 100 samples");
  if (!(options.alpha > 0.0 && options.alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
  const FitProblem base(model, space, experiments, data);
  const auto& terms = base.workspace().terms(base.block());

  BootstrapResult res;
  bool all_replicated = true;
  for (const auto& t : terms) all_replicated = all_replicated && t.targets.size() >= 2;
  res.mode = options.mode;
  if (res.mode == BootstrapMode::Auto) res.mode = all_replicated ? BootstrapMode::Replicates : BootstrapMode::Residuals;
  if (res.mode == BootstrapMode::Replicates && !all_replicated) {
    throw DataError("replicate bootstrap needs at least two replicates in every cell");
  }

  std::vector<double> fitted;
  std::vector<double> residuals;
  if (res.mode == BootstrapMode::Residuals) {
    const auto sim = base.workspace().simulate(theta_star, options.fit.tol, 0);
    if (!sim) throw SolverError("integration failed at the best fit");
    fitted = base.workspace().observe(base.block(), *sim);
    for (std::size_t i = 0; i < terms.size(); ++i) {
      for (double x : terms[i].targets) residuals.push_back((x - fitted[i]) * terms[i].inv_sigma);
    }
    double mean = 0.0;
    for (double r : residuals) mean += r;
    mean /= static_cast<double>(residuals.size());
    const double n = static_cast<double>(residuals.size());
    const double p = static_cast<double>(space.dim());
    const double inflate = n > p ? std::sqrt(n / (n - p)) : 1.0;
    for (double& r : residuals) r = (r - mean) * inflate;
  }

  for (int b = 0; b < options.samples; ++b) {
    Rng rng = derive_stream(seed, "boot", b);
    std::vector<std::vector<double>> targets(terms.size());
    for (std::size_t i = 0; i < terms.size(); ++i) {
      const auto& src = terms[i].targets;
      if (res.mode == BootstrapMode::Replicates) {
        const double n = static_cast<double>(src.size());
        double mean = 0.0;
        for (double x : src) mean += x;
        mean /= n;
        const double inflate = std::sqrt(n / (n - 1.0));
        std::uniform_int_distribution<std::size_t> pick(0, src.size() - 1);
        for (std::size_t r = 0; r < src.size(); ++r) targets[i].push_back(mean + inflate * (src[pick(rng)] - mean));
      } else {
        std::uniform_int_distribution<std::size_t> pick(0, residuals.size() - 1);
        for (std::size_t r = 0; r < src.size(); ++r) {
          targets[i].push_back(fitted[i] + residuals[pick(rng)] / terms[i].inv_sigma);
        }
      }
    }
    FitProblem resampled = base;
    resampled.workspace().set_targets(base.block(), targets);
    const RestartRecord r = resampled.refine(theta_star, options.fit);
    if (r.converged) {
      res.sample.push_back(r.value);
    } else {
      ++res.discarded;
    }
  }
  if (res.discarded * 5 > options.samples) {
    throw SolverError("bootstrap discarded " + std::to_string(res.discarded) + " of " +
                      std::to_string(options.samples) + " resamples");
  }
  std::sort(res.sample.begin(), res.sample.end());
  res.lower = percentile(res.sample, options.alpha / 2.0);
  res.upper = percentile(res.sample, 1.0 - options.alpha / 2.0);
  return res;
}

FitResult fit_with_interval(const ModelSystem& model, const ParameterSpace& space,
                            const std::vector<Experiment>& experiments, const Dataset& data,
                            const BootstrapOptions& options, std::uint64_t seed) {
  FitResult res = fit(model, space, experiments, data, options.fit, seed);
  BootstrapResult b = bootstrap_interval(model, space, experiments, data, res.theta_star, options, seed);
  res.z_lower = b.lower;
  res.z_upper = b.upper;
  res.bootstrap_sample = std::move(b.sample);
  res.bootstrap_discarded = b.discarded;
  return res;
}

}  // namespace preddev
