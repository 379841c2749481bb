// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero when any selected criterion fails.
//
//   preddev_acceptance [criterion numbers...]   (default: 1-8 and 10)

#include "preddev/config.hpp"
#include "preddev/design.hpp"
#include "preddev/estimation.hpp"
#include "preddev/pipeline.hpp"
#include "preddev/rng.hpp"
#include "preddev/validation.hpp"

#include <boost/math/distributions/chi_squared.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <limits>
#include <map>
#include <set>
#include <string>

using namespace preddev;

namespace {

// Pinned thresholds.
constexpr double kFitBudget = 120.0;
constexpr double kDeviationBudget = 600.0;
constexpr double kCoverageBudget = 1800.0;
constexpr double kDesignBudget = 7200.0;
constexpr double kLorenzGapSigma = 10.0;
constexpr double kLorenzGapShare = 0.25;
constexpr double kLvGapSigma = 5.0;
constexpr double kImpactRelTol = 1e-6;
constexpr int kPropositionPairs = 1000;
constexpr double kCoverageFloor = 0.92;
constexpr int kCoverageTrials = 200;
constexpr double kLemmaTol = 1e-12;
constexpr double kGradientRelTol = 1e-4;
constexpr int kGradientPoints = 10;
constexpr int kGreedyRounds = 3;
constexpr double kGreedyRatio = 1.10;
constexpr int kWorstCaseTrials = 50;
constexpr double kWorstCaseFraction = 0.9;

struct Verdict {
  bool passed = false;
  std::string detail;
};

std::string scenario_path(const std::string& name) { return std::string(PREDDEV_SCENARIOS) + "/" + name; }

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

PipelineOutcome run(const std::string& file, std::vector<std::string> stages) {
  PipelineOutcome out = run_pipeline(load_config(scenario_path(file)), std::move(stages));
  if (out.failure) throw std::runtime_error(out.failure->stage + ": " + out.failure->message);
  return out;
}

std::vector<double> gap_sigmas(const Json& report) {
  std::vector<double> g;
  for (const auto& p : report["deviation"]["pointwise"]) g.push_back(p["gap_sigma"].get<double>());
  return g;
}

Verdict lorenz_fit() {
  const Json r = run("lorenz.json", {"fit"}).report;
  const auto& th = r["fit"]["theta_star"];
  const double a = th["theta1"], b = th["theta2"], c = th["theta3"];
  const bool ok = a > 6.51 && a < 7.49 && b > 36.08 && b < 40.28 && c > 4.82 && c < 5.17;
  return {ok, "theta* = (" + fmt("%.4f", a) + ", " + fmt("%.4f", b) + ", " + fmt("%.4f", c) + ")"};
}

Verdict lorenz_deviation() {
  const auto cfg = load_config(scenario_path("lorenz.json"));
  const Json r = run("lorenz.json", {"deviate"}).report;
  const auto g = gap_sigmas(r);
  const double share =
      static_cast<double>(std::count_if(g.begin(), g.end(), [](double x) { return x > kLorenzGapSigma; })) / g.size();
  const bool ok = share >= kLorenzGapShare && cfg.deviation.restarts >= 20;
  return {ok, "share of points with gap > 10 sigma: " + fmt("%.3f", share) + ", restarts " +
                  std::to_string(cfg.deviation.restarts)};
}

Verdict lv_deviation() {
  const Json r = run("lotka_volterra.json", {"deviate"}).report;
  const auto g = gap_sigmas(r);
  const double worst = *std::max_element(g.begin(), g.end());
  return {worst <= kLvGapSigma, "max gap " + fmt("%.3f", worst) + " sigma over " + std::to_string(g.size()) + " points"};
}

Verdict impact_monotone() {
  const Json r = run("hiv.json", {"rank"}).report;
  const double dev = r["deviation_reconciled"]["value"];
  int violations = 0, count = 0;
  double worst = 0.0;
  for (const auto& e : r["impacts"]) {
    if (e["failed"].get<bool>()) continue;
    ++count;
    const double v = e["value"];
    worst = std::max(worst, v / dev);
    if (v > dev * (1 + kImpactRelTol)) ++violations;
  }
  const bool ok = violations == 0 && count == static_cast<int>(r["impacts"].size()) && count > 0;
  return {ok, std::to_string(count) + " candidates, " + std::to_string(violations) + " violations, max ratio " +
                  fmt("%.6f", worst)};
}

Verdict proposition() {
  int total = 0, chain = 0, bound = 0;
  std::string detail;
  for (const std::string file : {"lorenz.json", "lotka_volterra.json", "linear_toy.json", "hiv.json"}) {
    const auto cfg = load_config(scenario_path(file));
    const auto sc = resolve(cfg);
    PropositionSpec spec;
    spec.model = sc.model;
    spec.space = sc.space;
    spec.center = truth(cfg, sc);
    spec.candidate = sc.candidates.empty() ? sc.predictions.front() : sc.candidates.front();
    spec.candidate_data =
        simulate_dataset(sc.model, spec.center, {spec.candidate}, cfg.data.simulate->noise, derive_stream(cfg.seed, "p")());
    const double q = boost::math::quantile(boost::math::chi_squared(static_cast<double>(spec.candidate.observation_count())), 0.95);
    spec.eta = std::max(q, 2.0 * z_fit(sc.model, spec.center, {spec.candidate}, spec.candidate_data));
    spec.pairs = kPropositionPairs;
    const PropositionReport r = check_proposition(spec, derive_stream(cfg.seed, "proposition")());
    total += r.pairs;
    chain += r.chain_violations;
    bound += r.bound_violations;
    detail += cfg.name + " " + std::to_string(r.pairs) + " pairs; ";
  }
  return {chain == 0 && bound == 0 && total == 4 * kPropositionPairs,
          detail + std::to_string(chain + bound) + " violations"};
}

Verdict coverage() {
  std::string detail;
  bool ok = true;
  for (const std::string file : {"linear_toy.json", "lv_coverage.json"}) {
    const Json r = run(file, {"validate"}).report;
    const auto& c = r["validation"]["coverage"];
    const double cov = c["coverage"];
    const int used = c["used"];
    ok = ok && cov >= kCoverageFloor && used >= kCoverageTrials;
    if (!detail.empty()) detail += "; ";
    detail += r["config"]["name"].get<std::string>() + " " + fmt("%.3f", cov) + " over " + std::to_string(used);
  }
  return {ok, detail};
}

std::vector<double> grid(double a, double b, double step) {
  std::vector<double> v;
  for (int i = 0; a + i * step <= b + 1e-9; ++i) v.push_back(a + i * step);
  return v;
}

Verdict lemma1() {
  const auto xs = grid(0, 3, 0.1), as = grid(-3, 3, 0.1);
  int checks = 0, violations = 0;
  for (const auto d : {NoiseDistribution::Normal, NoiseDistribution::Uniform}) {
    NoiseSpec n;
    n.distribution = d;
    const Lemma1Report r = check_lemma1(n, xs, as, kLemmaTol);
    checks += r.checks;
    violations += r.violations;
  }
  return {violations == 0 && checks == 2 * 31 * 61,
          std::to_string(checks) + " checks, " + std::to_string(violations) + " violations"};
}

double rel_error(const Vector& analytic, const Vector& fd) {
  return (analytic - fd).norm() / std::max(fd.norm(), 1e-12);
}

Vector central_difference(const std::function<double(const Vector&)>& f, const Vector& x) {
  Vector g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double h = 1e-5 * std::max(1.0, std::abs(x[i]));
    Vector up = x, dn = x;
    up[i] += h;
    dn[i] -= h;
    g[i] = (f(up) - f(dn)) / (2 * h);
  }
  return g;
}

Verdict gradients() {
  const Tolerances tight{1e-12, 1e-14, 2000000};
  double worst = 0.0;
  int points = 0;
  std::string worst_model;
  for (const auto& name : ModelRegistry::instance().names()) {
    const auto d = ModelRegistry::instance().get(name);
    std::vector<Experiment> experiments;
    std::vector<PredictionProblem> problems;
    for (const auto& nu : d.default_factors) {
      Experiment e{"e." + nu.condition_id, nu, {}};
      PredictionProblem p{"p." + nu.condition_id, nu, {}};
      for (const auto& o : d.system.observables) {
        e.series.push_back(Series{o.name, grid(0.2, 1.0, 0.2), 2, {}});
        p.series.push_back(Series{o.name, grid(1.1, 1.5, 0.1), 1, 0.5});
      }
      experiments.push_back(e);
      problems.push_back(p);
    }
    NoiseSpec noise;
    noise.default_sigma = 0.1;
    const Dataset data = simulate_dataset(d.system, d.default_true_theta, experiments, noise, 1);
    const FitProblem fp(d.system, d.default_space, experiments, data);
    Rng rng = derive_stream(7, "gradients." + name);
    std::uniform_real_distribution<double> spread(-0.3, 0.3);
    for (int k = 0; k < kGradientPoints; ++k) {
      Vector th1 = d.default_true_theta, th2 = d.default_true_theta;
      for (Eigen::Index i = 0; i < th1.size(); ++i) {
        th1[i] *= std::exp(spread(rng));
        th2[i] *= std::exp(spread(rng));
      }
      const Derivatives zf = fp.at_theta(th1, 1, tight);
      const Vector fd_fit = central_difference([&](const Vector& t) { return fp.at_theta(t, 0, tight).value; }, th1);
      const double e1 = rel_error(zf.gradient, fd_fit);

      const double zu = std::max(fp.at_theta(th1, 0, tight).value, fp.at_theta(th2, 0, tight).value) * 2 + 1;
      const PairProblem pair(d.system, d.default_space, experiments, data, problems, th1, zu);
      const Vector U = pair.stack(th1, th2);
      const ConstrainedEvaluation ev = pair.evaluate(U, 1, tight);
      const Vector fd_dev =
          central_difference([&](const Vector& u) { return pair.evaluate(u, 0, tight).objective.value; }, U);
      const double e2 = rel_error(ev.objective.gradient, fd_dev);
      const double e = std::max(e1, e2);
      if (e > worst) worst = e, worst_model = name;
      ++points;
    }
  }
  return {worst <= kGradientRelTol && points == kGradientPoints * static_cast<int>(ModelRegistry::instance().names().size()),
          std::to_string(points) + " points, worst relative error " + fmt("%.2e", worst) + " (" + worst_model + ")"};
}

Verdict sequential() {
  const auto cfg = load_config(scenario_path("hiv.json"));
  const auto sc = resolve(cfg);
  const PipelineOutcome fitted = run("hiv.json", {"fit"});
  const DesignSettings settings = design_settings(cfg);
  DesignContext ctx = DesignContext::build(sc.model, sc.space, sc.experiments, fitted.data, sc.predictions, settings,
                                           cfg.seed);
  const auto ranking = rank_candidates(ctx, sc.candidates);
  SimulatedSource source(sc.model, truth(cfg, sc), cfg.data.simulate->noise, cfg.seed);

  std::string best;
  double best_actual = std::numeric_limits<double>::infinity();
  for (const auto& c : sc.candidates) {
    const double a = actual_impact(ctx, c, source.acquire(c)).value;
    std::printf("  brute force %s: %.6g\n", c.id.c_str(), a);
    if (a < best_actual) best_actual = a, best = c.id;
  }
  const std::string greedy = ranking.front().estimate.candidate_id;

  DesignContext seq = ctx;
  const DesignTrace trace = sequential_design(seq, sc.candidates, source, kGreedyRounds);
  const double after = seq.deviation().value;

  DesignContext all = ctx;
  Dataset merged;
  for (const auto& c : sc.candidates) merged.merge(source.acquire(c));
  std::vector<Experiment> everything = sc.experiments;
  everything.insert(everything.end(), sc.candidates.begin(), sc.candidates.end());
  Dataset data = fitted.data;
  data.merge(merged);
  estimate_missing_variances(data);
  const DesignContext full =
      DesignContext::build(sc.model, sc.space, everything, data, sc.predictions, settings, cfg.seed);
  const double all_dev = full.deviation().value;

  const bool ok = greedy == best && !trace.rounds.empty() && after <= kGreedyRatio * all_dev;
  return {ok, "greedy first " + greedy + ", brute-force best " + best + "; deviation after " +
                  std::to_string(trace.rounds.size()) + " rounds " + fmt("%.4g", after) + " vs all candidates " +
                  fmt("%.4g", all_dev)};
}

Verdict worst_case() {
  const Json r = run("worst_case_lv.json", {"validate"}).report;
  const auto& w = r["validation"]["worst_case"];
  const int trials = static_cast<int>(w["trials"].size());
  const int qualifying = w["qualifying"], held = w["held"];
  const double frac = qualifying > 0 ? static_cast<double>(held) / qualifying : 0.0;
  const bool ok = trials >= kWorstCaseTrials && qualifying > 0 && frac >= kWorstCaseFraction;
  return {ok, std::to_string(trials) + " trials, " + std::to_string(qualifying) + " predicted a reduction of at least 20%, " +
                  std::to_string(held) + " held (" + fmt("%.3f", frac) + ")"};
}

struct Criterion {
  int id;
  const char* name;
  double budget;
  Verdict (*run)();
};

const Criterion kCriteria[] = {
    {1, "Lorenz fit recovery", kFitBudget, lorenz_fit},
    {2, "Lorenz unconstrained prediction", kDeviationBudget, lorenz_deviation},
    {3, "Lotka-Volterra constrained prediction", kDeviationBudget, lv_deviation},
    {4, "impact never exceeds deviation", std::numeric_limits<double>::infinity(), impact_monotone},
    {5, "pair bound 4 eta", std::numeric_limits<double>::infinity(), proposition},
    {6, "coverage of the deviation pair", kCoverageBudget, coverage},
    {7, "centered interval mass", std::numeric_limits<double>::infinity(), lemma1},
    {8, "gradients against central differences", std::numeric_limits<double>::infinity(), gradients},
    {9, "sequential design on synthetic HIV data", kDesignBudget, sequential},
    {10, "worst-case estimate holds", std::numeric_limits<double>::infinity(), worst_case},
};

}  // namespace

int main(int argc, char** argv) {
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
  if (selected.empty()) selected = {1, 2, 3, 4, 5, 6, 7, 8, 10};
  int failures = 0;
  for (const auto& c : kCriteria) {
    if (!selected.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (secs > c.budget) {
      v.passed = false;
      v.detail += "; over the time budget of " + fmt("%.0f", c.budget) + " s";
    }
    std::printf("criterion %d %s: %s (%s; %.1f s)\n", c.id, v.passed ? "PASS" : "FAIL", c.name, v.detail.c_str(), secs);
    std::fflush(stdout);
    failures += !v.passed;
  }
  return failures == 0 ? 0 : 1;
}
