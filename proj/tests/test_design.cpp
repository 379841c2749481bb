#include <doctest.h>

#include "preddev/errors.hpp"
#include "preddev/design.hpp"

#include <cmath>
#include <set>

using namespace preddev;

namespace {

// Regularized lower incomplete gamma P(s, x) by its power series.
double lower_gamma_p(double s, double x) {
  double term = 1.0 / s, sum = term;
  for (int n = 1; n < 500; ++n) {
    term *= x / (s + n);
    sum += term;
  }
  return sum * std::exp(-x + s * std::log(x) - std::lgamma(s));
}

double chi2_quantile_oracle(double k, double p) {
  double lo = 0.0, hi = 100.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (lower_gamma_p(k / 2, mid / 2) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

struct Toy {
  ModelDescriptor d = linear_drift();
  Experiment e{"x", d.default_factors[0], {Series{"x", {0.5, 1, 1.5, 2, 2.5, 3}, 2, {}}}};
  PredictionProblem p{"p", d.default_factors[0], {Series{"x", {8, 9, 10}, 1, 0.5}}};
  std::vector<Experiment> candidates{
      {"early", d.default_factors[0], {Series{"x", {0.1, 0.2}, 2, {}}}},
      {"late", d.default_factors[0], {Series{"x", {6, 7}, 2, {}}}},
      {"mid", d.default_factors[0], {Series{"x", {3.5, 4}, 2, {}}}},
  };
  NoiseSpec noise;
  DesignSettings settings;
  Toy() {
    noise.default_sigma = 0.5;
    noise.estimate_variance = true;
    settings.bootstrap.samples = 100;
    settings.bootstrap.fit.restarts = 2;
    settings.deviation.restarts = 2;
  }
};

}  // namespace

TEST_CASE("eta rules") {
  CHECK(eta_default(40.0, 5, 10) == doctest::Approx(20.0));
  CHECK(eta_default(40.0, 5, 10, EtaOptions{.multiplier = 4.0}) == doctest::Approx(80.0));
  CHECK(eta_default(40.0, 0, 10) == 0.0);
  CHECK(eta_default(40.0, 3, 10, EtaOptions{.mode = EtaMode::Fixed, .fixed = 2.5}) == doctest::Approx(2.5));
  const double q = eta_default(40.0, 3, 10, EtaOptions{.mode = EtaMode::ChiSquare});
  CHECK(q == doctest::Approx(chi2_quantile_oracle(3, 0.95)).epsilon(1e-8));
  CHECK(q == doctest::Approx(7.815).epsilon(1e-4));
  CHECK_THROWS_AS(parse_eta_mode("median"), ConfigError);
}

TEST_CASE("normal noise distribution function") {
  NoiseSpec n;
  CHECK(n.cdf(2.0) - n.cdf(0.0) == doctest::Approx(0.5 * std::erf(2.0 / std::sqrt(2.0))).epsilon(1e-12));
  CHECK(n.cdf(2.0) - n.cdf(0.0) == doctest::Approx(0.47725).epsilon(1e-5));
  CHECK(n.cdf(1.0) - n.cdf(-1.0) == doctest::Approx(0.68269).epsilon(1e-5));
}

TEST_CASE("ranking is ascending and every estimate stays below the deviation") {
  Toy toy;
  SimulatedSource source(toy.d.system, toy.d.default_true_theta, toy.noise, 4);
  const Dataset data = source.acquire(toy.e);
  DesignContext ctx = DesignContext::build(toy.d.system, toy.d.default_space, {toy.e}, data, {toy.p}, toy.settings, 2);
  const auto ranking = rank_candidates(ctx, toy.candidates);
  REQUIRE(ranking.size() == 3);
  for (std::size_t i = 0; i + 1 < ranking.size(); ++i) {
    CHECK(ranking[i].estimate.value <= ranking[i + 1].estimate.value);
  }
  for (const auto& r : ranking) {
    CHECK_FALSE(r.estimate.failed);
    CHECK(r.estimate.value <= ctx.deviation().value * (1 + 1e-6));
  }
  CHECK(ranking.front().estimate.candidate_id == "late");
}

TEST_CASE("simulated sources are reproducible per candidate") {
  Toy toy;
  SimulatedSource a(toy.d.system, toy.d.default_true_theta, toy.noise, 4);
  SimulatedSource b(toy.d.system, toy.d.default_true_theta, toy.noise, 4);
  a.acquire(toy.candidates[0]);
  const Dataset x = a.acquire(toy.candidates[1]);
  const Dataset y = b.acquire(toy.candidates[1]);
  CHECK(x.series.front().replicates == y.series.front().replicates);
}

TEST_CASE("sequential design picks distinct candidates and records each round") {
  Toy toy;
  SimulatedSource source(toy.d.system, toy.d.default_true_theta, toy.noise, 4);
  const Dataset data = source.acquire(toy.e);
  DesignContext ctx = DesignContext::build(toy.d.system, toy.d.default_space, {toy.e}, data, {toy.p}, toy.settings, 2);
  const DesignTrace trace = sequential_design(ctx, toy.candidates, source, 2);
  REQUIRE(trace.rounds.size() == 2);
  std::set<std::string> chosen;
  for (const auto& r : trace.rounds) {
    CHECK_FALSE(r.failed);
    chosen.insert(r.chosen);
    CHECK(r.change == doctest::Approx(r.deviation_after - r.deviation_before));
  }
  CHECK(chosen.size() == 2);
  CHECK(ctx.experiments().size() == 3);
}
