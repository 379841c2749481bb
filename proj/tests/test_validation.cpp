#include <doctest.h>

#include "preddev/errors.hpp"
#include "preddev/validation.hpp"

#include <algorithm>
#include <cmath>

using namespace preddev;

namespace {

std::vector<double> grid(double a, double b, double step) {
  std::vector<double> v;
  for (int i = 0; a + i * step <= b + 1e-9; ++i) v.push_back(a + i * step);
  return v;
}

}  // namespace

TEST_CASE("centered intervals carry the most mass") {
  const auto xs = grid(0, 3, 0.1), as = grid(-3, 3, 0.1);
  for (const auto dist : {NoiseDistribution::Normal, NoiseDistribution::Uniform, NoiseDistribution::Laplace,
                          NoiseDistribution::StudentT}) {
    NoiseSpec n;
    n.distribution = dist;
    const Lemma1Report r = check_lemma1(n, xs, as);
    CAPTURE(r.distribution);
    CHECK(r.checks == static_cast<int>(xs.size() * as.size()));
    CHECK(r.violations == 0);
  }
}

TEST_CASE("uniform on [-1, 1] by hand") {
  const auto F = [](double x) { return std::clamp((x + 1) / 2, 0.0, 1.0); };
  CHECK(F(0.9) - F(0.1) == doctest::Approx(0.4));
  CHECK(F(0.4) - F(-0.4) == doctest::Approx(0.4));
  CHECK(check_lemma1("uniform[-1,1]", F, grid(0, 3, 0.1), grid(-3, 3, 0.1)).violations == 0);
}

TEST_CASE("an asymmetric distribution is caught") {
  const auto F = [](double x) { return x <= 0 ? 0.0 : 1 - std::exp(-x); };
  CHECK(check_lemma1("exponential", F, grid(0, 3, 0.1), grid(-3, 3, 0.1)).violations > 0);
}

TEST_CASE("pair bound holds on lotka-volterra candidate data") {
  const auto d = lotka_volterra();
  PropositionSpec spec;
  spec.model = d.system;
  spec.space = d.default_space;
  spec.center = d.default_true_theta;
  spec.candidate = Experiment{"y", d.default_factors[0], {Series{"y", {1, 2, 3, 4}, 2, {}}}};
  NoiseSpec noise;
  spec.candidate_data = simulate_dataset(d.system, d.default_true_theta, {spec.candidate}, noise, 8);
  spec.eta = 15.0;
  spec.pairs = 200;
  const PropositionReport r = check_proposition(spec, 1);
  CHECK(r.pairs == 200);
  CHECK(r.boundary_pairs > 0);
  CHECK(r.chain_violations == 0);
  CHECK(r.bound_violations == 0);
  CHECK(r.max_dev_over_bound <= 1.0 + 1e-9);
  CHECK(r.passed);
}

TEST_CASE("binomial slack") {
  CHECK(binomial_slack(0.95, 200) == doctest::Approx(3 * std::sqrt(0.95 * 0.05 / 200)));
}

TEST_CASE("small linear coverage study") {
  const auto d = linear_drift();
  CoverageSpec spec;
  spec.model = d.system;
  spec.space = d.default_space;
  spec.theta_true = d.default_true_theta;
  spec.noise.default_sigma = 0.5;
  spec.experiments = {Experiment{"x", d.default_factors[0], {Series{"x", grid(0.5, 5, 0.5), 1, {}}}}};
  spec.problems = {Experiment{"p", d.default_factors[0], {Series{"x", grid(6, 10, 1), 1, 0.5}}}};
  spec.trials = 10;
  spec.bootstrap.samples = 100;
  spec.bootstrap.fit.restarts = 2;
  spec.deviation.restarts = 2;
  const CoverageStudy s = run_coverage_study(spec, 3);
  CHECK(s.used + s.excluded == 10);
  CHECK(s.coverage >= 0.8);
  CHECK(s.valid);
}
