#include <doctest.h>

#include "preddev/errors.hpp"
#include "preddev/estimation.hpp"
#include "preddev/models.hpp"

#include <cmath>

using namespace preddev;

namespace {

ObservedSeries series(const std::string& obs, std::vector<double> times, std::vector<std::vector<double>> reps,
                      std::optional<double> var) {
  ObservedSeries s;
  s.condition_id = "x0=1";
  s.observable = obs;
  s.times = std::move(times);
  s.replicates = std::move(reps);
  s.variance = var;
  return s;
}

}  // namespace

TEST_CASE("replicate noise estimate") {
  const ObservedSeries s = series("x", {1, 2}, {{0, 2}, {1, 3}}, std::nullopt);
  CHECK(estimate_noise(s) == doctest::Approx(2.0));
  const ObservedSeries single = series("x", {1}, {{0.5}}, std::nullopt);
  CHECK_THROWS_AS(estimate_noise(single), DataError);
}

TEST_CASE("fit error against a hand-computed sum") {
  const auto d = exp_decay();
  Dataset data;
  data.series.push_back(series("x", {0.5, 1.0}, {{0.6, 0.62}, {0.35}}, 0.04));
  const Experiment e{"x", d.default_factors[0], {Series{"x", {0.5, 1.0}, 1, {}}}};
  const double k = 0.9;
  double oracle = 0.0;
  for (double v : {0.6, 0.62}) oracle += std::pow(v - std::exp(-k * 0.5), 2) / 0.04;
  oracle += std::pow(0.35 - std::exp(-k * 1.0), 2) / 0.04;
  CHECK(z_fit(d.system, Vector{{k}}, {e}, data) == doctest::Approx(oracle).epsilon(1e-7));
}

TEST_CASE("fit agrees with a dense grid search") {
  const auto d = exp_decay();
  const std::vector<double> t{0.25, 0.5, 1, 1.5, 2, 3};
  const Experiment e{"x", d.default_factors[0], {Series{"x", t, 2, {}}}};
  NoiseSpec noise;
  noise.default_sigma = 0.05;
  const Dataset data = simulate_dataset(d.system, Vector{{0.8}}, {e}, noise, 4);
  const FitResult f = fit(d.system, d.default_space, {e}, data, FitOptions{.restarts = 3}, 1);
  double best = std::numeric_limits<double>::infinity(), arg = 0.0;
  for (double k = 0.5; k <= 1.1; k += 1e-5) {
    double z = 0.0;
    for (const auto& s : data.series) {
      for (std::size_t i = 0; i < s.times.size(); ++i) {
        for (double v : s.replicates[i]) z += std::pow(v - std::exp(-k * s.times[i]), 2) / *s.variance;
      }
    }
    if (z < best) best = z, arg = k;
  }
  CHECK(f.theta_star[0] == doctest::Approx(arg).epsilon(1e-4));
  CHECK(f.z_star <= best + 1e-6);
}

TEST_CASE("percentile is the ceil(q n) order statistic") {
  const std::vector<double> v{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  CHECK(percentile(v, 0.025) == 1);
  CHECK(percentile(v, 0.5) == 5);
  CHECK(percentile(v, 0.975) == 10);
  CHECK(percentile(v, 0.31) == 4);
  CHECK_THROWS(percentile({}, 0.5));
}

TEST_CASE("bootstrap interval brackets the resampled errors") {
  const auto d = exp_decay();
  const Experiment e{"x", d.default_factors[0], {Series{"x", {0.5, 1, 2, 3}, 3, {}}}};
  NoiseSpec noise;
  noise.default_sigma = 0.05;
  noise.estimate_variance = true;
  Dataset data = simulate_dataset(d.system, Vector{{1.0}}, {e}, noise, 9);
  BootstrapOptions opt;
  opt.samples = 100;
  opt.fit.restarts = 2;
  const FitResult f = fit_with_interval(d.system, d.default_space, {e}, data, opt, 2);
  REQUIRE(f.has_interval());
  CHECK(f.z_lower <= f.z_upper);
  CHECK(f.bootstrap_sample.size() + static_cast<std::size_t>(f.bootstrap_discarded) == 100);
  CHECK(std::is_sorted(f.bootstrap_sample.begin(), f.bootstrap_sample.end()));
  CHECK(f.z_upper == percentile(f.bootstrap_sample, 0.975));
  opt.samples = 50;
  CHECK_THROWS_AS(fit_with_interval(d.system, d.default_space, {e}, data, opt, 2), ConfigError);
}

TEST_CASE("fits are reproducible for a fixed seed") {
  const auto d = lotka_volterra();
  const Experiment e{"x", d.default_factors[0], {Series{"x", {1, 2, 3, 4, 5, 6}, 1, {}}}};
  NoiseSpec noise;
  const Dataset data = simulate_dataset(d.system, d.default_true_theta, {e}, noise, 3);
  const FitResult a = fit(d.system, d.default_space, {e}, data, FitOptions{.restarts = 2}, 7);
  const FitResult b = fit(d.system, d.default_space, {e}, data, FitOptions{.restarts = 2}, 7);
  CHECK(a.z_star == b.z_star);
  CHECK(a.theta_star == b.theta_star);
}
