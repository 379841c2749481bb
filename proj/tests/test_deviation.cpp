#include <doctest.h>

#include "preddev/errors.hpp"
#include "preddev/deviation.hpp"
#include "preddev/estimation.hpp"
#include "preddev/models.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <numbers>

using namespace preddev;

namespace {

// x(t) = a t + b t^2 / 2 for the linear drift model started at 0.
Matrix design_rows(const std::vector<double>& t) {
  Matrix J(static_cast<Eigen::Index>(t.size()), 2);
  for (std::size_t i = 0; i < t.size(); ++i) J.row(static_cast<Eigen::Index>(i)) << t[i], t[i] * t[i] / 2;
  return J;
}

// Largest d'Qd over directions d with d'Hd <= 4 r2 and d'Cd <= eta, by a
// sweep of the direction angle.
double sweep_oracle(const Matrix& Q, const Matrix& H, double r2, const Matrix* C, double eta) {
  double best = 0.0;
  const int n = 2000000;
  for (int i = 0; i < n; ++i) {
    const double phi = std::numbers::pi * i / n;
    const Vector v{{std::cos(phi), std::sin(phi)}};
    double s2 = 4 * r2 / v.dot(H * v);
    if (C) s2 = std::min(s2, eta / v.dot(*C * v));
    best = std::max(best, s2 * v.dot(Q * v));
  }
  return best;
}

struct LinearToy {
  ModelDescriptor d = linear_drift();
  std::vector<double> t_fit{0.5, 1, 1.5, 2, 2.5, 3, 3.5, 4, 4.5, 5};
  std::vector<double> t_pred{6, 7, 8, 9, 10};
  Experiment e{"x", d.default_factors[0], {Series{"x", t_fit, 1, {}}}};
  PredictionProblem p{"p", d.default_factors[0], {Series{"x", t_pred, 1, 0.5}}};
  Dataset data;
  FitResult f;
  LinearToy() {
    NoiseSpec ns;
    ns.default_sigma = 0.5;
    data = simulate_dataset(d.system, d.default_true_theta, {e}, ns, 5);
    f = fit(d.system, d.default_space, {e}, data, FitOptions{.restarts = 1}, 1);
  }
};

}  // namespace

TEST_CASE("z_dev against a hand-computed sum, symmetric in its arguments") {
  const auto d = exp_decay();
  const PredictionProblem p{"p", d.default_factors[0], {Series{"x", {1, 2}, 3, 0.1}}};
  const Vector a{{0.5}}, b{{1.5}};
  double oracle = 0.0;
  for (double t : {1.0, 2.0}) oracle += 3 * std::pow(std::exp(-0.5 * t) - std::exp(-1.5 * t), 2) / 0.01;
  CHECK(z_dev(d.system, a, b, {p}) == doctest::Approx(oracle).epsilon(1e-7));
  CHECK(z_dev(d.system, a, b, {p}) == doctest::Approx(z_dev(d.system, b, a, {p})).epsilon(1e-12));
  CHECK(z_dev(d.system, a, a, {p}) == 0.0);
}

TEST_CASE("square root of z_dev obeys the triangle inequality") {
  const auto d = lotka_volterra();
  const PredictionProblem p{"y", d.default_factors[0], {Series{"y", {1, 2, 3, 4, 5}, 1, 1.0}}};
  Rng rng(3);
  for (int i = 0; i < 20; ++i) {
    const Vector a = d.default_space.sample(rng), b = d.default_space.sample(rng), c = d.default_space.sample(rng);
    const double ab = std::sqrt(z_dev(d.system, a, b, {p}));
    const double bc = std::sqrt(z_dev(d.system, b, c, {p}));
    const double ac = std::sqrt(z_dev(d.system, a, c, {p}));
    CHECK(ac <= (ab + bc) * (1 + 1e-9));
  }
}

TEST_CASE("linear drift deviation equals the generalized eigenvalue bound") {
  LinearToy toy;
  const double r2 = 5.0;
  const Matrix H = design_rows(toy.t_fit).transpose() * design_rows(toy.t_fit) / 0.25;
  const Matrix Q = design_rows(toy.t_pred).transpose() * design_rows(toy.t_pred) / 0.25;
  Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> es(Q, H);
  const double exact = 4 * r2 * es.eigenvalues().maxCoeff();
  DeviationOptions o;
  o.restarts = 3;
  const DeviationResult dev = solve_prediction_deviation(toy.d.system, toy.d.default_space, {toy.e}, toy.data, {toy.p},
                                                         toy.f.theta_star, toy.f.z_star + r2, o, 3);
  CHECK(dev.value == doctest::Approx(exact).epsilon(1e-5));
  CHECK(dev.fit1 <= dev.z_upper + 1e-6);
  CHECK(dev.fit2 <= dev.z_upper + 1e-6);
  CHECK(exact == doctest::Approx(sweep_oracle(Q, H, r2, nullptr, 0.0)).epsilon(1e-6));
}

TEST_CASE("linear drift impact matches the doubly constrained oracle and stays below the deviation") {
  LinearToy toy;
  const double r2 = 5.0;
  const Experiment cand{"late", toy.d.default_factors[0], {Series{"x", {5.5, 6.5}, 2, 0.5}}};
  const double eta = 3.0;
  const Matrix H = design_rows(toy.t_fit).transpose() * design_rows(toy.t_fit) / 0.25;
  const Matrix Q = design_rows(toy.t_pred).transpose() * design_rows(toy.t_pred) / 0.25;
  const Matrix C = 2 * design_rows({5.5, 6.5}).transpose() * design_rows({5.5, 6.5}) / 0.25;
  const double oracle = sweep_oracle(Q, H, r2, &C, eta);
  DeviationOptions o;
  o.restarts = 3;
  const ImpactEstimate est = estimate_impact(toy.d.system, toy.d.default_space, {toy.e}, toy.data, {toy.p}, cand,
                                             toy.f.theta_star, toy.f.z_star + r2, eta, o, 3);
  CHECK(est.value == doctest::Approx(oracle).epsilon(1e-4));
  CHECK(est.candidate_value <= eta * (1 + 1e-6));
  const DeviationResult dev = solve_prediction_deviation(toy.d.system, toy.d.default_space, {toy.e}, toy.data, {toy.p},
                                                         toy.f.theta_star, toy.f.z_star + r2, o, 3);
  CHECK(est.value <= dev.value * (1 + 1e-6));
}

TEST_CASE("an interval below the best fit is rejected") {
  LinearToy toy;
  CHECK_THROWS_AS(solve_prediction_deviation(toy.d.system, toy.d.default_space, {toy.e}, toy.data, {toy.p},
                                             toy.f.theta_star, toy.f.z_star - 1.0, DeviationOptions{}, 1),
                  ConfigError);
}

TEST_CASE("candidates overlapping completed experiments are rejected") {
  LinearToy toy;
  const Experiment dup{"dup", toy.d.default_factors[0], {Series{"x", {1.0, 7.0}, 1, {}}}};
  CHECK_THROWS_AS(check_disjoint(dup, {toy.e}), ConfigError);
  const Experiment fresh{"fresh", toy.d.default_factors[0], {Series{"x", {7.0}, 1, {}}}};
  CHECK_NOTHROW(check_disjoint(fresh, {toy.e}));
}

TEST_CASE("anchor pairs: feasible points only, ordered by prediction deviation") {
  LinearToy toy;
  const double zu = toy.f.z_star + 10.0;
  const PairProblem pp(toy.d.system, toy.d.default_space, {toy.e}, toy.data, {toy.p}, toy.f.theta_star, zu);
  const Vector s = toy.f.theta_star;
  const Vector a = s + Vector{{0.01, 0.0}}, b = s + Vector{{-0.01, 0.0}}, c = s + Vector{{0.0, 0.002}};
  const Vector far = s + Vector{{5.0, 5.0}};
  const Tolerances tol = Tolerances::fitting();
  const auto pairs = anchor_pairs(pp, {a, b, c, far}, 2, tol);
  REQUIRE(pairs.size() == 2);
  const double first = z_dev(toy.d.system, pairs[0].first, pairs[0].second, {toy.p});
  const double second = z_dev(toy.d.system, pairs[1].first, pairs[1].second, {toy.p});
  CHECK(first >= second);
  for (const auto& [x, y] : pairs) {
    CHECK(x != far);
    CHECK(y != far);
  }
  CHECK(anchor_pairs(pp, {a}, 3, tol).empty());
  CHECK(anchor_pairs(pp, {a, b}, 0, tol).empty());
}
