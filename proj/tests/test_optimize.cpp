#include <doctest.h>

#include "preddev/optimize.hpp"

#include <cmath>
#include <numbers>

using namespace preddev;

TEST_CASE("exact trust-region step beats every point of the ball") {
  const Matrix H{{1.0, 2.0}, {2.0, -3.0}};
  const Vector g{{0.3, -1.0}};
  const double radius = 0.7;
  const Vector p = trust_region_step(H, g, radius);
  auto model = [&](const Vector& s) { return g.dot(s) + 0.5 * s.dot(H * s); };
  CHECK(p.norm() <= radius * (1 + 1e-9));
  double best = 0.0;
  for (int i = 0; i < 400; ++i) {
    for (int j = 1; j <= 100; ++j) {
      const double phi = 2 * std::numbers::pi * i / 400, r = radius * j / 100;
      best = std::min(best, model(Vector{{r * std::cos(phi), r * std::sin(phi)}}));
    }
  }
  CHECK(model(p) <= best + 1e-9);
}

TEST_CASE("exact trust-region step handles the hard case") {
  const Matrix H{{-2.0, 0.0}, {0.0, 1.0}};
  const Vector g{{0.0, 0.5}};
  const Vector p = trust_region_step(H, g, 1.0);
  CHECK(p.norm() == doctest::Approx(1.0));
  CHECK(std::abs(p[0]) > 0.5);
}

TEST_CASE("trust-region Newton minimizes the Rosenbrock function") {
  const Objective f = [](const Vector& x, int order) {
    Derivatives d;
    const double a = 1 - x[0], b = x[1] - x[0] * x[0];
    d.value = a * a + 100 * b * b;
    if (order >= 1) d.gradient = Vector{{-2 * a - 400 * x[0] * b, 200 * b}};
    if (order >= 2) d.hessian = Matrix{{2 - 400 * b + 800 * x[0] * x[0], -400 * x[0]}, {-400 * x[0], 200}};
    return d;
  };
  const MinimizeResult r = minimize(f, Vector{{-1.2, 1.0}});
  CHECK(r.converged);
  CHECK(r.x[0] == doctest::Approx(1.0).epsilon(1e-5));
  CHECK(r.x[1] == doctest::Approx(1.0).epsilon(1e-5));
}

TEST_CASE("log barrier finds the constrained maximum of a linear function on a disk") {
  // maximize x + y on x^2 + y^2 <= 2, optimum (1, 1)
  const ConstrainedProblem problem = [](const Vector& x, int order, bool) {
    ConstrainedEvaluation ev;
    ev.objective.value = -(x[0] + x[1]);
    Derivatives c;
    c.value = 2 - x.squaredNorm();
    if (order >= 1) {
      ev.objective.gradient = Vector{{-1.0, -1.0}};
      c.gradient = -2 * x;
    }
    if (order >= 2) {
      ev.objective.hessian = Matrix::Zero(2, 2);
      c.hessian = -2 * Matrix::Identity(2, 2);
    }
    ev.constraints.push_back(c);
    return ev;
  };
  const BarrierResult r = barrier_minimize(problem, Vector{{0.0, 0.0}}, BarrierOptions{}, {});
  CHECK(r.feasible);
  CHECK(r.x[0] == doctest::Approx(1.0).epsilon(1e-4));
  CHECK(r.x[1] == doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("barrier refuses an infeasible start") {
  const ConstrainedProblem problem = [](const Vector& x, int, bool) {
    ConstrainedEvaluation ev;
    ev.objective.value = x[0];
    ev.constraints.push_back(Derivatives{.value = -1.0});
    return ev;
  };
  const BarrierResult r = barrier_minimize(problem, Vector{{0.0}}, BarrierOptions{}, {});
  CHECK_FALSE(r.feasible);
}
