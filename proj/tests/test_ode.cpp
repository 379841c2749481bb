#include <doctest.h>

#include "preddev/models.hpp"
#include "preddev/ode.hpp"

#include <array>
#include <cmath>

using namespace preddev;

namespace {

// Classical RK4 on the Lorenz equations, fixed step.
std::array<double, 3> lorenz_rk4(std::array<double, 3> s, const std::array<double, 3>& th, double t_end, double h) {
  auto f = [&](const std::array<double, 3>& v) {
    return std::array<double, 3>{th[0] * (v[1] - v[0]), v[0] * (th[1] - v[2]) - v[1], v[0] * v[1] - th[2] * v[2]};
  };
  const long n = std::lround(t_end / h);
  for (long i = 0; i < n; ++i) {
    auto k1 = f(s);
    std::array<double, 3> a, b, c;
    for (int j = 0; j < 3; ++j) a[j] = s[j] + 0.5 * h * k1[j];
    auto k2 = f(a);
    for (int j = 0; j < 3; ++j) b[j] = s[j] + 0.5 * h * k2[j];
    auto k3 = f(b);
    for (int j = 0; j < 3; ++j) c[j] = s[j] + h * k3[j];
    auto k4 = f(c);
    for (int j = 0; j < 3; ++j) s[j] += h / 6.0 * (k1[j] + 2 * k2[j] + 2 * k3[j] + k4[j]);
  }
  return s;
}

}  // namespace

TEST_CASE("exponential decay value and sensitivity at t = 1") {
  const auto d = exp_decay();
  const std::vector<double> t{1.0};
  const Trajectory tr = integrate_with_sensitivities(d.system, Vector{{1.0}}, d.default_factors[0], t);
  REQUIRE(tr.ok());
  CHECK(tr.states(0, 0) == doctest::Approx(0.3678794).epsilon(1e-6));
  CHECK(tr.sensitivities[0](0, 0) == doctest::Approx(-0.3678794).epsilon(1e-6));
}

TEST_CASE("lorenz matches a fine fixed-step RK4 reference") {
  const auto d = lorenz();
  const std::vector<double> t{0.5, 1.0};
  const Trajectory tr = integrate(d.system, d.default_true_theta, d.default_factors[0], t);
  REQUIRE(tr.ok());
  const auto half = lorenz_rk4({10, 20, 3}, {7, 38, 5}, 0.5, 1e-5);
  const auto one = lorenz_rk4({10, 20, 3}, {7, 38, 5}, 1.0, 1e-5);
  for (int j = 0; j < 3; ++j) {
    CHECK(std::abs(tr.states(0, j) - half[j]) < 1e-3);
    CHECK(std::abs(tr.states(1, j) - one[j]) < 1e-3);
  }
}

TEST_CASE("rhs hand values") {
  Vector dx;
  const auto lz = lorenz();
  lz.system.rhs(Vector{{10.0, 20.0, 3.0}}, 0.0, Vector{{7.0, 38.0, 5.0}}, Vector(), dx);
  CHECK(dx[0] == doctest::Approx(70.0));
  CHECK(dx[1] == doctest::Approx(330.0));
  CHECK(dx[2] == doctest::Approx(185.0));
  const auto lv = lotka_volterra();
  lv.system.rhs(Vector{{10.0, 10.0}}, 0.0, Vector{{1.0, 0.05, 1.0, 1.0}}, Vector(), dx);
  CHECK(dx[0] == doctest::Approx(5.0));
  CHECK(dx[1] == doctest::Approx(-5.0));
}

TEST_CASE("forward sensitivities agree with central differences") {
  for (const std::string name : {"lorenz", "lotka_volterra", "hiv_ifn"}) {
    CAPTURE(name);
    const auto d = ModelRegistry::instance().get(name);
    const Vector th = d.default_true_theta;
    const std::vector<double> t{0.25, 0.5, 1.0};
    const ExternalFactors& nu = d.default_factors.back();
    const Trajectory tr = integrate_with_sensitivities(d.system, th, nu, t);
    REQUIRE(tr.ok());
    for (int j = 0; j < th.size(); ++j) {
      const double h = 1e-6 * std::max(1.0, std::abs(th[j]));
      Vector up = th, dn = th;
      up[j] += h;
      dn[j] -= h;
      const Trajectory a = integrate(d.system, up, nu, t, {1e-12, 1e-14});
      const Trajectory b = integrate(d.system, dn, nu, t, {1e-12, 1e-14});
      for (std::size_t k = 0; k < t.size(); ++k) {
        for (int i = 0; i < d.system.state_dim(); ++i) {
          const double fd = (a.states(k, i) - b.states(k, i)) / (2 * h);
          const double an = tr.sensitivities[k](i, j);
          CHECK(std::abs(fd - an) <= 1e-4 * std::max(1.0, std::abs(fd)));
        }
      }
    }
  }
}

TEST_CASE("second-order sensitivities agree with differences of first-order ones") {
  const auto d = lotka_volterra();
  const Vector th = d.default_true_theta;
  const std::vector<double> t{1.0, 2.0};
  const Trajectory tr = integrate_with_second_order(d.system, th, d.default_factors[0], t);
  REQUIRE(tr.ok());
  for (int j = 0; j < th.size(); ++j) {
    const double h = 1e-5;
    Vector up = th, dn = th;
    up[j] += h;
    dn[j] -= h;
    const Trajectory a = integrate_with_sensitivities(d.system, up, d.default_factors[0], t, {1e-12, 1e-14});
    const Trajectory b = integrate_with_sensitivities(d.system, dn, d.default_factors[0], t, {1e-12, 1e-14});
    for (std::size_t k = 0; k < t.size(); ++k) {
      const Matrix fd = (a.sensitivities[k] - b.sensitivities[k]) / (2 * h);
      CHECK((fd - tr.second_order[k][static_cast<std::size_t>(j)]).cwiseAbs().maxCoeff() <=
            1e-3 * std::max(1.0, fd.cwiseAbs().maxCoeff()));
    }
  }
}

TEST_CASE("analytic jacobians of every registry model") {
  for (const auto& name : ModelRegistry::instance().names()) {
    CAPTURE(name);
    const auto d = ModelRegistry::instance().get(name);
    const Vector nu = d.system.bind(d.default_factors.back());
    const Vector x0 = d.system.initial_state(d.default_true_theta, nu);
    const Vector x = x0.array() + 0.5;
    CHECK(check_jacobians(d.system, x, 0.3, d.default_true_theta, nu).passed);
  }
}

TEST_CASE("lotka-volterra rate symmetry leaves both trajectories unchanged") {
  const auto d = lotka_volterra();
  const std::vector<double> t{1.0, 3.0, 7.0};
  const Vector th = d.default_true_theta;
  const Trajectory base = integrate(d.system, th, d.default_factors[0], t, {1e-11, 1e-13});
  for (double k : {0.5, 2.0, 3.7}) {
    Vector s = th;
    s[0] *= k;
    s[1] *= k;
    s[2] /= k;
    s[3] /= k;
    const Trajectory moved = integrate(d.system, s, d.default_factors[0], t, {1e-11, 1e-13});
    CHECK((moved.states - base.states).cwiseAbs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("hiv model with no interferon reduces to exponential growth of CI") {
  const auto d = hiv_ifn();
  const Vector th = d.default_true_theta;
  const Vector nu = d.system.bind(hiv_condition(0.0));
  Vector x = d.system.initial_state(th, nu);
  x[1] = 0.3;
  Vector dx;
  d.system.rhs(x, 0.0, th, nu, dx);
  CHECK(dx[1] == doctest::Approx((th[0] - th[2]) * x[1]));
}

TEST_CASE("integration failure is reported, not thrown") {
  ModelSystem m = exp_decay().system;
  m.rhs = [](const Vector& x, double, const Vector&, const Vector&, Vector& dx) {
    dx.resize(1);
    dx[0] = x[0] * x[0];
  };
  const std::vector<double> t{2.0};
  const Trajectory tr = integrate(m, Vector{{1.0}}, exp_decay().default_factors[0], t);
  CHECK_FALSE(tr.ok());
}
