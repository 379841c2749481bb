#pragma once

#include <Eigen/Dense>

#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace preddev {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Known inputs that distinguish one experimental condition from another
/// (initial states, drug levels, forcing constants).
struct ExternalFactors {
  std::string condition_id;
  std::map<std::string, double> values;

  double at(const std::string& name) const;
  bool operator==(const ExternalFactors&) const = default;
};

/// A named observable: a fixed linear map of the state vector.
struct Observable {
  std::string name;
  Vector weights;
};

/// Right-hand side f(x, t; theta, nu) of a parameterized ODE system together
/// with its first derivatives and the rule producing the initial state.
///
/// Factors are bound to a dense vector (ordered as `factor_names`) before any
/// of the callbacks see them.
struct ModelSystem {
  std::string name;
  std::vector<std::string> state_names;
  std::vector<std::string> param_names;
  std::vector<std::string> factor_names;
  std::vector<Observable> observables;
  double initial_time = 0.0;

  std::function<void(const Vector& x, double t, const Vector& theta, const Vector& nu, Vector& dx)> rhs;
  /// Writes df/dx (n x n) and df/dtheta (n x p); both are pre-sized and zeroed.
  std::function<void(const Vector& x, double t, const Vector& theta, const Vector& nu, Matrix& dfdx,
                     Matrix& dfdtheta)>
      jacobians;
  std::function<Vector(const Vector& theta, const Vector& nu)> initial_state;
  /// d x(t0) / d theta, n x p.
  std::function<Matrix(const Vector& theta, const Vector& nu)> initial_sensitivity;

  int state_dim() const { return static_cast<int>(state_names.size()); }
  int param_dim() const { return static_cast<int>(param_names.size()); }

  /// Dense factor vector in `factor_names` order. Throws if a factor is missing.
  Vector bind(const ExternalFactors& nu) const;
  const Observable& observable(const std::string& name) const;
  int param_index(const std::string& name) const;
};

struct Tolerances {
  double rtol = 1e-8;
  double atol = 1e-10;
  long max_steps = 200000;

  static Tolerances fitting() { return {1e-8, 1e-10}; }
  static Tolerances barrier() { return {1e-6, 1e-8}; }
};

enum class IntegrationStatus { Success, StepUnderflow, NonFinite, TooManySteps };

const char* to_string(IntegrationStatus s);

/// Solution on a time grid. `sensitivities[k]` is d x(t_k) / d theta (n x p);
/// `second_order[k][j]` is d^2 x(t_k) / d theta d theta_j (n x p).
struct Trajectory {
  std::vector<double> times;
  Matrix states;  // times x state_dim
  std::vector<Matrix> sensitivities;
  std::vector<std::vector<Matrix>> second_order;

  IntegrationStatus status = IntegrationStatus::Success;
  double last_valid_time = 0.0;
  std::vector<double> steps;  // accepted step sizes, in order

  bool ok() const { return status == IntegrationStatus::Success; }
  bool has_sensitivities() const { return !sensitivities.empty(); }
};

/// Integrates the state equations on `times` (ascending, >= model.initial_time).
Trajectory integrate(const ModelSystem& model, const Vector& theta, const ExternalFactors& nu,
                     std::span<const double> times, const Tolerances& tol = {});

/// Integrates states and forward sensitivities jointly.
Trajectory integrate_with_sensitivities(const ModelSystem& model, const Vector& theta,
                                        const ExternalFactors& nu, std::span<const double> times,
                                        const Tolerances& tol = {});

/// States, sensitivities, and second-order sensitivities. The second-order
/// terms are forward differences of sensitivity runs that replay the base
/// run's step sequence, so they are smooth in theta.
Trajectory integrate_with_second_order(const ModelSystem& model, const Vector& theta,
                                       const ExternalFactors& nu, std::span<const double> times,
                                       const Tolerances& tol = {});

/// Same as the entry points above but with a bound factor vector; `order` is
/// 0 (states), 1 (sensitivities) or 2 (second order).
Trajectory simulate(const ModelSystem& model, const Vector& theta, const Vector& nu_bound,
                    std::span<const double> times, const Tolerances& tol, int order);

struct JacobianCheck {
  double max_rel_error_x = 0.0;
  double max_rel_error_theta = 0.0;
  bool passed = false;
};

/// Compares the model's analytic jacobians with central differences of rhs.
JacobianCheck check_jacobians(const ModelSystem& model, const Vector& x, double t, const Vector& theta,
                              const Vector& nu, double rel_tol = 1e-5);

}  // namespace preddev
