#pragma once

#include "preddev/ode.hpp"
#include "preddev/rng.hpp"

#include <string>
#include <vector>

namespace preddev {

/// Box and scaling for the free parameters. Optimizers work on internal
/// coordinates u, with theta = exp(u) on log-scaled entries and theta = u
/// otherwise. Points outside the box are treated as infeasible.
struct ParameterSpace {
  std::vector<std::string> names;
  Vector lower;
  Vector upper;
  std::vector<bool> log_scale;

  /// Box of [center / factor, center * factor], log-scaled throughout.
  static ParameterSpace around(const std::vector<std::string>& names, const Vector& center, double factor);

  int dim() const { return static_cast<int>(names.size()); }
  bool contains(const Vector& theta) const;

  Vector to_internal(const Vector& theta) const;
  Vector to_theta(const Vector& u) const;
  /// d theta / d u, elementwise.
  Vector dtheta(const Vector& u) const;

  /// Chain rule from theta-space derivatives to internal coordinates.
  Vector gradient_to_internal(const Vector& u, const Vector& grad_theta) const;
  Matrix hessian_to_internal(const Vector& u, const Vector& grad_theta, const Matrix& hess_theta) const;

  /// Log-uniform draw inside the box (uniform on linear-scaled entries).
  Vector sample(Rng& rng) const;

  void validate() const;
};

/// Two stacked copies of `space`, for pair problems over (theta1, theta2).
ParameterSpace pair_space(const ParameterSpace& space);

}  // namespace preddev
