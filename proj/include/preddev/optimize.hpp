#pragma once

#include "preddev/ode.hpp"

#include <functional>
#include <string>
#include <vector>

namespace preddev {

/// Value with optional gradient and Hessian (sized only when requested).
/// A value of +inf marks a point outside the domain.
struct Derivatives {
  double value = 0.0;
  Vector gradient;
  Matrix hessian;
};

/// Objective callback; `order` is 0, 1 or 2.
using Objective = std::function<Derivatives(const Vector& x, int order)>;

struct MinimizeOptions {
  double gtol_rel = 1e-6;   // ||g||_inf <= gtol_rel * max(1, |f|)
  double gtol_abs = 0.0;    // or ||g||_inf <= gtol_abs
  double ftol_rel = 1e-10;  // relative decrease of an accepted step
  int max_iterations = 500;
  double initial_radius = 1.0;
  double max_radius = 100.0;
  double min_radius = 1e-12;
};

struct MinimizeResult {
  Vector x;
  double value = 0.0;
  Vector gradient;
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
  std::string reason;
};

/// Trust-region Newton method on the supplied Hessian. Subproblems are solved
/// exactly for small problems and by Steihaug conjugate gradients otherwise.
MinimizeResult minimize(const Objective& f, const Vector& x0, const MinimizeOptions& options = {});

/// Global minimizer of g'p + p'Hp/2 subject to ||p|| <= radius, from an
/// eigendecomposition of H (hard case included).
Vector trust_region_step(const Matrix& H, const Vector& g, double radius);

/// Steihaug-Toint truncated CG for min g'p + p'Hp/2 subject to ||p|| <= radius.
Vector steihaug_cg(const Matrix& H, const Vector& g, double radius, double tol);

/// Objective and inequality constraints c_i(x) > 0 evaluated together.
struct ConstrainedEvaluation {
  Derivatives objective;
  std::vector<Derivatives> constraints;
};

/// `polish` requests fitting-grade accuracy instead of the cheaper
/// barrier-phase evaluation.
using ConstrainedProblem = std::function<ConstrainedEvaluation(const Vector& x, int order, bool polish)>;

struct BarrierOptions {
  double mu_floor = 1.0;        // mu_0 = max(mu_floor, |f(x0)| * mu_scale)
  double mu_scale = 0.01;
  double reduction = 0.2;
  int outer_iterations = 8;
  int polish_iterations = 2;    // final outer iterations run with polish = true
  double inner_gtol = 1e-5;     // inner ||g||_inf <= inner_gtol * mu
  int inner_max_iterations = 150;
  double initial_radius = 0.5;
};

struct BarrierResult {
  Vector x;
  ConstrainedEvaluation final;  // at x, polish accuracy, order 0
  double mu = 0.0;
  int outer_iterations = 0;
  int inner_iterations = 0;
  bool feasible = false;
  std::string reason;
};

/// Maps a point that became infeasible at polish accuracy back into the
/// strictly feasible region.
using Restore = std::function<Vector(const Vector& x)>;

/// Minimizes f(x) - mu * sum log c_i(x) for a geometric sequence of mu,
/// starting from a strictly feasible x0.
BarrierResult barrier_minimize(const ConstrainedProblem& problem, const Vector& x0,
                               const BarrierOptions& options = {}, const Restore& restore = {});

}  // namespace preddev
