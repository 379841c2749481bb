#include "preddev/optimize.hpp"

#include <cmath>
#include <limits>

#include <Eigen/Eigenvalues>

namespace preddev {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr Eigen::Index kExactLimit = 60;

double boundary_step(const Vector& p, const Vector& d, double radius) {
  const double a = d.squaredNorm();
  const double b = 2.0 * p.dot(d);
  const double c = p.squaredNorm() - radius * radius;
  const double disc = std::max(0.0, b * b - 4.0 * a * c);
  return (-b + std::sqrt(disc)) / (2.0 * a);
}

}  // namespace

Vector trust_region_step(const Matrix& H, const Vector& g, double radius) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (H + H.transpose()));
  const Vector& lam = es.eigenvalues();
  const Matrix& V = es.eigenvectors();
  const Vector gt = V.transpose() * g;
  const double lmin = lam.minCoeff();
  const double scale = std::max(1.0, lam.cwiseAbs().maxCoeff());
  auto step_norm = [&](double shift) {
    double s2 = 0.0;
    for (Eigen::Index i = 0; i < lam.size(); ++i) {
      const double d = lam[i] + shift;
      s2 += gt[i] * gt[i] / (d * d);
    }
    return std::sqrt(s2);
  };
  auto step = [&](double shift) {
    Vector y(lam.size());
    for (Eigen::Index i = 0; i < lam.size(); ++i) {
      const double d = lam[i] + shift;
      y[i] = d > 0.0 ? -gt[i] / d : 0.0;
    }
    return y;
  };
  if (lmin > 1e-14 * scale && step_norm(0.0) <= radius) return V * step(0.0);
  double lo = std::max(0.0, -lmin);
  const double tiny = 1e-14 * scale;
  if (step_norm(lo + tiny) <= radius) {
    // Hard case: fill up to the boundary along the lowest eigenvector.
    Vector y = step(lo + tiny);
    for (Eigen::Index i = 0; i < lam.size(); ++i) {
      if (lam[i] + lo <= tiny) y[i] = 0.0;
    }
    const double rest = radius * radius - y.squaredNorm();
    Eigen::Index k = 0;
    lam.minCoeff(&k);
    y[k] = std::sqrt(std::max(0.0, rest));
    if (gt[k] > 0.0) y[k] = -y[k];
    return V * y;
  }
  lo += tiny;
  double hi = lo + gt.norm() / radius + scale;
  while (step_norm(hi) > radius) hi *= 2.0;
  for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (step_norm(mid) > radius) lo = mid; else hi = mid;
  }
  return V * step(hi);
}

Vector steihaug_cg(const Matrix& H, const Vector& g, double radius, double tol) {
  Vector p = Vector::Zero(g.size());
  Vector r = g;
  if (r.norm() <= tol) return p;
  Vector d = -r;
  const int max_iter = 2 * static_cast<int>(g.size()) + 10;
  for (int k = 0; k < max_iter; ++k) {
    const Vector Hd = H * d;
    const double dHd = d.dot(Hd);
    if (!(dHd > 0.0)) return p + boundary_step(p, d, radius) * d;
    const double rr = r.dot(r);
    const double alpha = rr / dHd;
    const Vector next = p + alpha * d;
    if (next.norm() >= radius) return p + boundary_step(p, d, radius) * d;
    p = next;
    r += alpha * Hd;
    if (r.norm() <= tol) return p;
    d = -r + (r.dot(r) / rr) * d;
  }
  return p;
}

MinimizeResult minimize(const Objective& f, const Vector& x0, const MinimizeOptions& options) {
  MinimizeResult res;
  res.x = x0;
  Derivatives cur = f(x0, 2);
  res.evaluations = 1;
  if (!std::isfinite(cur.value)) {
    res.value = kInf;
    res.reason = "start point outside the domain";
    return res;
  }
  double radius = options.initial_radius;
  for (; res.iterations < options.max_iterations; ++res.iterations) {
    const double gnorm = cur.gradient.lpNorm<Eigen::Infinity>();
    if (gnorm <= std::max(options.gtol_rel * std::max(1.0, std::abs(cur.value)), options.gtol_abs)) {
      res.converged = true;
      res.reason = "gradient tolerance";
      break;
    }
    const double g2 = cur.gradient.norm();
    const Vector p = g2 > 0.0 && cur.gradient.size() <= kExactLimit
                         ? trust_region_step(cur.hessian, cur.gradient, radius)
                         : steihaug_cg(cur.hessian, cur.gradient, radius, std::min(0.5, std::sqrt(g2)) * g2);
    const double pn = p.norm();
    const double pred = -(cur.gradient.dot(p) + 0.5 * p.dot(cur.hessian * p));
    double actual = -kInf;
    Derivatives trial;
    if (pred > 0.0) {
      trial = f(res.x + p, 0);
      ++res.evaluations;
      if (std::isfinite(trial.value)) actual = cur.value - trial.value;
    }
    const double rho = pred > 0.0 ? actual / pred : -kInf;
    if (rho < 0.25) {
      radius = 0.25 * (pn > 0.0 ? std::min(pn, radius) : radius);
    } else if (rho > 0.75 && pn >= 0.99 * radius) {
      radius = std::min(2.0 * radius, options.max_radius);
    }
    if (rho > 1e-4) {
      const double before = cur.value;
      Derivatives next = f(res.x + p, 2);
      ++res.evaluations;
      if (std::isfinite(next.value)) {
        res.x += p;
        cur = std::move(next);
        if (before - cur.value <= options.ftol_rel * std::max(1.0, std::abs(before))) {
          ++res.iterations;
          res.converged = true;
          res.reason = "relative decrease";
          break;
        }
      } else {
        radius *= 0.25;
      }
    }
    if (radius < options.min_radius) {
      res.converged = true;
      res.reason = "trust region collapsed";
      break;
    }
  }
  if (res.reason.empty()) res.reason = "iteration limit";
  res.value = cur.value;
  res.gradient = cur.gradient;
  return res;
}

namespace {

bool strictly_feasible(const ConstrainedEvaluation& ev) {
  if (!std::isfinite(ev.objective.value)) return false;
  for (const auto& c : ev.constraints) {
    if (!(c.value > 0.0) || !std::isfinite(c.value)) return false;
  }
  return true;
}

Derivatives barrier_value(const ConstrainedEvaluation& ev, double mu, int order) {
  Derivatives d;
  if (!strictly_feasible(ev)) {
    d.value = kInf;
    return d;
  }
  d.value = ev.objective.value;
  if (order >= 1) d.gradient = ev.objective.gradient;
  if (order >= 2) d.hessian = ev.objective.hessian;
  for (const auto& c : ev.constraints) {
    d.value -= mu * std::log(c.value);
    if (order >= 1) d.gradient -= (mu / c.value) * c.gradient;
    if (order >= 2) {
      d.hessian -= (mu / c.value) * c.hessian;
      d.hessian += (mu / (c.value * c.value)) * c.gradient * c.gradient.transpose();
    }
  }
  return d;
}

}  // namespace

BarrierResult barrier_minimize(const ConstrainedProblem& problem, const Vector& x0, const BarrierOptions& options,
                               const Restore& restore) {
  BarrierResult res;
  res.x = x0;
  const ConstrainedEvaluation start = problem(x0, 0, options.polish_iterations >= options.outer_iterations);
  if (!strictly_feasible(start)) {
    res.final = start;
    res.reason = "start point is not strictly feasible";
    return res;
  }
  double mu = std::max(options.mu_floor, std::abs(start.objective.value) * options.mu_scale);
  for (int k = 0; k < options.outer_iterations; ++k) {
    const bool polish = k >= options.outer_iterations - options.polish_iterations;
    if (polish && restore && k == options.outer_iterations - options.polish_iterations &&
        !strictly_feasible(problem(res.x, 0, true))) {
      res.x = restore(res.x);
    }
    const Objective phi = [&](const Vector& x, int order) {
      return barrier_value(problem(x, order, polish), mu, order);
    };
    MinimizeOptions inner;
    inner.gtol_abs = options.inner_gtol * mu;
    inner.gtol_rel = 1e-9;
    inner.max_iterations = options.inner_max_iterations;
    inner.initial_radius = options.initial_radius;
    const MinimizeResult r = minimize(phi, res.x, inner);
    ++res.outer_iterations;
    res.inner_iterations += r.iterations;
    if (!std::isfinite(r.value)) {
      res.reason = "iterate left the feasible region when accuracy changed";
      break;
    }
    res.x = r.x;
    res.mu = mu;
    mu *= options.reduction;
  }
  res.final = problem(res.x, 0, true);
  res.feasible = strictly_feasible(res.final);
  if (res.reason.empty()) res.reason = res.feasible ? "completed" : "final point infeasible";
  return res;
}

}  // namespace preddev
