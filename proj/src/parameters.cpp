#include "preddev/parameters.hpp"
#include "preddev/errors.hpp"

#include <cmath>
#include <stdexcept>

namespace preddev {

ParameterSpace ParameterSpace::around(const std::vector<std::string>& names, const Vector& center,
                                      double factor) {
  ParameterSpace s;
  s.names = names;
  s.lower = center.cwiseAbs() / factor;
  s.upper = center.cwiseAbs() * factor;
  s.log_scale.assign(names.size(), true);
  return s;
}

bool ParameterSpace::contains(const Vector& theta) const {
  if (theta.size() != lower.size()) return false;
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    if (!(theta[i] >= lower[i] && theta[i] <= upper[i])) return false;
  }
  return true;
}

Vector ParameterSpace::to_internal(const Vector& theta) const {
  Vector u = theta;
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    if (log_scale[static_cast<std::size_t>(i)]) u[i] = std::log(theta[i]);
  }
  return u;
}

Vector ParameterSpace::to_theta(const Vector& u) const {
  Vector t = u;
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    if (log_scale[static_cast<std::size_t>(i)]) t[i] = std::exp(u[i]);
  }
  return t;
}

Vector ParameterSpace::dtheta(const Vector& u) const {
  Vector d = Vector::Ones(u.size());
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    if (log_scale[static_cast<std::size_t>(i)]) d[i] = std::exp(u[i]);
  }
  return d;
}

Vector ParameterSpace::gradient_to_internal(const Vector& u, const Vector& grad_theta) const {
  return dtheta(u).cwiseProduct(grad_theta);
}

Matrix ParameterSpace::hessian_to_internal(const Vector& u, const Vector& grad_theta,
                                           const Matrix& hess_theta) const {
  const Vector d = dtheta(u);
  Matrix h = d.asDiagonal() * hess_theta * d.asDiagonal();
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    if (log_scale[static_cast<std::size_t>(i)]) h(i, i) += d[i] * grad_theta[i];
  }
  return h;
}

Vector ParameterSpace::sample(Rng& rng) const {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Vector t(lower.size());
  for (Eigen::Index i = 0; i < t.size(); ++i) {
    const double r = unit(rng);
    if (log_scale[static_cast<std::size_t>(i)]) {
      t[i] = std::exp(std::log(lower[i]) + r * (std::log(upper[i]) - std::log(lower[i])));
    } else {
      t[i] = lower[i] + r * (upper[i] - lower[i]);
    }
  }
  return t;
}

void ParameterSpace::validate() const {
  const auto n = static_cast<Eigen::Index>(names.size());
  if (lower.size() != n || upper.size() != n || static_cast<Eigen::Index>(log_scale.size()) != n) {
    throw ConfigError("parameter space dimensions disagree");
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(lower[i] < upper[i])) {
      throw ConfigError("empty bounds for parameter " + names[static_cast<std::size_t>(i)]);
    }
    if (log_scale[static_cast<std::size_t>(i)] && !(lower[i] > 0.0)) {
      throw ConfigError("log-scaled parameter " + names[static_cast<std::size_t>(i)] +
                                  " needs a positive lower bound");
    }
  }
}

ParameterSpace pair_space(const ParameterSpace& space) {
  ParameterSpace s;
  const auto p = space.lower.size();
  for (const auto& n : space.names) s.names.push_back(n + "#1");
  for (const auto& n : space.names) s.names.push_back(n + "#2");
  s.lower.resize(2 * p);
  s.upper.resize(2 * p);
  s.lower << space.lower, space.lower;
  s.upper << space.upper, space.upper;
  s.log_scale = space.log_scale;
  s.log_scale.insert(s.log_scale.end(), space.log_scale.begin(), space.log_scale.end());
  return s;
}

}  // namespace preddev
