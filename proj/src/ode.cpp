#include "preddev/ode.hpp"
#include "preddev/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace preddev {

double ExternalFactors::at(const std::string& name) const {
  auto it = values.find(name);
  if (it == values.end()) {
    throw ConfigError("condition '" + condition_id + "' has no factor '" + name + "'");
  }
  return it->second;
}

Vector ModelSystem::bind(const ExternalFactors& nu) const {
  Vector v(static_cast<Eigen::Index>(factor_names.size()));
  for (std::size_t i = 0; i < factor_names.size(); ++i) v[static_cast<Eigen::Index>(i)] = nu.at(factor_names[i]);
  return v;
}

const Observable& ModelSystem::observable(const std::string& obs_name) const {
  for (const auto& o : observables) {
    if (o.name == obs_name) return o;
  }
  throw ConfigError("model '" + name + "' has no observable '" + obs_name + "'");
}

int ModelSystem::param_index(const std::string& pname) const {
  for (std::size_t i = 0; i < param_names.size(); ++i) {
    if (param_names[i] == pname) return static_cast<int>(i);
  }
  throw ConfigError("model '" + name + "' has no parameter '" + pname + "'");
}

const char* to_string(IntegrationStatus s) {
  switch (s) {
    case IntegrationStatus::Success: return "success";
    case IntegrationStatus::StepUnderflow: return "step-underflow";
    case IntegrationStatus::NonFinite: return "non-finite";
    case IntegrationStatus::TooManySteps: return "too-many-steps";
  }
  return "unknown";
}

namespace {

// Dormand-Prince 5(4) tableau with Hairer's continuous extension.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784,
                 a76 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;
constexpr double d1 = -12715105075.0 / 11282082432, d3 = 87487479700.0 / 32700410799,
                 d4 = -10690763975.0 / 1880347072, d5 = 701980252875.0 / 199316789632,
                 d6 = -1453857185.0 / 822651844, d7 = 69997945.0 / 29380423;

class AugmentedRhs {
 public:
  AugmentedRhs(const ModelSystem& m, const Vector& theta, const Vector& nu, bool sens)
      : m_(m), theta_(theta), nu_(nu), n_(m.state_dim()), p_(m.param_dim()), sens_(sens),
        x_(n_), dx_(n_), fx_(n_, n_), fth_(n_, p_) {}

  int size() const { return sens_ ? n_ * (1 + p_) : n_; }

  void operator()(double t, const Vector& y, Vector& dy) {
    x_ = y.head(n_);
    m_.rhs(x_, t, theta_, nu_, dx_);
    dy.head(n_) = dx_;
    if (!sens_) return;
    fx_.setZero();
    fth_.setZero();
    m_.jacobians(x_, t, theta_, nu_, fx_, fth_);
    Eigen::Map<const Matrix> s(y.data() + n_, n_, p_);
    Eigen::Map<Matrix> ds(dy.data() + n_, n_, p_);
    ds.noalias() = fx_ * s;
    ds += fth_;
  }

 private:
  const ModelSystem& m_;
  const Vector& theta_;
  const Vector& nu_;
  int n_, p_;
  bool sens_;
  Vector x_, dx_;
  Matrix fx_, fth_;
};

// RMS error norm over the state components only; sensitivities follow the
// state step sequence so that values do not depend on the derivative order.
double error_norm(const Vector& err, const Vector& y0, const Vector& y1, int n, const Tolerances& tol) {
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    const double sk = tol.atol + tol.rtol * std::max(std::abs(y0[i]), std::abs(y1[i]));
    const double r = err[i] / sk;
    acc += r * r;
  }
  return std::sqrt(acc / n);
}

double initial_step(AugmentedRhs& f, double t0, const Vector& y0, const Vector& f0, double span, int n,
                    const Tolerances& tol) {
  double dnf = 0.0, dny = 0.0;
  for (int i = 0; i < n; ++i) {
    const double sk = tol.atol + tol.rtol * std::abs(y0[i]);
    dnf += (f0[i] / sk) * (f0[i] / sk);
    dny += (y0[i] / sk) * (y0[i] / sk);
  }
  double h = (dnf <= 1e-10 || dny <= 1e-10) ? 1e-6 : std::sqrt(dny / dnf) * 0.01;
  h = std::min(h, span);
  Vector y1 = y0 + h * f0;
  Vector f1(y0.size());
  f(t0 + h, y1, f1);
  double der2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double sk = tol.atol + tol.rtol * std::abs(y0[i]);
    const double r = (f1[i] - f0[i]) / sk;
    der2 += r * r;
  }
  der2 = std::sqrt(der2) / h;
  const double der12 = std::max(std::abs(der2), std::sqrt(dnf));
  const double h1 = der12 <= 1e-15 ? std::max(1e-6, std::abs(h) * 1e-3) : std::pow(0.01 / der12, 0.2);
  return std::min({100 * h, h1, span});
}

bool all_finite(const Vector& v) { return v.allFinite(); }

struct RawSolution {
  Matrix values;  // grid x augmented size
  IntegrationStatus status = IntegrationStatus::Success;
  double last_valid_time = 0.0;
  std::vector<double> steps;
};

// Integrates the (possibly augmented) system. With `replay` non-null the
// given step sequence is followed exactly and no error control is applied.
RawSolution run_dopri(AugmentedRhs& f, double t0, const Vector& y0, std::span<const double> grid, int n,
                      const Tolerances& tol, const std::vector<double>* replay) {
  const int dim = f.size();
  RawSolution out;
  out.values = Matrix::Constant(static_cast<Eigen::Index>(grid.size()), dim,
                                std::numeric_limits<double>::quiet_NaN());
  out.last_valid_time = t0;
  if (grid.empty()) return out;

  std::size_t next = 0;
  while (next < grid.size() && grid[next] <= t0) {
    if (grid[next] < t0) throw ConfigError("time grid starts before the model's initial time");
    out.values.row(static_cast<Eigen::Index>(next)) = y0.transpose();
    ++next;
  }
  if (next == grid.size()) return out;
  const double tend = grid.back();

  Vector y = y0, ynew(dim), k1(dim), k2(dim), k3(dim), k4(dim), k5(dim), k6(dim), k7(dim), ytmp(dim);
  Vector r1(dim), r2(dim), r3(dim), r4(dim), r5(dim);
  double t = t0;
  f(t, y, k1);
  if (!all_finite(k1)) {
    out.status = IntegrationStatus::NonFinite;
    return out;
  }

  double h = replay ? 0.0 : initial_step(f, t0, y0, k1, tend - t0, n, tol);
  bool last_rejected = false;
  long nsteps = 0;
  std::size_t replay_index = 0;

  while (t < tend) {
    if (replay) {
      if (replay_index >= replay->size()) {
        out.status = IntegrationStatus::TooManySteps;
        break;
      }
      h = (*replay)[replay_index++];
    } else {
      if (++nsteps > tol.max_steps) {
        out.status = IntegrationStatus::TooManySteps;
        break;
      }
      if (h < 1e-14 * std::max(1.0, std::abs(t))) {
        out.status = IntegrationStatus::StepUnderflow;
        break;
      }
      if (t + 1.01 * h >= tend) h = tend - t;
    }

    ytmp = y + h * a21 * k1;
    f(t + c2 * h, ytmp, k2);
    ytmp = y + h * (a31 * k1 + a32 * k2);
    f(t + c3 * h, ytmp, k3);
    ytmp = y + h * (a41 * k1 + a42 * k2 + a43 * k3);
    f(t + c4 * h, ytmp, k4);
    ytmp = y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
    f(t + c5 * h, ytmp, k5);
    ytmp = y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
    const bool final_step = replay ? replay_index == replay->size() : h == tend - t;
    const double tnew = final_step ? tend : t + h;
    f(tnew, ytmp, k6);
    ynew = y + h * (a71 * k1 + a73 * k3 + a74 * k4 + a75 * k5 + a76 * k6);
    f(tnew, ynew, k7);

    const bool finite = all_finite(ynew) && all_finite(k7);
    double err = 0.0;
    if (finite && !replay) {
      Vector e = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
      err = error_norm(e, y, ynew, n, tol);
    }
    if (!finite) {
      if (replay) {
        out.status = IntegrationStatus::NonFinite;
        break;
      }
      h *= 0.25;
      last_rejected = true;
      continue;
    }
    if (!replay && !(err <= 1.0)) {
      h *= std::max(0.2, 0.9 * std::pow(err, -0.2));
      last_rejected = true;
      continue;
    }

    // accepted
    r1 = y;
    r2 = ynew - y;
    r3 = h * k1 - r2;
    r4 = r2 - h * k7 - r3;
    r5 = h * (d1 * k1 + d3 * k3 + d4 * k4 + d5 * k5 + d6 * k6 + d7 * k7);
    while (next < grid.size() && grid[next] <= tnew) {
      auto row = out.values.row(static_cast<Eigen::Index>(next));
      if (grid[next] == tnew) {
        row = ynew.transpose();
      } else {
        const double s = (grid[next] - t) / h;
        const double s1 = 1.0 - s;
        row = (r1 + s * (r2 + s1 * (r3 + s * (r4 + s1 * r5)))).transpose();
      }
      ++next;
    }
    out.steps.push_back(h);
    t = tnew;
    y = ynew;
    k1 = k7;
    out.last_valid_time = t;

    if (!replay) {
      double fac = err == 0.0 ? 10.0 : std::clamp(0.9 * std::pow(err, -0.2), 0.2, 10.0);
      if (last_rejected) fac = std::min(fac, 1.0);
      h *= fac;
      last_rejected = false;
    }
  }
  return out;
}

void check_grid(std::span<const double> times) {
  for (std::size_t i = 1; i < times.size(); ++i) {
    if (!(times[i] > times[i - 1])) throw ConfigError("time grid must be strictly ascending");
  }
}

Trajectory unpack(const RawSolution& raw, std::span<const double> times, int n, int p, bool sens) {
  Trajectory tr;
  tr.times.assign(times.begin(), times.end());
  tr.states = raw.values.leftCols(n);
  tr.status = raw.status;
  tr.last_valid_time = raw.last_valid_time;
  tr.steps = raw.steps;
  if (sens) {
    tr.sensitivities.reserve(times.size());
    for (Eigen::Index k = 0; k < raw.values.rows(); ++k) {
      Vector row = raw.values.row(k).transpose();
      tr.sensitivities.emplace_back(Eigen::Map<const Matrix>(row.data() + n, n, p));
    }
  }
  return tr;
}

Vector augmented_initial(const ModelSystem& m, const Vector& theta, const Vector& nu, bool sens) {
  const int n = m.state_dim(), p = m.param_dim();
  Vector y0(sens ? n * (1 + p) : n);
  y0.head(n) = m.initial_state(theta, nu);
  if (sens) {
    Matrix s0 = m.initial_sensitivity ? m.initial_sensitivity(theta, nu) : Matrix::Zero(n, p);
    Eigen::Map<Matrix>(y0.data() + n, n, p) = s0;
  }
  return y0;
}

Trajectory run(const ModelSystem& m, const Vector& theta, const Vector& nu, std::span<const double> times,
               const Tolerances& tol, bool sens, const std::vector<double>* replay) {
  if (theta.size() != m.param_dim()) throw ConfigError("parameter vector has wrong length");
  check_grid(times);
  AugmentedRhs f(m, theta, nu, sens);
  const Vector y0 = augmented_initial(m, theta, nu, sens);
  RawSolution raw = run_dopri(f, m.initial_time, y0, times, m.state_dim(), tol, replay);
  return unpack(raw, times, m.state_dim(), m.param_dim(), sens);
}

}  // namespace

Trajectory simulate(const ModelSystem& model, const Vector& theta, const Vector& nu_bound,
                    std::span<const double> times, const Tolerances& tol, int order) {
  if (order <= 0) return run(model, theta, nu_bound, times, tol, false, nullptr);
  Trajectory base = run(model, theta, nu_bound, times, tol, true, nullptr);
  if (order == 1 || !base.ok()) return base;

  const int p = model.param_dim();
  base.second_order.assign(times.size(), std::vector<Matrix>(static_cast<std::size_t>(p)));
  for (int j = 0; j < p; ++j) {
    Vector shifted = theta;
    const double step = 1e-6 * std::max(std::abs(theta[j]), 1e-4);
    shifted[j] += step;
    const double h = shifted[j] - theta[j];
    Trajectory pert = run(model, shifted, nu_bound, times, tol, true, &base.steps);
    if (!pert.ok()) {
      base.status = pert.status;
      base.second_order.clear();
      return base;
    }
    for (std::size_t k = 0; k < times.size(); ++k) {
      base.second_order[k][static_cast<std::size_t>(j)] = (pert.sensitivities[k] - base.sensitivities[k]) / h;
    }
  }
  // symmetrize d2x/dth_i dth_j across the (i, j) pair
  const int n = model.state_dim();
  for (std::size_t k = 0; k < times.size(); ++k) {
    auto& so = base.second_order[k];
    for (int i = 0; i < p; ++i) {
      for (int j = i + 1; j < p; ++j) {
        for (int s = 0; s < n; ++s) {
          const double avg = 0.5 * (so[static_cast<std::size_t>(j)](s, i) + so[static_cast<std::size_t>(i)](s, j));
          so[static_cast<std::size_t>(j)](s, i) = avg;
          so[static_cast<std::size_t>(i)](s, j) = avg;
        }
      }
    }
  }
  return base;
}

Trajectory integrate(const ModelSystem& model, const Vector& theta, const ExternalFactors& nu,
                     std::span<const double> times, const Tolerances& tol) {
  return simulate(model, theta, model.bind(nu), times, tol, 0);
}

Trajectory integrate_with_sensitivities(const ModelSystem& model, const Vector& theta,
                                        const ExternalFactors& nu, std::span<const double> times,
                                        const Tolerances& tol) {
  if (!model.jacobians) throw ConfigError("model '" + model.name + "' supplies no jacobians");
  return simulate(model, theta, model.bind(nu), times, tol, 1);
}

Trajectory integrate_with_second_order(const ModelSystem& model, const Vector& theta,
                                       const ExternalFactors& nu, std::span<const double> times,
                                       const Tolerances& tol) {
  if (!model.jacobians) throw ConfigError("model '" + model.name + "' supplies no jacobians");
  return simulate(model, theta, model.bind(nu), times, tol, 2);
}

JacobianCheck check_jacobians(const ModelSystem& model, const Vector& x, double t, const Vector& theta,
                              const Vector& nu, double rel_tol) {
  const int n = model.state_dim(), p = model.param_dim();
  Matrix fx = Matrix::Zero(n, n), fth = Matrix::Zero(n, p);
  model.jacobians(x, t, theta, nu, fx, fth);

  auto column_fd = [&](auto&& perturb, double base) {
    const double h = 1e-6 * std::max(1.0, std::abs(base));
    Vector fp(n), fm(n);
    perturb(h, fp);
    perturb(-h, fm);
    return Vector((fp - fm) / (2 * h));
  };
  auto rel = [](const Vector& a, const Vector& b) {
    double worst = 0.0;
    for (Eigen::Index i = 0; i < a.size(); ++i) {
      worst = std::max(worst, std::abs(a[i] - b[i]) / std::max(1.0, std::abs(a[i])));
    }
    return worst;
  };

  JacobianCheck out;
  for (int j = 0; j < n; ++j) {
    Vector fd = column_fd(
        [&](double h, Vector& f) {
          Vector xs = x;
          xs[j] += h;
          model.rhs(xs, t, theta, nu, f);
        },
        x[j]);
    out.max_rel_error_x = std::max(out.max_rel_error_x, rel(fx.col(j), fd));
  }
  for (int j = 0; j < p; ++j) {
    Vector fd = column_fd(
        [&](double h, Vector& f) {
          Vector ts = theta;
          ts[j] += h;
          model.rhs(x, t, ts, nu, f);
        },
        theta[j]);
    out.max_rel_error_theta = std::max(out.max_rel_error_theta, rel(fth.col(j), fd));
  }
  out.passed = out.max_rel_error_x <= rel_tol && out.max_rel_error_theta <= rel_tol;
  return out;
}

}  // namespace preddev
