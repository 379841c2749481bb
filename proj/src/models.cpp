#include "preddev/models.hpp"
#include "preddev/errors.hpp"

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <stdexcept>

namespace preddev {

namespace {

std::vector<Observable> state_observables(const std::vector<std::string>& states) {
  std::vector<Observable> obs;
  const auto n = static_cast<Eigen::Index>(states.size());
  for (Eigen::Index i = 0; i < n; ++i) obs.push_back({states[static_cast<std::size_t>(i)], Vector::Unit(n, i)});
  return obs;
}

// Initial state read directly from factors, one per state, in `factor_names` order.
void initial_state_from_factors(ModelSystem& m) {
  const int n = m.state_dim();
  m.initial_state = [n](const Vector&, const Vector& nu) { return Vector(nu.head(n)); };
  m.initial_sensitivity = [n](const Vector& theta, const Vector&) {
    return Matrix(Matrix::Zero(n, theta.size()));
  };
}

}  // namespace

ModelDescriptor lorenz() {
  ModelSystem m;
  m.name = "lorenz";
  m.state_names = {"x", "y", "z"};
  m.param_names = {"theta1", "theta2", "theta3"};
  m.factor_names = {"x0", "y0", "z0"};
  m.observables = state_observables(m.state_names);
  m.rhs = [](const Vector& x, double, const Vector& th, const Vector&, Vector& dx) {
    dx.resize(3);
    dx[0] = th[0] * (x[1] - x[0]);
    dx[1] = x[0] * (th[1] - x[2]) - x[1];
    dx[2] = x[0] * x[1] - th[2] * x[2];
  };
  m.jacobians = [](const Vector& x, double, const Vector& th, const Vector&, Matrix& fx, Matrix& fth) {
    fx << -th[0], th[0], 0.0,
          th[1] - x[2], -1.0, -x[0],
          x[1], x[0], -th[2];
    fth(0, 0) = x[1] - x[0];
    fth(1, 1) = x[0];
    fth(2, 2) = -x[2];
  };
  initial_state_from_factors(m);

  ModelDescriptor d;
  d.name = m.name;
  d.default_true_theta = Vector{{7.0, 38.0, 5.0}};
  d.default_factors = {{"y0=20", {{"x0", 10.0}, {"y0", 20.0}, {"z0", 3.0}}},
                       {"y0=7", {{"x0", 10.0}, {"y0", 7.0}, {"z0", 3.0}}}};
  d.default_space = ParameterSpace::around(m.param_names, d.default_true_theta, 1.5);
  d.documentation = "Lorenz system; x, y, z observable; initial state from factors x0, y0, z0.";
  d.system = std::move(m);
  return d;
}

ModelDescriptor lotka_volterra() {
  ModelSystem m;
  m.name = "lotka_volterra";
  m.state_names = {"x", "y"};
  m.param_names = {"theta1", "theta2", "theta3", "theta4"};
  m.factor_names = {"x0", "y0"};
  m.observables = state_observables(m.state_names);
  m.rhs = [](const Vector& x, double, const Vector& th, const Vector&, Vector& dx) {
    dx.resize(2);
    dx[0] = th[0] * th[2] * x[0] - th[1] * th[2] * x[0] * x[1];
    dx[1] = th[1] * th[3] * x[0] * x[1] - th[0] * th[3] * x[1];
  };
  m.jacobians = [](const Vector& x, double, const Vector& th, const Vector&, Matrix& fx, Matrix& fth) {
    const double xy = x[0] * x[1];
    fx << th[0] * th[2] - th[1] * th[2] * x[1], -th[1] * th[2] * x[0],
          th[1] * th[3] * x[1], th[1] * th[3] * x[0] - th[0] * th[3];
    fth << th[2] * x[0], -th[2] * xy, th[0] * x[0] - th[1] * xy, 0.0,
           -th[3] * x[1], th[3] * xy, 0.0, th[1] * xy - th[0] * x[1];
  };
  initial_state_from_factors(m);

  ModelDescriptor d;
  d.name = m.name;
  d.default_true_theta = Vector{{1.0, 0.05, 1.0, 1.0}};
  d.default_factors = {{"base", {{"x0", 10.0}, {"y0", 10.0}}}};
  d.default_space = ParameterSpace::around(m.param_names, d.default_true_theta, 4.0);
  d.documentation = "Lotka-Volterra with a scaling symmetry (k th1, k th2, th3 / k, th4 / k).";
  d.system = std::move(m);
  return d;
}

ModelDescriptor hiv_ifn_full() {
  ModelSystem m;
  m.name = "hiv_ifn_full";
  m.state_names = {"C", "CI", "CH", "CHI", "H"};
  m.param_names = {"theta1", "theta2", "theta3", "theta4", "theta5", "theta6", "theta7", "theta8"};
  m.factor_names = {"C0", "CI0", "CH0", "CHI0", "H0", "I", "ifn_decay"};
  m.observables = state_observables(m.state_names);
  m.observables.push_back({"C+CI", Vector{{1.0, 1.0, 0.0, 0.0, 0.0}}});
  m.observables.push_back({"CH+CHI", Vector{{0.0, 0.0, 1.0, 1.0, 0.0}}});
  // th index: 0..7 <-> theta1..theta8
  m.rhs = [](const Vector& x, double t, const Vector& th, const Vector& nu, Vector& dx) {
    const double ifn = nu[5] * std::exp(-nu[6] * t);
    const double sat = ifn > 0.0 ? ifn / (th[7] + ifn) : 0.0;
    const double c = x[0], ci = x[1], ch = x[2], chi = x[3], h = x[4];
    dx.resize(5);
    dx[0] = th[0] * c + th[2] * ci - th[1] * c * sat - th[4] * c * h;
    dx[1] = (th[0] - th[2]) * ci + th[1] * c * sat;
    dx[2] = (th[0] - th[3]) * ch + th[4] * c * h - th[1] * ch * sat + th[2] * chi;
    dx[3] = (th[0] - th[2] - th[3]) * chi + th[1] * ch * sat;
    dx[4] = th[5] * ch - th[6] * h;
  };
  m.jacobians = [](const Vector& x, double t, const Vector& th, const Vector& nu, Matrix& fx, Matrix& fth) {
    const double ifn = nu[5] * std::exp(-nu[6] * t);
    const double sat = ifn > 0.0 ? ifn / (th[7] + ifn) : 0.0;
    const double dsat = ifn > 0.0 ? -ifn / ((th[7] + ifn) * (th[7] + ifn)) : 0.0;  // d sat / d th8
    const double c = x[0], ci = x[1], ch = x[2], chi = x[3], h = x[4];
    fx << th[0] - th[1] * sat - th[4] * h, th[2], 0.0, 0.0, -th[4] * c,
          th[1] * sat, th[0] - th[2], 0.0, 0.0, 0.0,
          th[4] * h, 0.0, th[0] - th[3] - th[1] * sat, th[2], th[4] * c,
          0.0, 0.0, th[1] * sat, th[0] - th[2] - th[3], 0.0,
          0.0, 0.0, th[5], 0.0, -th[6];
    fth(0, 0) = c;
    fth(0, 1) = -c * sat;
    fth(0, 2) = ci;
    fth(0, 4) = -c * h;
    fth(0, 7) = -th[1] * c * dsat;
    fth(1, 0) = ci;
    fth(1, 1) = c * sat;
    fth(1, 2) = -ci;
    fth(1, 7) = th[1] * c * dsat;
    fth(2, 0) = ch;
    fth(2, 1) = -ch * sat;
    fth(2, 2) = chi;
    fth(2, 3) = -ch;
    fth(2, 4) = c * h;
    fth(2, 7) = -th[1] * ch * dsat;
    fth(3, 0) = chi;
    fth(3, 1) = ch * sat;
    fth(3, 2) = -chi;
    fth(3, 3) = -chi;
    fth(3, 7) = th[1] * ch * dsat;
    fth(4, 5) = ch;
    fth(4, 6) = -h;
  };
  initial_state_from_factors(m);

  ModelDescriptor d;
  d.name = m.name;
  // Synthetic ground truth (rates per day, IFN in ng/mL); the wet-lab fit is not public.
  d.default_true_theta = Vector{{0.3, 1.2, 0.5, 0.8, 1.5, 3.0, 1.0, 0.02}};
  for (double level : hiv_ifn_levels()) d.default_factors.push_back(hiv_condition(level));
  d.default_space = ParameterSpace::around(m.param_names, d.default_true_theta, 10.0);
  d.documentation =
      "HIV / IFN-alpha model with all eight rates free. Observables C, CI, CH, CHI, H, C+CI, CH+CHI.";
  d.system = std::move(m);
  return d;
}

ModelDescriptor hiv_ifn() {
  ModelDescriptor full = hiv_ifn_full();
  const double viral_decay = full.default_true_theta[6];
  ModelDescriptor d;
  d.name = "hiv_ifn";
  d.system = fix_parameters(full.system, {{"theta7", viral_decay}});
  d.system.name = "hiv_ifn";
  d.default_true_theta.resize(7);
  d.default_true_theta << full.default_true_theta.head(6), full.default_true_theta[7];
  d.default_factors = full.default_factors;
  d.default_space = ParameterSpace::around(d.system.param_names, d.default_true_theta, 10.0);
  d.documentation = "HIV / IFN-alpha model with theta7 (viral decay) fixed; seven free rates.";
  return d;
}

ModelDescriptor exp_decay() {
  ModelSystem m;
  m.name = "exp_decay";
  m.state_names = {"x"};
  m.param_names = {"k"};
  m.factor_names = {"x0"};
  m.observables = state_observables(m.state_names);
  m.rhs = [](const Vector& x, double, const Vector& th, const Vector&, Vector& dx) {
    dx.resize(1);
    dx[0] = -th[0] * x[0];
  };
  m.jacobians = [](const Vector& x, double, const Vector& th, const Vector&, Matrix& fx, Matrix& fth) {
    fx(0, 0) = -th[0];
    fth(0, 0) = -x[0];
  };
  initial_state_from_factors(m);

  ModelDescriptor d;
  d.name = m.name;
  d.default_true_theta = Vector{{1.0}};
  d.default_factors = {{"x0=1", {{"x0", 1.0}}}};
  d.default_space = ParameterSpace::around(m.param_names, d.default_true_theta, 10.0);
  d.documentation = "Exponential decay dx/dt = -k x.";
  d.system = std::move(m);
  return d;
}

ModelDescriptor exp_decay_unknown_ic() {
  ModelSystem m;
  m.name = "exp_decay_unknown_ic";
  m.state_names = {"x"};
  m.param_names = {"k", "x0"};
  m.observables = state_observables(m.state_names);
  m.rhs = [](const Vector& x, double, const Vector& th, const Vector&, Vector& dx) {
    dx.resize(1);
    dx[0] = -th[0] * x[0];
  };
  m.jacobians = [](const Vector& x, double, const Vector& th, const Vector&, Matrix& fx, Matrix& fth) {
    fx(0, 0) = -th[0];
    fth(0, 0) = -x[0];
  };
  m.initial_state = [](const Vector& th, const Vector&) { return Vector(Vector::Constant(1, th[1])); };
  m.initial_sensitivity = [](const Vector&, const Vector&) {
    Matrix s = Matrix::Zero(1, 2);
    s(0, 1) = 1.0;
    return s;
  };

  ModelDescriptor d;
  d.name = m.name;
  d.default_true_theta = Vector{{1.0, 1.0}};
  d.default_factors = {{"base", {}}};
  d.default_space = ParameterSpace::around(m.param_names, d.default_true_theta, 10.0);
  d.documentation = "Exponential decay with the initial value as a free parameter.";
  d.system = std::move(m);
  return d;
}

ModelDescriptor linear_drift() {
  ModelSystem m;
  m.name = "linear_drift";
  m.state_names = {"x"};
  m.param_names = {"a", "b"};
  m.factor_names = {"x0"};
  m.observables = state_observables(m.state_names);
  m.rhs = [](const Vector&, double t, const Vector& th, const Vector&, Vector& dx) {
    dx.resize(1);
    dx[0] = th[0] + th[1] * t;
  };
  m.jacobians = [](const Vector&, double t, const Vector&, const Vector&, Matrix&, Matrix& fth) {
    fth(0, 0) = 1.0;
    fth(0, 1) = t;
  };
  initial_state_from_factors(m);

  ModelDescriptor d;
  d.name = m.name;
  d.default_true_theta = Vector{{1.0, 0.5}};
  d.default_factors = {{"x0=0", {{"x0", 0.0}}}};
  ParameterSpace s;
  s.names = m.param_names;
  s.lower = Vector{{-10.0, -10.0}};
  s.upper = Vector{{10.0, 10.0}};
  s.log_scale = {false, false};
  d.default_space = s;
  d.documentation = "Linear-in-parameters drift dx/dt = a + b t.";
  d.system = std::move(m);
  return d;
}

ModelSystem fix_parameters(const ModelSystem& model, const std::map<std::string, double>& fixed) {
  const int p = model.param_dim();
  std::vector<int> free_index;
  Vector full_template = Vector::Zero(p);
  std::set<std::string> seen;
  for (int i = 0; i < p; ++i) {
    auto it = fixed.find(model.param_names[static_cast<std::size_t>(i)]);
    if (it == fixed.end()) {
      free_index.push_back(i);
    } else {
      full_template[i] = it->second;
      seen.insert(it->first);
    }
  }
  for (const auto& [name, value] : fixed) {
    if (!seen.count(name)) throw ConfigError("cannot fix unknown parameter '" + name + "'");
  }

  ModelSystem out = model;
  out.param_names.clear();
  for (int i : free_index) out.param_names.push_back(model.param_names[static_cast<std::size_t>(i)]);
  const int n = model.state_dim();

  auto expand = [free_index, full_template](const Vector& th) {
    Vector full = full_template;
    for (std::size_t k = 0; k < free_index.size(); ++k) full[free_index[k]] = th[static_cast<Eigen::Index>(k)];
    return full;
  };
  auto compress = [free_index](const Matrix& m) {
    Matrix out(m.rows(), static_cast<Eigen::Index>(free_index.size()));
    for (std::size_t k = 0; k < free_index.size(); ++k) out.col(static_cast<Eigen::Index>(k)) = m.col(free_index[k]);
    return out;
  };

  auto base_rhs = model.rhs;
  out.rhs = [base_rhs, expand](const Vector& x, double t, const Vector& th, const Vector& nu, Vector& dx) {
    base_rhs(x, t, expand(th), nu, dx);
  };
  if (model.jacobians) {
    auto base_jac = model.jacobians;
    out.jacobians = [base_jac, expand, compress, n, p](const Vector& x, double t, const Vector& th, const Vector& nu,
                                                       Matrix& fx, Matrix& fth) {
      Matrix full = Matrix::Zero(n, p);
      base_jac(x, t, expand(th), nu, fx, full);
      fth = compress(full);
    };
  }
  auto base_init = model.initial_state;
  out.initial_state = [base_init, expand](const Vector& th, const Vector& nu) { return base_init(expand(th), nu); };
  if (model.initial_sensitivity) {
    auto base_sens = model.initial_sensitivity;
    out.initial_sensitivity = [base_sens, expand, compress](const Vector& th, const Vector& nu) {
      return compress(base_sens(expand(th), nu));
    };
  }
  return out;
}

ModelRegistry& ModelRegistry::instance() {
  static ModelRegistry registry;
  return registry;
}

ModelRegistry::ModelRegistry() {
  factories_["lorenz"] = lorenz;
  factories_["lotka_volterra"] = lotka_volterra;
  factories_["hiv_ifn"] = hiv_ifn;
  factories_["hiv_ifn_full"] = hiv_ifn_full;
  factories_["exp_decay"] = exp_decay;
  factories_["exp_decay_unknown_ic"] = exp_decay_unknown_ic;
  factories_["linear_drift"] = linear_drift;
}

void ModelRegistry::add(const std::string& name, Factory factory) { factories_[name] = std::move(factory); }

ModelDescriptor ModelRegistry::get(const std::string& name) const {
  auto it = factories_.find(name);
  if (it == factories_.end()) throw ConfigError("unknown model '" + name + "'");
  return it->second();
}

std::vector<std::string> ModelRegistry::names() const {
  std::vector<std::string> out;
  for (const auto& [name, f] : factories_) out.push_back(name);
  return out;
}

NoiseDistribution parse_noise_distribution(const std::string& s) {
  if (s == "normal") return NoiseDistribution::Normal;
  if (s == "student_t") return NoiseDistribution::StudentT;
  if (s == "laplace") return NoiseDistribution::Laplace;
  if (s == "uniform") return NoiseDistribution::Uniform;
  throw ConfigError("unknown noise distribution '" + s + "'");
}

const char* to_string(NoiseDistribution d) {
  switch (d) {
    case NoiseDistribution::Normal: return "normal";
    case NoiseDistribution::StudentT: return "student_t";
    case NoiseDistribution::Laplace: return "laplace";
    case NoiseDistribution::Uniform: return "uniform";
  }
  return "normal";
}

double NoiseSpec::sigma_for(const std::string& observable) const {
  auto it = sigma.find(observable);
  return it == sigma.end() ? default_sigma : it->second;
}

double NoiseSpec::draw(Rng& rng, double scale) const {
  if (scale == 0.0) return 0.0;
  switch (distribution) {
    case NoiseDistribution::Normal: return scale * std::normal_distribution<double>(0.0, 1.0)(rng);
    case NoiseDistribution::StudentT: {
      const double t = std::student_t_distribution<double>(dof)(rng);
      return scale * t * std::sqrt((dof - 2.0) / dof);
    }
    case NoiseDistribution::Laplace: {
      const double u = std::uniform_real_distribution<double>(-0.5, 0.5)(rng);
      const double b = scale / std::sqrt(2.0);
      return -b * (u < 0 ? -1.0 : 1.0) * std::log1p(-2.0 * std::abs(u));
    }
    case NoiseDistribution::Uniform: {
      const double a = scale * std::sqrt(3.0);
      return std::uniform_real_distribution<double>(-a, a)(rng);
    }
  }
  return 0.0;
}

double NoiseSpec::cdf(double x) const {
  switch (distribution) {
    case NoiseDistribution::Normal: return boost::math::cdf(boost::math::normal_distribution<double>(), x);
    case NoiseDistribution::StudentT: {
      const double s = std::sqrt((dof - 2.0) / dof);
      return boost::math::cdf(boost::math::students_t_distribution<double>(dof), x / s);
    }
    case NoiseDistribution::Laplace: {
      const double b = 1.0 / std::sqrt(2.0);
      return x < 0 ? 0.5 * std::exp(x / b) : 1.0 - 0.5 * std::exp(-x / b);
    }
    case NoiseDistribution::Uniform: {
      const double a = std::sqrt(3.0);
      return std::clamp((x + a) / (2 * a), 0.0, 1.0);
    }
  }
  return 0.0;
}

namespace {

std::vector<double> union_times(const Experiment& e) {
  std::vector<double> t;
  for (const auto& s : e.series) t.insert(t.end(), s.times.begin(), s.times.end());
  std::sort(t.begin(), t.end());
  t.erase(std::unique(t.begin(), t.end()), t.end());
  return t;
}

}  // namespace

std::vector<double> observe(const ModelSystem& model, const Vector& theta, const ExternalFactors& nu,
                            const Series& series, const Tolerances& tol) {
  Trajectory tr = integrate(model, theta, nu, series.times, tol);
  if (!tr.ok()) throw SolverError(std::string("integration failed: ") + to_string(tr.status));
  const Vector& w = model.observable(series.observable).weights;
  std::vector<double> out;
  for (Eigen::Index k = 0; k < tr.states.rows(); ++k) out.push_back(tr.states.row(k).dot(w));
  return out;
}

Dataset simulate_dataset(const ModelSystem& model, const Vector& theta_true,
                         const std::vector<Experiment>& experiments, const NoiseSpec& noise, std::uint64_t seed,
                         const Tolerances& tol) {
  Rng rng = derive_stream(seed, "simulate");
  Dataset data;
  for (const auto& e : experiments) {
    const std::vector<double> grid = union_times(e);
    Trajectory tr = integrate(model, theta_true, e.factors, grid, tol);
    if (!tr.ok()) {
      throw SolverError("integration failed at the true parameters for condition " + e.factors.condition_id);
    }
    for (const auto& s : e.series) {
      const Vector& w = model.observable(s.observable).weights;
      const double scale = noise.sigma_for(s.observable);
      ObservedSeries obs{e.factors.condition_id, s.observable, s.times, {}, std::nullopt};
      for (double t : s.times) {
        const auto k = static_cast<Eigen::Index>(std::lower_bound(grid.begin(), grid.end(), t) - grid.begin());
        const double clean = tr.states.row(k).dot(w);
        std::vector<double> reps;
        for (int r = 0; r < s.replicates; ++r) reps.push_back(clean + noise.draw(rng, scale));
        obs.replicates.push_back(std::move(reps));
      }
      if (noise.estimate_variance) {
        obs.variance = estimate_noise(obs);
      } else {
        obs.variance = scale > 0.0 ? scale * scale : 1.0;
      }
      Dataset one;
      one.series.push_back(std::move(obs));
      data.merge(one);
    }
  }
  return data;
}

std::vector<double> hiv_ifn_levels() { return {0.0, 0.002, 0.02, 0.2, 2.0, 20.0, 200.0}; }

std::string hiv_condition_id(double level) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "I=%g", level);
  return buf;
}

ExternalFactors hiv_condition(double level) {
  return {hiv_condition_id(level),
          {{"C0", 1.0}, {"CI0", 0.0}, {"CH0", 0.0}, {"CHI0", 0.0}, {"H0", 1.0}, {"I", level}, {"ifn_decay", 0.0}}};
}

}  // namespace preddev
