#pragma once

#include "preddev/data.hpp"
#include "preddev/ode.hpp"
#include "preddev/parameters.hpp"
#include "preddev/rng.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace preddev {

struct ModelDescriptor {
  std::string name;
  ModelSystem system;
  Vector default_true_theta;
  std::vector<ExternalFactors> default_factors;
  ParameterSpace default_space;
  std::string documentation;
};

/// dx/dt = th1 (y - x), dy/dt = x (th2 - z) - y, dz/dt = x y - th3 z.
/// Initial state comes from factors x0, y0, z0 (defaults 10, 20, 3).
ModelDescriptor lorenz();

/// dx/dt = th1 th3 x - th2 th3 x y, dy/dt = th2 th4 x y - th1 th4 y, with
/// x(0), y(0) from factors x0, y0 (defaults 10, 10).
ModelDescriptor lotka_volterra();

/// IFN-alpha protection of CD4 T cells against HIV. States C, CI, CH, CHI, H.
/// Rates th1..th8; th7 (viral decay) is fixed to a known value, the remaining
/// seven are free. I(t) = I * exp(-ifn_decay t) is a known factor.
ModelDescriptor hiv_ifn();

/// The full eight-rate HIV system with nothing fixed.
ModelDescriptor hiv_ifn_full();

/// dx/dt = -k x, x(0) from factor x0. One parameter.
ModelDescriptor exp_decay();

/// dx/dt = -k x with the initial value x(0) as a second parameter.
ModelDescriptor exp_decay_unknown_ic();

/// dx/dt = a + b t, x(0) = x0. Trajectories are linear in (a, b).
ModelDescriptor linear_drift();

/// Pins the named parameters to fixed values; the returned system's
/// parameter vector holds only the remaining ones, in original order.
ModelSystem fix_parameters(const ModelSystem& model, const std::map<std::string, double>& fixed);

/// Lookup by name for the built-in models plus anything registered at runtime.
class ModelRegistry {
 public:
  using Factory = std::function<ModelDescriptor()>;

  static ModelRegistry& instance();
  void add(const std::string& name, Factory factory);
  ModelDescriptor get(const std::string& name) const;
  std::vector<std::string> names() const;

 private:
  ModelRegistry();
  std::map<std::string, Factory> factories_;
};

enum class NoiseDistribution { Normal, StudentT, Laplace, Uniform };

NoiseDistribution parse_noise_distribution(const std::string& s);
const char* to_string(NoiseDistribution d);

/// Observation noise. `sigma` is the standard deviation for every
/// distribution. Recorded variances are sigma^2, or unit weights where
/// sigma is zero, unless `estimate_variance` asks for replicate estimates.
struct NoiseSpec {
  NoiseDistribution distribution = NoiseDistribution::Normal;
  double dof = 5.0;  // Student-t degrees of freedom, > 2
  double default_sigma = 1.0;
  std::map<std::string, double> sigma;  // per observable
  bool estimate_variance = false;

  double sigma_for(const std::string& observable) const;
  double draw(Rng& rng, double scale) const;
  /// Distribution function of the unit-scale noise.
  double cdf(double x) const;
};

/// x~ = x(t; theta_true, nu) + eps, `Series::replicates` draws per time point.
Dataset simulate_dataset(const ModelSystem& model, const Vector& theta_true,
                         const std::vector<Experiment>& experiments, const NoiseSpec& noise, std::uint64_t seed,
                         const Tolerances& tol = Tolerances::fitting());

/// Observable values of one experiment series at theta, without noise.
std::vector<double> observe(const ModelSystem& model, const Vector& theta, const ExternalFactors& nu,
                            const Series& series, const Tolerances& tol = Tolerances::fitting());

/// The seven IFN-alpha levels of the HIV tissue-culture design, in ng/mL.
std::vector<double> hiv_ifn_levels();

/// Condition label used by the HIV scenarios, e.g. "I=0.002".
std::string hiv_condition_id(double level);

/// HIV condition at the given IFN-alpha level with the default initial state.
ExternalFactors hiv_condition(double level);

}  // namespace preddev
