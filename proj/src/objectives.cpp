#include "preddev/objectives.hpp"
#include "preddev/errors.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <stdexcept>

namespace preddev {

Workspace::Workspace(ModelSystem model) : model_(std::move(model)) {}

int Workspace::condition(const ExternalFactors& nu) {
  for (std::size_t i = 0; i < factors_.size(); ++i) {
    if (factors_[i].condition_id == nu.condition_id) {
      if (factors_[i].values != nu.values) {
        throw ConfigError("condition '" + nu.condition_id + "' declared with different factors");
      }
      return static_cast<int>(i);
    }
  }
  factors_.push_back(nu);
  bound_.push_back(model_.bind(nu));
  grids_.emplace_back();
  return static_cast<int>(factors_.size() - 1);
}

void Workspace::add_times(int cond, const std::vector<double>& times) {
  auto& g = grids_[static_cast<std::size_t>(cond)];
  for (std::size_t i = 1; i < times.size(); ++i) {
    if (!(times[i] > times[i - 1])) throw ConfigError("series times must be strictly ascending");
  }
  g.insert(g.end(), times.begin(), times.end());
  std::sort(g.begin(), g.end());
  g.erase(std::unique(g.begin(), g.end()), g.end());
}

void Workspace::resolve() {
  for (auto& block : blocks_) {
    for (auto& t : block) {
      const auto& g = grids_[static_cast<std::size_t>(t.condition)];
      t.time_index = static_cast<int>(std::lower_bound(g.begin(), g.end(), t.time) - g.begin());
    }
  }
}

std::vector<int> Workspace::conditions_of(std::initializer_list<int> blocks) const {
  std::set<int> all;
  for (int b : blocks) {
    const auto& c = conditions_of(b);
    all.insert(c.begin(), c.end());
  }
  return {all.begin(), all.end()};
}

int Workspace::add_fit(const std::vector<Experiment>& experiments, const Dataset& data) {
  std::vector<Term> block;
  std::set<int> conds;
  for (const auto& e : experiments) {
    const int c = condition(e.factors);
    conds.insert(c);
    for (const auto& s : e.series) {
      if (s.times.empty()) throw ConfigError("experiment " + e.id + " has an empty time set");
      const ObservedSeries* obs = data.find(e.factors.condition_id, s.observable);
      if (!obs) {
        throw DataError("dataset has no observations of " + s.observable + " at " +
                                    e.factors.condition_id);
      }
      if (!obs->variance || !(*obs->variance > 0.0)) {
        throw DataError("missing or non-positive noise variance for (" + s.observable + ", " +
                                    e.factors.condition_id + ")");
      }
      add_times(c, s.times);
      const Vector& w = model_.observable(s.observable).weights;
      for (double t : s.times) {
        auto it = std::find(obs->times.begin(), obs->times.end(), t);
        if (it == obs->times.end()) {
          throw DataError("dataset lacks " + s.observable + " at " + e.factors.condition_id +
                                      ", t=" + std::to_string(t));
        }
        Term term;
        term.condition = c;
        term.time = t;
        term.weights = w;
        term.inv_sigma = 1.0 / std::sqrt(*obs->variance);
        term.targets = obs->replicates[static_cast<std::size_t>(it - obs->times.begin())];
        if (term.targets.empty()) throw DataError("time point without replicates");
        block.push_back(std::move(term));
      }
    }
  }
  blocks_.push_back(std::move(block));
  block_conditions_.emplace_back(conds.begin(), conds.end());
  resolve();
  return static_cast<int>(blocks_.size() - 1);
}

int Workspace::add_deviation(const std::vector<Experiment>& problems) {
  std::vector<Term> block;
  std::set<int> conds;
  for (const auto& e : problems) {
    const int c = condition(e.factors);
    conds.insert(c);
    for (const auto& s : e.series) {
      if (s.times.empty()) throw ConfigError("problem " + e.id + " has an empty time set");
      if (!s.sigma || !(*s.sigma > 0.0)) {
        throw ConfigError("problem " + e.id + " needs a positive sigma for " + s.observable);
      }
      add_times(c, s.times);
      const Vector& w = model_.observable(s.observable).weights;
      for (double t : s.times) {
        Term term;
        term.condition = c;
        term.time = t;
        term.weights = w;
        term.inv_sigma = 1.0 / *s.sigma;
        term.multiplicity = std::max(1, s.replicates);
        block.push_back(std::move(term));
      }
    }
  }
  blocks_.push_back(std::move(block));
  block_conditions_.emplace_back(conds.begin(), conds.end());
  resolve();
  return static_cast<int>(blocks_.size() - 1);
}

std::optional<Simulation> Workspace::simulate(const Vector& theta, const Tolerances& tol, int order,
                                              const std::vector<int>* conditions) const {
  Simulation sim(factors_.size());
  auto run = [&](std::size_t c) {
    sim[c] = preddev::simulate(model_, theta, bound_[c], grids_[c], tol, order);
    return sim[c].ok();
  };
  if (conditions) {
    for (int c : *conditions) {
      if (!run(static_cast<std::size_t>(c))) return std::nullopt;
    }
  } else {
    for (std::size_t c = 0; c < factors_.size(); ++c) {
      if (!run(c)) return std::nullopt;
    }
  }
  return sim;
}

namespace {

struct ObservedValue {
  double value;
  Vector grad;
  Matrix hess;
};

ObservedValue observe_term(const Term& t, const Simulation& sim, int order) {
  const Trajectory& tr = sim[static_cast<std::size_t>(t.condition)];
  if (tr.times.empty()) throw std::logic_error("condition was not simulated");
  const auto k = static_cast<std::size_t>(t.time_index);
  ObservedValue o;
  o.value = tr.states.row(static_cast<Eigen::Index>(k)).dot(t.weights);
  if (order >= 1) o.grad = tr.sensitivities[k].transpose() * t.weights;
  if (order >= 2) {
    const auto p = o.grad.size();
    o.hess.resize(p, p);
    for (Eigen::Index j = 0; j < p; ++j) o.hess.col(j) = tr.second_order[k][static_cast<std::size_t>(j)].transpose() * t.weights;
  }
  return o;
}

}  // namespace

Derivatives Workspace::fit_error(int block, const Simulation& sim, int order) const {
  const int p = model_.param_dim();
  Derivatives d;
  if (order >= 1) d.gradient = Vector::Zero(p);
  if (order >= 2) d.hessian = Matrix::Zero(p, p);
  for (const auto& t : blocks_[static_cast<std::size_t>(block)]) {
    const ObservedValue y = observe_term(t, sim, order);
    const double w2 = t.inv_sigma * t.inv_sigma;
    double sum_targets = 0.0;
    for (double target : t.targets) {
      const double r = y.value - target;
      d.value += r * r * w2;
      sum_targets += target;
    }
    const double reps = static_cast<double>(t.targets.size());
    const double slope = reps * y.value - sum_targets;
    if (order >= 1) d.gradient += 2.0 * w2 * slope * y.grad;
    if (order >= 2) d.hessian += 2.0 * w2 * (reps * y.grad * y.grad.transpose() + slope * y.hess);
  }
  return d;
}

Derivatives Workspace::deviation(int block, const Simulation& first, const Simulation& second, int order) const {
  const int p = model_.param_dim();
  Derivatives d;
  if (order >= 1) d.gradient = Vector::Zero(2 * p);
  if (order >= 2) d.hessian = Matrix::Zero(2 * p, 2 * p);
  for (const auto& t : blocks_[static_cast<std::size_t>(block)]) {
    const ObservedValue a = observe_term(t, first, order);
    const ObservedValue b = observe_term(t, second, order);
    const double diff = (a.value - b.value) * t.inv_sigma;
    const double m = t.multiplicity;
    d.value += m * diff * diff;
    if (order >= 1) {
      d.gradient.head(p) += 2.0 * m * t.inv_sigma * diff * a.grad;
      d.gradient.tail(p) -= 2.0 * m * t.inv_sigma * diff * b.grad;
    }
    if (order >= 2) {
      const double w2 = t.inv_sigma * t.inv_sigma;
      d.hessian.topLeftCorner(p, p) += 2.0 * m * (w2 * a.grad * a.grad.transpose() + t.inv_sigma * diff * a.hess);
      d.hessian.bottomRightCorner(p, p) +=
          2.0 * m * (w2 * b.grad * b.grad.transpose() - t.inv_sigma * diff * b.hess);
      const Matrix cross = -2.0 * m * w2 * a.grad * b.grad.transpose();
      d.hessian.topRightCorner(p, p) += cross;
      d.hessian.bottomLeftCorner(p, p) += cross.transpose();
    }
  }
  return d;
}

std::vector<double> Workspace::observe(int block, const Simulation& sim) const {
  std::vector<double> out;
  for (const auto& t : blocks_[static_cast<std::size_t>(block)]) out.push_back(observe_term(t, sim, 0).value);
  return out;
}

void Workspace::set_targets(int block, const std::vector<std::vector<double>>& targets) {
  auto& terms = blocks_[static_cast<std::size_t>(block)];
  if (targets.size() != terms.size()) throw std::logic_error("target count does not match the block");
  for (std::size_t i = 0; i < terms.size(); ++i) terms[i].targets = targets[i];
}

std::vector<Experiment> resolve_sigmas(std::vector<Experiment> experiments, const Dataset& data) {
  for (auto& e : experiments) {
    for (auto& s : e.series) {
      if (s.sigma) continue;
      if (const ObservedSeries* obs = data.find(e.factors.condition_id, s.observable); obs && obs->variance) {
        s.sigma = std::sqrt(*obs->variance);
        continue;
      }
      double acc = 0.0;
      int count = 0;
      for (const auto& o : data.series) {
        if (o.observable == s.observable && o.variance) {
          acc += *o.variance;
          ++count;
        }
      }
      if (count == 0) {
        throw ConfigError("no sigma for " + s.observable + " in " + e.id +
                                    " and no observed condition to borrow it from");
      }
      s.sigma = std::sqrt(acc / count);
    }
  }
  return experiments;
}

}  // namespace preddev
