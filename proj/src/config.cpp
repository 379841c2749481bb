#include "preddev/config.hpp"
#include "preddev/errors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

namespace preddev {

namespace {

/// Object view that rejects keys nobody asked for.
class Fields {
 public:
  Fields(const Json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j.is_object()) throw ConfigError(where_ + ": expected an object");
  }
  ~Fields() noexcept(false) {
    if (std::uncaught_exceptions() > 0) return;
    for (const auto& [key, value] : j_.items()) {
      if (!used_.count(key)) throw ConfigError(where_ + ": unknown key '" + key + "'");
    }
  }
  bool has(const std::string& key) {
    used_.insert(key);
    return j_.contains(key) && !j_.at(key).is_null();
  }
  const Json& at(const std::string& key) {
    if (!has(key)) throw ConfigError(where_ + ": missing '" + key + "'");
    return j_.at(key);
  }
  template <class T>
  T get(const std::string& key, T fallback) {
    if (!has(key)) return fallback;
    return as<T>(j_.at(key), where_ + "." + key);
  }
  template <class T>
  T get(const std::string& key) {
    return as<T>(at(key), where_ + "." + key);
  }
  std::string path(const std::string& key) const { return where_ + "." + key; }

  template <class T>
  static T as(const Json& v, const std::string& where) {
    try {
      return v.get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError(where + ": wrong type");
    }
  }

 private:
  const Json& j_;
  std::string where_;
  std::set<std::string> used_;
};

Json vector_json(const Vector& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Vector json_vector(const Json& j, const std::string& where) {
  const auto v = Fields::as<std::vector<double>>(j, where);
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

NoiseSpec parse_noise(const Json& j, const std::string& where) {
  Fields f(j, where);
  NoiseSpec n;
  n.distribution = parse_noise_distribution(f.get<std::string>("distribution", "normal"));
  n.dof = f.get<double>("dof", n.dof);
  n.default_sigma = f.get<double>("sigma", n.default_sigma);
  n.sigma = f.get<std::map<std::string, double>>("sigmas", {});
  n.estimate_variance = f.get<bool>("estimate_variance", false);
  if (n.distribution == NoiseDistribution::StudentT && !(n.dof > 2.0)) {
    throw ConfigError(where + ": Student-t noise needs dof > 2");
  }
  return n;
}

Json noise_json(const NoiseSpec& n) {
  return Json{{"distribution", to_string(n.distribution)},
              {"dof", n.dof},
              {"sigma", n.default_sigma},
              {"sigmas", n.sigma},
              {"estimate_variance", n.estimate_variance}};
}

FitOptions parse_fit(const Json& j, const std::string& where) {
  Fields f(j, where);
  FitOptions o;
  o.restarts = f.get<int>("restarts", o.restarts);
  o.tol.rtol = f.get<double>("rtol", o.tol.rtol);
  o.tol.atol = f.get<double>("atol", o.tol.atol);
  o.minimize.gtol_rel = f.get<double>("gtol_rel", o.minimize.gtol_rel);
  o.minimize.gtol_abs = f.get<double>("gtol_abs", o.minimize.gtol_abs);
  o.minimize.ftol_rel = f.get<double>("ftol_rel", o.minimize.ftol_rel);
  o.minimize.max_iterations = f.get<int>("max_iterations", o.minimize.max_iterations);
  if (f.has("initial_points")) {
    for (const auto& p : f.at("initial_points")) o.initial_points.push_back(json_vector(p, f.path("initial_points")));
  }
  if (o.restarts < 0) throw ConfigError(where + ".restarts must be >= 0");
  return o;
}

Json fit_json(const FitOptions& o) {
  Json points = Json::array();
  for (const auto& p : o.initial_points) points.push_back(vector_json(p));
  return Json{{"restarts", o.restarts},
              {"rtol", o.tol.rtol},
              {"atol", o.tol.atol},
              {"gtol_rel", o.minimize.gtol_rel},
              {"gtol_abs", o.minimize.gtol_abs},
              {"ftol_rel", o.minimize.ftol_rel},
              {"max_iterations", o.minimize.max_iterations},
              {"initial_points", points}};
}

DeviationOptions parse_deviation(const Json& j, const std::string& where) {
  Fields f(j, where);
  DeviationOptions o;
  o.restarts = f.get<int>("restarts", o.restarts);
  o.walk_step = f.get<double>("walk_step", o.walk_step);
  o.walk_floor = f.get<double>("walk_floor", o.walk_floor);
  o.walk_steps = f.get<int>("walk_steps", o.walk_steps);
  o.walk_attempts = f.get<int>("walk_attempts", o.walk_attempts);
  o.anchor_pairs = f.get<int>("anchor_pairs", o.anchor_pairs);
  o.feasibility_tol = f.get<double>("feasibility_tol", o.feasibility_tol);
  o.barrier_tol.rtol = f.get<double>("barrier_rtol", o.barrier_tol.rtol);
  o.barrier_tol.atol = f.get<double>("barrier_atol", o.barrier_tol.atol);
  o.polish_tol.rtol = f.get<double>("polish_rtol", o.polish_tol.rtol);
  o.polish_tol.atol = f.get<double>("polish_atol", o.polish_tol.atol);
  if (f.has("barrier")) {
    Fields b(f.at("barrier"), f.path("barrier"));
    auto& x = o.barrier;
    x.mu_floor = b.get<double>("mu_floor", x.mu_floor);
    x.mu_scale = b.get<double>("mu_scale", x.mu_scale);
    x.reduction = b.get<double>("reduction", x.reduction);
    x.outer_iterations = b.get<int>("outer_iterations", x.outer_iterations);
    x.polish_iterations = b.get<int>("polish_iterations", x.polish_iterations);
    x.inner_gtol = b.get<double>("inner_gtol", x.inner_gtol);
    x.inner_max_iterations = b.get<int>("inner_max_iterations", x.inner_max_iterations);
    x.initial_radius = b.get<double>("initial_radius", x.initial_radius);
    if (!(x.reduction > 0.0 && x.reduction < 1.0)) throw ConfigError(where + ".barrier.reduction must be in (0, 1)");
  }
  if (o.restarts < 0) throw ConfigError(where + ".restarts must be >= 0");
  if (o.anchor_pairs < 0) throw ConfigError(where + ".anchor_pairs must be >= 0");
  if (o.anchor_pairs < 0) throw ConfigError(where + ".anchor_pairs must be >= 0");
  return o;
}

Json deviation_json(const DeviationOptions& o) {
  const auto& x = o.barrier;
  return Json{{"restarts", o.restarts},
              {"walk_step", o.walk_step},
              {"walk_floor", o.walk_floor},
              {"walk_steps", o.walk_steps},
              {"walk_attempts", o.walk_attempts},
              {"anchor_pairs", o.anchor_pairs},
              {"feasibility_tol", o.feasibility_tol},
              {"barrier_rtol", o.barrier_tol.rtol},
              {"barrier_atol", o.barrier_tol.atol},
              {"polish_rtol", o.polish_tol.rtol},
              {"polish_atol", o.polish_tol.atol},
              {"barrier",
               {{"mu_floor", x.mu_floor},
                {"mu_scale", x.mu_scale},
                {"reduction", x.reduction},
                {"outer_iterations", x.outer_iterations},
                {"polish_iterations", x.polish_iterations},
                {"inner_gtol", x.inner_gtol},
                {"inner_max_iterations", x.inner_max_iterations},
                {"initial_radius", x.initial_radius}}}};
}

ExperimentConfig parse_experiment(const Json& j, const std::string& where) {
  Fields f(j, where);
  ExperimentConfig e;
  e.id = f.get<std::string>("id");
  e.condition = f.get<std::string>("condition");
  for (const auto& s : f.at("series")) {
    Fields g(s, where + ".series");
    SeriesConfig sc;
    sc.observable = g.get<std::string>("observable");
    sc.times = parse_times(g.at("times"));
    sc.replicates = g.get<int>("replicates", 1);
    if (g.has("sigma")) sc.sigma = g.get<double>("sigma");
    if (sc.replicates < 1) throw ConfigError(where + ": replicates must be >= 1");
    if (sc.times.empty()) throw ConfigError(where + ": empty time set");
    e.series.push_back(std::move(sc));
  }
  if (e.series.empty()) throw ConfigError(where + ": no series");
  return e;
}

Json experiment_json(const ExperimentConfig& e) {
  Json series = Json::array();
  for (const auto& s : e.series) {
    Json js{{"observable", s.observable}, {"times", s.times}, {"replicates", s.replicates}};
    if (s.sigma) js["sigma"] = *s.sigma;
    series.push_back(js);
  }
  return Json{{"id", e.id}, {"condition", e.condition}, {"series", series}};
}

std::vector<ExperimentConfig> parse_experiments(Fields& f, const std::string& key) {
  std::vector<ExperimentConfig> out;
  if (!f.has(key)) return out;
  std::set<std::string> ids;
  for (const auto& e : f.at(key)) {
    out.push_back(parse_experiment(e, f.path(key)));
    if (!ids.insert(out.back().id).second) throw ConfigError(f.path(key) + ": duplicate id '" + out.back().id + "'");
  }
  return out;
}

Json experiments_json(const std::vector<ExperimentConfig>& list) {
  Json a = Json::array();
  for (const auto& e : list) a.push_back(experiment_json(e));
  return a;
}

ModelConfig parse_model(const Json& j, const Json* fixed) {
  ModelConfig m;
  if (j.is_string()) {
    m.name = j.get<std::string>();
  } else {
    Fields f(j, "model");
    InlineModelSpec s;
    s.name = f.get<std::string>("name");
    s.states = f.get<std::vector<std::string>>("states");
    s.parameters = f.get<std::vector<std::string>>("parameters");
    s.factors = f.get<std::vector<std::string>>("factors", {});
    s.rhs = f.get<std::map<std::string, std::string>>("rhs");
    s.initial = f.get<std::map<std::string, std::string>>("initial");
    s.observables = f.get<std::map<std::string, std::map<std::string, double>>>("observables", {});
    m.name = s.name;
    m.inline_spec = std::move(s);
  }
  if (fixed) m.fixed = Fields::as<std::map<std::string, double>>(*fixed, "fixed_parameters");
  return m;
}

Json model_json(const ModelConfig& m) {
  if (!m.inline_spec) return m.name;
  const auto& s = *m.inline_spec;
  return Json{{"name", s.name},       {"states", s.states},   {"parameters", s.parameters},
              {"factors", s.factors}, {"rhs", s.rhs},         {"initial", s.initial},
              {"observables", s.observables}};
}

ParameterSpace parse_space(const Json& j) {
  Fields f(j, "parameters");
  ParameterSpace s;
  s.names = f.get<std::vector<std::string>>("names");
  s.lower = json_vector(f.at("lower"), "parameters.lower");
  s.upper = json_vector(f.at("upper"), "parameters.upper");
  s.log_scale = f.get<std::vector<bool>>("log_scale", std::vector<bool>(s.names.size(), true));
  s.validate();
  return s;
}

Json space_json(const ParameterSpace& s) {
  return Json{{"names", s.names},
              {"lower", vector_json(s.lower)},
              {"upper", vector_json(s.upper)},
              {"log_scale", s.log_scale}};
}

DataConfig parse_data(const Json& j) {
  Fields f(j, "data");
  DataConfig d;
  if (f.has("file")) d.file = f.get<std::string>("file");
  d.variances = f.get<std::map<std::string, double>>("variances", {});
  if (f.has("simulate")) {
    Fields s(f.at("simulate"), "data.simulate");
    SimulationConfig sc;
    if (s.has("theta_true")) sc.theta_true = s.get<std::vector<double>>("theta_true");
    if (s.has("noise")) sc.noise = parse_noise(s.at("noise"), "data.simulate.noise");
    if (s.has("seed")) sc.seed = s.get<std::uint64_t>("seed");
    d.simulate = sc;
  }
  if (d.file && d.simulate) throw ConfigError("data: give either 'file' or 'simulate', not both");
  return d;
}

Json data_json(const DataConfig& d) {
  Json j{{"variances", d.variances}};
  if (d.file) j["file"] = *d.file;
  if (d.simulate) {
    Json s{{"noise", noise_json(d.simulate->noise)}};
    if (d.simulate->seed) s["seed"] = *d.simulate->seed;
    if (d.simulate->theta_true) s["theta_true"] = *d.simulate->theta_true;
    j["simulate"] = s;
  }
  return j;
}

ValidationConfig parse_validation(const Json& j) {
  Fields f(j, "validation");
  ValidationConfig v;
  if (f.has("coverage")) {
    Fields g(f.at("coverage"), "validation.coverage");
    v.coverage = CoverageConfig{g.get<int>("trials", 200)};
  }
  if (f.has("lemma1")) {
    Fields g(f.at("lemma1"), "validation.lemma1");
    Lemma1Config c;
    c.distributions = g.get<std::vector<std::string>>("distributions", c.distributions);
    c.xs = g.get<std::vector<double>>("xs", {});
    c.as = g.get<std::vector<double>>("as", {});
    c.tol = g.get<double>("tol", c.tol);
    for (const auto& d : c.distributions) parse_noise_distribution(d);
    v.lemma1 = c;
  }
  if (f.has("ordering")) {
    Fields g(f.at("ordering"), "validation.ordering");
    v.ordering = OrderingConfig{g.get<int>("trials", 1000)};
  }
  if (f.has("proposition")) {
    Fields g(f.at("proposition"), "validation.proposition");
    PropositionConfig c;
    c.pairs = g.get<int>("pairs", c.pairs);
    c.candidate = g.get<std::string>("candidate", "");
    if (g.has("eta")) c.eta = g.get<double>("eta");
    c.spread = g.get<double>("spread", c.spread);
    v.proposition = c;
  }
  if (f.has("worst_case")) {
    Fields g(f.at("worst_case"), "validation.worst_case");
    WorstCaseConfig c;
    c.trials = g.get<int>("trials", c.trials);
    c.min_reduction = g.get<double>("min_reduction", c.min_reduction);
    c.tolerance = g.get<double>("tolerance", c.tolerance);
    v.worst_case = c;
  }
  return v;
}

Json validation_json(const ValidationConfig& v) {
  Json j = Json::object();
  if (v.coverage) j["coverage"] = {{"trials", v.coverage->trials}};
  if (v.lemma1) {
    j["lemma1"] = {{"distributions", v.lemma1->distributions},
                   {"xs", v.lemma1->xs},
                   {"as", v.lemma1->as},
                   {"tol", v.lemma1->tol}};
  }
  if (v.ordering) j["ordering"] = {{"trials", v.ordering->trials}};
  if (v.proposition) {
    Json p{{"pairs", v.proposition->pairs}, {"candidate", v.proposition->candidate}, {"spread", v.proposition->spread}};
    if (v.proposition->eta) p["eta"] = *v.proposition->eta;
    j["proposition"] = p;
  }
  if (v.worst_case) {
    j["worst_case"] = {{"trials", v.worst_case->trials},
                       {"min_reduction", v.worst_case->min_reduction},
                       {"tolerance", v.worst_case->tolerance}};
  }
  return j;
}

Experiment to_experiment(const ExperimentConfig& e, const std::map<std::string, ExternalFactors>& conditions) {
  auto it = conditions.find(e.condition);
  if (it == conditions.end()) throw ConfigError("'" + e.id + "' refers to unknown condition '" + e.condition + "'");
  Experiment out{e.id, it->second, {}};
  for (const auto& s : e.series) out.series.push_back(Series{s.observable, s.times, s.replicates, s.sigma});
  return out;
}

}  // namespace

const std::vector<std::string>& pipeline_stages() {
  static const std::vector<std::string> stages{"simulate", "fit", "deviate", "impact", "rank", "sequence", "validate"};
  return stages;
}

std::vector<double> parse_times(const Json& j) {
  if (j.is_array()) {
    auto t = Fields::as<std::vector<double>>(j, "times");
    for (std::size_t i = 1; i < t.size(); ++i) {
      if (!(t[i] > t[i - 1])) throw ConfigError("times must be strictly ascending");
    }
    return t;
  }
  Fields f(j, "times");
  const double start = f.get<double>("start");
  const double stop = f.get<double>("stop");
  const bool has_step = f.has("step"), has_count = f.has("count");
  if (has_step == has_count) throw ConfigError("times: give exactly one of 'step' and 'count'");
  if (!(stop >= start)) throw ConfigError("times: stop must not precede start");
  std::vector<double> t;
  if (has_count) {
    const int n = f.get<int>("count");
    if (n < 1) throw ConfigError("times: count must be >= 1");
    if (n == 1) return {start};
    for (int i = 0; i < n; ++i) t.push_back(start + (stop - start) * i / (n - 1));
  } else {
    const double step = f.get<double>("step");
    if (!(step > 0.0)) throw ConfigError("times: step must be positive");
    const long n = std::lround(std::floor((stop - start) / step + 1e-9));
    for (long i = 0; i <= n; ++i) t.push_back(start + step * static_cast<double>(i));
  }
  return t;
}

ScenarioConfig parse_config(const Json& j) {
  Fields f(j, "config");
  ScenarioConfig c;
  c.name = f.get<std::string>("name", "scenario");
  c.seed = f.get<std::uint64_t>("seed", 0);
  c.stages = f.get<std::vector<std::string>>("stages", {"fit"});
  for (const auto& s : c.stages) {
    const auto& all = pipeline_stages();
    if (std::find(all.begin(), all.end(), s) == all.end()) throw ConfigError("unknown stage '" + s + "'");
  }
  c.model = parse_model(f.at("model"), f.has("fixed_parameters") ? &f.at("fixed_parameters") : nullptr);
  if (f.has("parameters")) c.parameters = parse_space(f.at("parameters"));
  if (f.has("conditions")) {
    std::set<std::string> ids;
    for (const auto& cj : f.at("conditions")) {
      Fields g(cj, "conditions");
      ConditionConfig cc{g.get<std::string>("id"), g.get<std::map<std::string, double>>("factors", {})};
      if (!ids.insert(cc.id).second) throw ConfigError("duplicate condition id '" + cc.id + "'");
      c.conditions.push_back(std::move(cc));
    }
  }
  c.experiments = parse_experiments(f, "experiments");
  c.predictions = parse_experiments(f, "predictions");
  c.candidates = parse_experiments(f, "candidates");
  if (f.has("data")) c.data = parse_data(f.at("data"));
  if (f.has("fit")) c.bootstrap.fit = parse_fit(f.at("fit"), "fit");
  if (f.has("bootstrap")) {
    Fields g(f.at("bootstrap"), "bootstrap");
    c.bootstrap.samples = g.get<int>("samples", c.bootstrap.samples);
    c.bootstrap.alpha = g.get<double>("alpha", c.bootstrap.alpha);
    c.bootstrap.mode = parse_bootstrap_mode(g.get<std::string>("mode", "auto"));
  }
  if (!(c.bootstrap.alpha > 0.0 && c.bootstrap.alpha < 1.0)) throw ConfigError("bootstrap.alpha must be in (0, 1)");
  if (f.has("deviation")) c.deviation = parse_deviation(f.at("deviation"), "deviation");
  if (f.has("eta")) {
    Fields g(f.at("eta"), "eta");
    c.eta.mode = parse_eta_mode(g.get<std::string>("mode", "ratio"));
    c.eta.multiplier = g.get<double>("multiplier", c.eta.multiplier);
    c.eta.alpha = g.get<double>("alpha", c.eta.alpha);
    c.eta.fixed = g.get<double>("fixed", c.eta.fixed);
  }
  if (!(c.eta.multiplier > 0.0)) throw ConfigError("eta.multiplier must be positive");
  if (f.has("design")) {
    Fields g(f.at("design"), "design");
    c.design.rounds = g.get<int>("rounds", c.design.rounds);
    c.design.reduction_flag = g.get<double>("reduction_flag", c.design.reduction_flag);
    c.design.stop_reduction = g.get<double>("stop_reduction", c.design.stop_reduction);
    c.design.stop_patience = g.get<int>("stop_patience", c.design.stop_patience);
    if (g.has("candidate_file")) c.design.candidate_file = g.get<std::string>("candidate_file");
  }
  if (f.has("validation")) c.validation = parse_validation(f.at("validation"));

  std::set<std::string> declared;
  for (const auto& cc : c.conditions) declared.insert(cc.id);
  for (const auto* list : {&c.experiments, &c.predictions, &c.candidates}) {
    for (const auto& e : *list) {
      if (!declared.count(e.condition)) {
        throw ConfigError("'" + e.id + "' refers to undeclared condition '" + e.condition + "'");
      }
    }
  }
  return c;
}

ScenarioConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  Json j;
  try {
    j = Json::parse(in, nullptr, true, true);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
  ScenarioConfig c = parse_config(j);
  if (c.data.file && !c.data.file->empty() && c.data.file->front() != '/') {
    const auto slash = path.find_last_of('/');
    if (slash != std::string::npos) c.data.file = path.substr(0, slash + 1) + *c.data.file;
  }
  if (c.design.candidate_file && !c.design.candidate_file->empty() && c.design.candidate_file->front() != '/') {
    const auto slash = path.find_last_of('/');
    if (slash != std::string::npos) c.design.candidate_file = path.substr(0, slash + 1) + *c.design.candidate_file;
  }
  return c;
}

Json to_json(const ScenarioConfig& c) {
  Json j;
  j["name"] = c.name;
  j["seed"] = c.seed;
  j["stages"] = c.stages;
  j["model"] = model_json(c.model);
  j["fixed_parameters"] = c.model.fixed;
  if (c.parameters) j["parameters"] = space_json(*c.parameters);
  Json conds = Json::array();
  for (const auto& cc : c.conditions) conds.push_back({{"id", cc.id}, {"factors", cc.factors}});
  j["conditions"] = conds;
  j["experiments"] = experiments_json(c.experiments);
  j["predictions"] = experiments_json(c.predictions);
  j["candidates"] = experiments_json(c.candidates);
  j["data"] = data_json(c.data);
  j["fit"] = fit_json(c.bootstrap.fit);
  j["bootstrap"] = {{"samples", c.bootstrap.samples},
                    {"alpha", c.bootstrap.alpha},
                    {"mode", to_string(c.bootstrap.mode)}};
  j["deviation"] = deviation_json(c.deviation);
  j["eta"] = {{"mode", to_string(c.eta.mode)},
              {"multiplier", c.eta.multiplier},
              {"alpha", c.eta.alpha},
              {"fixed", c.eta.fixed}};
  Json design{{"rounds", c.design.rounds},
              {"reduction_flag", c.design.reduction_flag},
              {"stop_reduction", c.design.stop_reduction},
              {"stop_patience", c.design.stop_patience}};
  if (c.design.candidate_file) design["candidate_file"] = *c.design.candidate_file;
  j["design"] = design;
  j["validation"] = validation_json(c.validation);
  return j;
}

ResolvedScenario resolve(const ScenarioConfig& c) {
  ResolvedScenario r;
  std::optional<ParameterSpace> default_space;
  if (c.model.inline_spec) {
    r.model = inline_model(*c.model.inline_spec);
  } else {
    ModelDescriptor d = ModelRegistry::instance().get(c.model.name);
    r.model = d.system;
    r.default_theta = d.default_true_theta;
    default_space = d.default_space;
  }
  if (!c.model.fixed.empty()) {
    std::vector<int> keep;
    for (int i = 0; i < r.model.param_dim(); ++i) {
      if (!c.model.fixed.count(r.model.param_names[static_cast<std::size_t>(i)])) keep.push_back(i);
    }
    r.model = fix_parameters(r.model, c.model.fixed);
    auto pick = [&keep](const Vector& v) {
      Vector out(static_cast<Eigen::Index>(keep.size()));
      for (std::size_t k = 0; k < keep.size(); ++k) out[static_cast<Eigen::Index>(k)] = v[keep[k]];
      return out;
    };
    if (r.default_theta.size() > 0) r.default_theta = pick(r.default_theta);
    if (default_space) {
      ParameterSpace s;
      s.names = r.model.param_names;
      s.lower = pick(default_space->lower);
      s.upper = pick(default_space->upper);
      for (int i : keep) s.log_scale.push_back(default_space->log_scale[static_cast<std::size_t>(i)]);
      default_space = s;
    }
  }
  if (c.parameters) {
    r.space = *c.parameters;
  } else if (default_space) {
    r.space = *default_space;
  } else {
    throw ConfigError("model '" + c.model.name + "' needs an explicit 'parameters' box");
  }
  if (r.space.names != r.model.param_names) throw ConfigError("parameter box names do not match the model parameters");
  r.space.validate();

  std::map<std::string, ExternalFactors> conditions;
  for (const auto& cc : c.conditions) {
    ExternalFactors nu{cc.id, cc.factors};
    r.model.bind(nu);
    conditions[cc.id] = nu;
  }
  for (const auto& e : c.experiments) r.experiments.push_back(to_experiment(e, conditions));
  for (const auto& e : c.predictions) r.predictions.push_back(to_experiment(e, conditions));
  for (const auto& e : c.candidates) {
    r.candidates.push_back(to_experiment(e, conditions));
    check_disjoint(r.candidates.back(), r.experiments);
  }
  for (const auto* list : {&r.experiments, &r.predictions, &r.candidates}) {
    for (const auto& e : *list) {
      for (const auto& s : e.series) r.model.observable(s.observable);
    }
  }
  return r;
}

Vector truth(const ScenarioConfig& c, const ResolvedScenario& r) {
  if (c.data.simulate && c.data.simulate->theta_true) {
    const auto& t = *c.data.simulate->theta_true;
    if (static_cast<int>(t.size()) != r.model.param_dim()) {
      throw ConfigError("theta_true has " + std::to_string(t.size()) + " entries, the model has " +
                        std::to_string(r.model.param_dim()) + " free parameters");
    }
    return Eigen::Map<const Vector>(t.data(), static_cast<Eigen::Index>(t.size()));
  }
  if (r.default_theta.size() == 0) throw ConfigError("no theta_true given and the model has no default");
  return r.default_theta;
}

DesignSettings design_settings(const ScenarioConfig& c) {
  DesignSettings s;
  s.bootstrap = c.bootstrap;
  s.deviation = c.deviation;
  s.eta = c.eta;
  s.reduction_flag = c.design.reduction_flag;
  s.stop_reduction = c.design.stop_reduction;
  s.stop_patience = c.design.stop_patience;
  return s;
}

}  // namespace preddev
