#include "preddev/pipeline.hpp"
#include "preddev/errors.hpp"
#include "preddev/io.hpp"
#include "preddev/validation.hpp"

#include <boost/math/distributions/chi_squared.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

namespace preddev {

namespace {

Json vec(const Vector& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Json named(const Vector& v, const ParameterSpace& space) {
  Json o = Json::object();
  for (Eigen::Index i = 0; i < v.size(); ++i) o[space.names[static_cast<std::size_t>(i)]] = v[i];
  return o;
}

/// Non-finite numbers are written as strings so the report stays valid JSON.
Json num(double v) {
  if (std::isfinite(v)) return v;
  return format_double(v);
}

struct Table {
  Json condition_id = Json::array(), observable = Json::array(), time = Json::array(), series = Json::array(),
       value = Json::array();

  void add(const std::string& c, const std::string& o, double t, const std::string& s, double v) {
    condition_id.push_back(c);
    observable.push_back(o);
    time.push_back(t);
    series.push_back(s);
    value.push_back(num(v));
  }
  Json json() const {
    return Json{{"condition_id", condition_id},
                {"observable", observable},
                {"time", time},
                {"series", series},
                {"value", value}};
  }
};

std::vector<double> dense_grid(const ModelSystem& model, const Series& s) {
  const double t0 = model.initial_time;
  const double t1 = *std::max_element(s.times.begin(), s.times.end());
  std::vector<double> g;
  const int n = 200;
  for (int i = 0; i <= n; ++i) g.push_back(t0 + (t1 - t0) * i / n);
  g.insert(g.end(), s.times.begin(), s.times.end());
  std::sort(g.begin(), g.end());
  g.erase(std::unique(g.begin(), g.end()), g.end());
  return g;
}

void add_curve(Table& table, const ModelSystem& model, const Vector& theta, const Experiment& e, const Series& s,
               const std::string& label) {
  Series dense{s.observable, dense_grid(model, s), 1, s.sigma};
  const auto y = observe(model, theta, e.factors, dense);
  for (std::size_t k = 0; k < y.size(); ++k) table.add(e.factors.condition_id, s.observable, dense.times[k], label, y[k]);
}

void add_data(Table& table, const Dataset& data, const Experiment& e, const Series& s) {
  const ObservedSeries* obs = data.find(e.factors.condition_id, s.observable);
  if (!obs) return;
  for (double t : s.times) {
    auto it = std::find(obs->times.begin(), obs->times.end(), t);
    if (it == obs->times.end()) continue;
    for (double v : obs->replicates[static_cast<std::size_t>(it - obs->times.begin())]) {
      table.add(e.factors.condition_id, s.observable, t, "data", v);
    }
  }
}

Json pair_table(const ModelSystem& model, const Vector& theta1, const Vector& theta2,
                const std::vector<const std::vector<Experiment>*>& groups, const Dataset* data,
                const std::string& first, const std::string& second) {
  Table table;
  for (const auto* group : groups) {
    for (const auto& e : *group) {
      for (const auto& s : e.series) {
        if (data) add_data(table, *data, e, s);
        add_curve(table, model, theta1, e, s, first);
        add_curve(table, model, theta2, e, s, second);
      }
    }
  }
  return table.json();
}

Json pointwise(const ModelSystem& model, const Vector& theta1, const Vector& theta2,
               const std::vector<PredictionProblem>& problems) {
  Json rows = Json::array();
  for (const auto& p : problems) {
    for (const auto& s : p.series) {
      const auto y1 = observe(model, theta1, p.factors, s);
      const auto y2 = observe(model, theta2, p.factors, s);
      const double sigma = s.sigma.value_or(1.0);
      for (std::size_t k = 0; k < s.times.size(); ++k) {
        rows.push_back({{"problem", p.id},
                        {"condition_id", p.factors.condition_id},
                        {"observable", s.observable},
                        {"time", s.times[k]},
                        {"first", num(y1[k])},
                        {"second", num(y2[k])},
                        {"gap_sigma", num(std::abs(y1[k] - y2[k]) / sigma)}});
      }
    }
  }
  return rows;
}

Json restarts_json(const std::vector<PairRestart>& restarts) {
  Json a = Json::array();
  for (const auto& r : restarts) {
    a.push_back({{"warm", r.warm},
                 {"value", num(r.value)},
                 {"feasible", r.feasible},
                 {"walk_accepted", r.walk_accepted},
                 {"outer_iterations", r.outer_iterations},
                 {"inner_iterations", r.inner_iterations},
                 {"reason", r.reason}});
  }
  return a;
}

Json ranking_json(const std::vector<RankedCandidate>& ranking, const ParameterSpace& space, double deviation) {
  Json a = Json::array();
  for (std::size_t i = 0; i < ranking.size(); ++i) {
    const auto& r = ranking[i];
    Json row = to_json(r.estimate, space);
    row["rank"] = i + 1;
    row["declaration_index"] = r.declaration_index;
    row["predicted_reduction"] = r.predicted_reduction;
    row["relative_change"] = r.estimate.failed || !(deviation > 0.0) ? Json(nullptr) : num(r.estimate.value / deviation - 1.0);
    a.push_back(row);
  }
  return a;
}

std::vector<std::string> closure(std::vector<std::string> requested) {
  std::set<std::string> need(requested.begin(), requested.end());
  if (need.count("sequence") || need.count("rank") || need.count("impact")) need.insert("deviate");
  if (need.count("deviate")) need.insert("fit");
  std::vector<std::string> out;
  for (const auto& s : pipeline_stages()) {
    if (need.count(s)) out.push_back(s);
  }
  return out;
}

std::vector<double> default_grid(double lo, double hi, double step) {
  std::vector<double> g;
  const long n = std::lround((hi - lo) / step);
  for (long i = 0; i <= n; ++i) g.push_back(lo + step * static_cast<double>(i));
  return g;
}

Dataset acquire_data(const ScenarioConfig& config, const ResolvedScenario& scenario, Json& summary) {
  if (config.data.file) {
    Dataset d = load_dataset(*config.data.file, config.data.variances);
    summary = {{"source", "file"}, {"file", *config.data.file}};
    Dataset picked = select(d, scenario.experiments);
    summary["observations"] = picked.observation_count();
    return picked;
  }
  if (!config.data.simulate) throw ConfigError("the scenario has no data: give data.file or data.simulate");
  const auto& sim = *config.data.simulate;
  const std::uint64_t seed = sim.seed ? *sim.seed : derive_stream(config.seed, "simulate")();
  const Vector theta = truth(config, scenario);
  Dataset d = simulate_dataset(scenario.model, theta, scenario.experiments, sim.noise, seed);
  summary = {{"source", "simulated"},
             {"seed", seed},
             {"theta_true", named(theta, scenario.space)},
             {"observations", d.observation_count()}};
  return d;
}

Json validate_stage(const ScenarioConfig& config, const ResolvedScenario& scenario, const Dataset* data) {
  Json out = Json::object();
  const auto& v = config.validation;
  const bool simulated = config.data.simulate.has_value();
  auto need_truth = [&]() {
    if (!simulated) throw ConfigError("validation studies need data.simulate for the truth and noise");
    return truth(config, scenario);
  };
  if (v.lemma1) {
    const auto xs = v.lemma1->xs.empty() ? default_grid(0.0, 3.0, 0.1) : v.lemma1->xs;
    const auto as = v.lemma1->as.empty() ? default_grid(-3.0, 3.0, 0.1) : v.lemma1->as;
    Json reports = Json::array();
    for (const auto& name : v.lemma1->distributions) {
      NoiseSpec noise;
      noise.distribution = parse_noise_distribution(name);
      const Lemma1Report r = check_lemma1(noise, xs, as, v.lemma1->tol);
      reports.push_back({{"distribution", r.distribution},
                         {"checks", r.checks},
                         {"violations", r.violations},
                         {"max_excess", r.max_excess},
                         {"passed", r.passed}});
    }
    out["lemma1"] = reports;
  }
  if (v.coverage) {
    CoverageSpec spec;
    spec.name = config.name;
    spec.model = scenario.model;
    spec.space = scenario.space;
    spec.theta_true = need_truth();
    spec.noise = config.data.simulate->noise;
    spec.experiments = scenario.experiments;
    spec.problems = scenario.predictions;
    spec.trials = v.coverage->trials;
    spec.bootstrap = config.bootstrap;
    spec.deviation = config.deviation;
    const CoverageStudy s = run_coverage_study(spec, derive_stream(config.seed, "validate.coverage")());
    Json trials = Json::array();
    for (const auto& t : s.trials) {
      trials.push_back({{"trial", t.trial},
                        {"excluded", t.excluded},
                        {"error", t.error},
                        {"first", t.first},
                        {"second", t.second},
                        {"deviation", num(t.deviation)},
                        {"true_vs_first", num(t.true_vs_first)},
                        {"true_vs_second", num(t.true_vs_second)},
                        {"z_star", num(t.z_star)},
                        {"z_upper", num(t.z_upper)},
                        {"z_true", num(t.z_true)}});
    }
    out["coverage"] = {{"used", s.used},
                       {"excluded", s.excluded},
                       {"coverage", s.coverage},
                       {"truth_feasible", s.truth_feasible},
                       {"fresh_bound", s.fresh_bound},
                       {"slack", s.slack},
                       {"valid", s.valid},
                       {"passed", s.passed},
                       {"trials", trials}};
  }
  if (v.ordering) {
    OrderingSpec spec;
    spec.model = scenario.model;
    spec.space = scenario.space;
    spec.theta_true = need_truth();
    spec.noise = config.data.simulate->noise;
    spec.experiments = scenario.experiments;
    spec.trials = v.ordering->trials;
    spec.fit = config.bootstrap.fit;
    const OrderingReport r = check_fit_error_ordering(spec, derive_stream(config.seed, "validate.ordering")());
    out["ordering"] = {{"theta_star", named(r.theta_star, scenario.space)},
                       {"grid", r.grid},
                       {"exceed_true", r.exceed_true},
                       {"exceed_star", r.exceed_star},
                       {"slack", r.slack},
                       {"violations", r.violations},
                       {"passed", r.passed}};
  }
  if (v.proposition) {
    if (scenario.candidates.empty()) throw ConfigError("the proposition check needs a candidate");
    const auto& id = v.proposition->candidate;
    auto it = std::find_if(scenario.candidates.begin(), scenario.candidates.end(),
                           [&](const Experiment& e) { return id.empty() || e.id == id; });
    if (it == scenario.candidates.end()) throw ConfigError("unknown proposition candidate '" + id + "'");
    PropositionSpec spec;
    spec.model = scenario.model;
    spec.space = scenario.space;
    spec.candidate = *it;
    const Vector theta = need_truth();
    spec.candidate_data = simulate_dataset(scenario.model, theta, {*it}, config.data.simulate->noise,
                                           derive_stream(config.seed, "proposition")());
    const std::size_t count = it->observation_count();
    spec.eta = v.proposition->eta
                   ? *v.proposition->eta
                   : boost::math::quantile(boost::math::chi_squared(static_cast<double>(count)),
                                           1.0 - config.bootstrap.alpha);
    spec.center = theta;
    if (!(z_fit(scenario.model, theta, {*it}, spec.candidate_data) <= spec.eta)) {
      FitProblem problem(scenario.model, scenario.space, {*it}, spec.candidate_data);
      spec.center = problem.refine(theta, config.bootstrap.fit).theta;
    }
    spec.pairs = v.proposition->pairs;
    spec.spread = v.proposition->spread;
    const PropositionReport r = check_proposition(spec, derive_stream(config.seed, "validate.proposition")());
    out["proposition"] = {{"candidate", it->id},
                          {"eta", spec.eta},
                          {"pairs", r.pairs},
                          {"boundary_pairs", r.boundary_pairs},
                          {"chain_violations", r.chain_violations},
                          {"bound_violations", r.bound_violations},
                          {"max_dev_over_bound", r.max_dev_over_bound},
                          {"mean_triangle_slack", r.mean_triangle_slack},
                          {"passed", r.passed}};
  }
  if (v.worst_case) {
    WorstCaseSpec spec;
    spec.model = scenario.model;
    spec.space = scenario.space;
    spec.theta_true = need_truth();
    spec.noise = config.data.simulate->noise;
    spec.experiments = scenario.experiments;
    spec.problems = scenario.predictions;
    spec.candidates = scenario.candidates;
    spec.settings = design_settings(config);
    spec.trials = v.worst_case->trials;
    spec.min_reduction = v.worst_case->min_reduction;
    spec.tolerance = v.worst_case->tolerance;
    const WorstCaseReport r = run_worst_case_study(spec, derive_stream(config.seed, "validate.worst_case")());
    Json trials = Json::array();
    for (const auto& t : r.trials) {
      trials.push_back({{"trial", t.trial},
                        {"excluded", t.excluded},
                        {"error", t.error},
                        {"candidate", t.candidate},
                        {"deviation", num(t.deviation)},
                        {"estimated", num(t.estimated)},
                        {"actual", num(t.actual)},
                        {"qualifying", t.qualifying},
                        {"held", t.held}});
    }
    out["worst_case"] = {{"excluded", r.excluded},
                         {"qualifying", r.qualifying},
                         {"held", r.held},
                         {"fraction", r.fraction},
                         {"passed", r.passed},
                         {"trials", trials}};
  }
  (void)data;
  return out;
}

}  // namespace

Json to_json(const FitResult& fit, const ParameterSpace& space) {
  Json restarts = Json::array();
  for (const auto& r : fit.restarts) {
    restarts.push_back({{"start", vec(r.start)},
                        {"theta", vec(r.theta)},
                        {"value", num(r.value)},
                        {"converged", r.converged},
                        {"iterations", r.iterations},
                        {"reason", r.reason}});
  }
  Json j{{"theta_star", named(fit.theta_star, space)},
         {"z_star", num(fit.z_star)},
         {"best_restart", fit.best_restart},
         {"restarts", restarts}};
  if (fit.has_interval()) {
    j["z_lower"] = num(fit.z_lower);
    j["z_upper"] = num(fit.z_upper);
    j["bootstrap"] = {{"kept", fit.bootstrap_sample.size()},
                      {"discarded", fit.bootstrap_discarded},
                      {"sample", fit.bootstrap_sample}};
  }
  return j;
}

Json to_json(const DeviationResult& dev, const ParameterSpace& space) {
  return Json{{"value", num(dev.value)},
              {"theta1", named(dev.theta1, space)},
              {"theta2", named(dev.theta2, space)},
              {"z_upper", num(dev.z_upper)},
              {"fit1", num(dev.fit1)},
              {"fit2", num(dev.fit2)},
              {"residual1", num(dev.residual1)},
              {"residual2", num(dev.residual2)},
              {"no_deviation", dev.no_deviation},
              {"best_restart", dev.best_restart},
              {"restarts", restarts_json(dev.restarts)}};
}

Json to_json(const ImpactEstimate& est, const ParameterSpace& space) {
  Json j{{"candidate", est.candidate_id},
         {"failed", est.failed},
         {"observations", est.candidate_observations},
         {"eta", num(est.eta)}};
  if (est.failed) {
    j["error"] = est.error;
    return j;
  }
  j["value"] = num(est.value);
  j["candidate_value"] = num(est.candidate_value);
  j["theta1"] = named(est.theta1, space);
  j["theta2"] = named(est.theta2, space);
  j["fit1"] = num(est.fit1);
  j["fit2"] = num(est.fit2);
  j["no_deviation"] = est.no_deviation;
  return j;
}

StageFailure classify(const std::string& stage, const std::exception& e) {
  StageFailure f{stage, "internal", e.what(), 1};
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const nlohmann::json::exception*>(&e)) {
    f.kind = "config";
    f.exit_code = 2;
  } else if (dynamic_cast<const DataError*>(&e)) {
    f.kind = "data";
    f.exit_code = 4;
  } else if (dynamic_cast<const SolverError*>(&e)) {
    f.kind = "solver";
    f.exit_code = 3;
  }
  return f;
}

PipelineOutcome run_pipeline(const ScenarioConfig& config, std::vector<std::string> stages) {
  if (stages.empty()) stages = config.stages;
  PipelineOutcome out;
  Json& report = out.report;
  report["tool"] = "preddev";
  report["version"] = kVersion;
  report["seed"] = config.seed;
  report["config"] = to_json(config);
  const auto plan = closure(stages);
  report["stages"] = plan;
  report["status"] = "ok";
  Json tables = Json::object();

  std::string current = "resolve";
  try {
    const ResolvedScenario scenario = resolve(config);
    const DesignSettings settings = design_settings(config);
    const auto wants = [&](const std::string& s) { return std::find(plan.begin(), plan.end(), s) != plan.end(); };
    const bool needs_data = wants("simulate") || wants("fit");

    if (needs_data) {
      current = wants("simulate") ? "simulate" : "fit";
      Json summary;
      out.data = acquire_data(config, scenario, summary);
      estimate_missing_variances(out.data);
      report["data"] = summary;
    }

    std::optional<FitResult> fitted;
    if (wants("fit")) {
      current = "fit";
      if (scenario.experiments.empty()) throw ConfigError("the fit stage needs experiments");
      fitted = fit_with_interval(scenario.model, scenario.space, scenario.experiments, out.data, config.bootstrap,
                                 config.seed);
      report["fit"] = to_json(*fitted, scenario.space);
      Table fit_table;
      for (const auto& e : scenario.experiments) {
        for (const auto& s : e.series) {
          add_data(fit_table, out.data, e, s);
          add_curve(fit_table, scenario.model, fitted->theta_star, e, s, "best_fit");
        }
      }
      tables["fit"] = fit_table.json();
    }

    std::optional<DesignContext> context;
    if (wants("deviate")) {
      current = "deviate";
      if (scenario.predictions.empty()) throw ConfigError("the deviate stage needs prediction problems");
      context = DesignContext::from_fit(scenario.model, scenario.space, scenario.experiments, out.data,
                                        scenario.predictions, settings, config.seed, *fitted);
      const auto& dev = context->deviation();
      Json dj = to_json(dev, scenario.space);
      dj["pointwise"] = pointwise(scenario.model, dev.theta1, dev.theta2, context->problems());
      report["deviation"] = dj;
      tables["deviation"] = pair_table(scenario.model, dev.theta1, dev.theta2,
                                       {&scenario.experiments, &context->problems()}, &out.data, "dev_1", "dev_2");
    }

    if (wants("impact") || wants("rank")) {
      current = wants("rank") ? "rank" : "impact";
      if (scenario.candidates.empty()) throw ConfigError("the " + current + " stage needs candidates");
      const auto candidates = resolve_sigmas(scenario.candidates, out.data);
      std::vector<ImpactEstimate> estimates;
      if (wants("rank")) {
        const auto ranking = rank_candidates(*context, candidates);
        report["ranking"] = ranking_json(ranking, scenario.space, context->deviation().value);
        estimates.resize(candidates.size());
        for (const auto& r : ranking) estimates[r.declaration_index] = r.estimate;
      } else {
        for (const auto& c : candidates) estimates.push_back(context->impact(c));
      }
      Json impacts = Json::array();
      for (std::size_t i = 0; i < estimates.size(); ++i) {
        impacts.push_back(to_json(estimates[i], scenario.space));
        if (estimates[i].failed) continue;
        const std::vector<Experiment> one{candidates[i]};
        tables["impact_" + candidates[i].id] =
            pair_table(scenario.model, estimates[i].theta1, estimates[i].theta2, {&context->problems(), &one},
                       nullptr, "impact_1", "impact_2");
      }
      report["impacts"] = impacts;
      report["deviation_reconciled"] = {{"value", num(context->deviation().value)},
                                        {"reconciliations", context->reconciliations()}};
    }

    if (wants("sequence")) {
      current = "sequence";
      if (scenario.candidates.empty()) throw ConfigError("the sequence stage needs candidates");
      std::unique_ptr<DataSource> source;
      if (config.design.candidate_file) {
        source = std::make_unique<DatasetSource>(load_dataset(*config.design.candidate_file, config.data.variances));
      } else if (config.data.simulate) {
        source = std::make_unique<SimulatedSource>(scenario.model, truth(config, scenario), config.data.simulate->noise,
                                                   config.seed);
      } else {
        throw ConfigError("the sequence stage needs design.candidate_file or data.simulate");
      }
      const auto candidates = resolve_sigmas(scenario.candidates, out.data);
      DesignContext seq = *context;
      const DesignTrace trace = sequential_design(seq, candidates, *source, config.design.rounds);
      Json rounds = Json::array();
      for (const auto& r : trace.rounds) {
        Json rj{{"round", r.round},
                {"chosen", r.chosen},
                {"deviation_before", num(r.deviation_before)},
                {"predicted", num(r.predicted)},
                {"deviation_after", num(r.deviation_after)},
                {"change", num(r.change)},
                {"z_upper", num(r.z_upper)},
                {"failed", r.failed},
                {"error", r.error},
                {"ranking", ranking_json(r.ranking, scenario.space, r.deviation_before)}};
        if (r.theta_star.size() > 0) rj["theta_star"] = named(r.theta_star, scenario.space);
        if (!r.failed && r.deviation.theta1.size() > 0) {
          rj["deviation"] = to_json(r.deviation, scenario.space);
          tables["sequence_round_" + std::to_string(r.round)] =
              pair_table(scenario.model, r.deviation.theta1, r.deviation.theta2, {&seq.problems()}, nullptr,
                         "dev_1", "dev_2");
        }
        rounds.push_back(rj);
      }
      report["sequence"] = {{"rounds", rounds}, {"stop_reason", trace.stop_reason}};
    }

    if (wants("validate")) {
      current = "validate";
      report["validation"] = validate_stage(config, scenario, needs_data ? &out.data : nullptr);
    }
  } catch (const std::exception& e) {
    out.failure = classify(current, e);
    report["status"] = "failed";
    report["failure"] = {{"stage", out.failure->stage},
                         {"kind", out.failure->kind},
                         {"message", out.failure->message},
                         {"exit_code", out.failure->exit_code}};
  }
  report["tables"] = tables;
  return out;
}

std::vector<std::string> emit_plot_data(const Json& report, const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  std::vector<std::string> files;
  Json manifest = Json::array();
  if (report.contains("tables")) {
    for (const auto& [panel, t] : report.at("tables").items()) {
      const std::string file = panel + ".csv";
      std::ofstream out(fs::path(out_dir) / file);
      if (!out) throw DataError("cannot write " + (fs::path(out_dir) / file).string());
      out << "condition_id,observable,time,series,value\n";
      const auto& c = t.at("condition_id");
      for (std::size_t i = 0; i < c.size(); ++i) {
        const Json& v = t.at("value")[i];
        out << c[i].get<std::string>() << ',' << t.at("observable")[i].get<std::string>() << ','
            << format_double(t.at("time")[i].get<double>()) << ',' << t.at("series")[i].get<std::string>() << ','
            << (v.is_number() ? format_double(v.get<double>()) : v.get<std::string>()) << '\n';
      }
      files.push_back(file);
      manifest.push_back({{"panel", panel}, {"file", file}, {"rows", c.size()}});
    }
  }
  std::ofstream m(fs::path(out_dir) / "manifest.json");
  m << manifest.dump(2) << '\n';
  return files;
}

}  // namespace preddev
