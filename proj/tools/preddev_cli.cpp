#include "preddev/errors.hpp"
#include "preddev/io.hpp"
#include "preddev/pipeline.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

using namespace preddev;

namespace {

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<int> restarts;
  std::optional<double> alpha;
  std::optional<int> bootstrap_samples;
  std::optional<std::string> eta_mode;
  std::optional<int> eta_multiplier;
  std::optional<std::string> data;
  std::string out = "out";
};

void apply(const Overrides& o, ScenarioConfig& c) {
  if (o.seed) c.seed = *o.seed;
  if (o.restarts) {
    c.bootstrap.fit.restarts = *o.restarts;
    c.deviation.restarts = *o.restarts;
  }
  if (o.alpha) {
    if (!(*o.alpha > 0.0 && *o.alpha < 1.0)) throw ConfigError("--alpha must be in (0, 1)");
    c.bootstrap.alpha = *o.alpha;
    c.eta.alpha = *o.alpha;
  }
  if (o.bootstrap_samples) c.bootstrap.samples = *o.bootstrap_samples;
  if (o.eta_mode) c.eta.mode = parse_eta_mode(*o.eta_mode);
  if (o.eta_multiplier) c.eta.multiplier = *o.eta_multiplier;
  if (o.data) {
    c.data.file = *o.data;
    c.data.simulate.reset();
  }
}

/// A report file carries its resolved config; anything else is a config.
ScenarioConfig load_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  Json j = Json::parse(in, nullptr, true, true);
  if (j.is_object() && j.contains("tool") && j.contains("config")) return parse_config(j.at("config"));
  return load_config(path);
}

void summarize(const Json& r) {
  std::cout << "status: " << r.at("status").get<std::string>() << '\n';
  if (r.contains("fit")) {
    const auto& f = r.at("fit");
    std::cout << "fit: z* = " << f.at("z_star").dump();
    if (f.contains("z_upper")) std::cout << ", z_u = " << f.at("z_upper").dump();
    std::cout << ", theta* = " << f.at("theta_star").dump() << '\n';
  }
  if (r.contains("deviation")) std::cout << "deviation: " << r.at("deviation").at("value").dump() << '\n';
  if (r.contains("ranking")) {
    std::cout << "ranking:\n";
    for (const auto& row : r.at("ranking")) {
      std::cout << "  " << row.at("rank").dump() << ". " << row.at("candidate").get<std::string>() << "  "
                << (row.contains("value") ? row.at("value").dump() : std::string("failed")) << '\n';
    }
  }
  if (r.contains("sequence")) {
    for (const auto& round : r.at("sequence").at("rounds")) {
      std::cout << "round " << round.at("round").dump() << ": " << round.at("chosen").get<std::string>()
                << "  deviation " << round.at("deviation_before").dump() << " -> "
                << round.at("deviation_after").dump() << '\n';
    }
    std::cout << "stop: " << r.at("sequence").at("stop_reason").get<std::string>() << '\n';
  }
  if (r.contains("validation")) {
    for (const auto& [name, v] : r.at("validation").items()) {
      if (v.is_array()) {
        for (const auto& x : v) std::cout << name << " " << x.at("distribution").get<std::string>() << ": "
                                          << (x.at("passed").get<bool>() ? "pass" : "fail") << '\n';
      } else {
        std::cout << name << ": " << (v.at("passed").get<bool>() ? "pass" : "fail") << '\n';
      }
    }
  }
  if (r.contains("failure")) {
    const auto& f = r.at("failure");
    std::cerr << "error (" << f.at("kind").get<std::string>() << ", stage " << f.at("stage").get<std::string>()
              << "): " << f.at("message").get<std::string>() << '\n';
  }
}

int run(const std::string& input, const std::vector<std::string>& stages, const Overrides& o, bool write_data) {
  ScenarioConfig config = load_input(input);
  apply(o, config);
  PipelineOutcome outcome = run_pipeline(config, stages);
  std::filesystem::create_directories(o.out);
  const auto out = std::filesystem::path(o.out);
  {
    std::ofstream f(out / "report.json");
    f << outcome.report.dump(2) << '\n';
  }
  if (write_data && !outcome.data.series.empty()) write_dataset(outcome.data, (out / "data.csv").string());
  emit_plot_data(outcome.report, (out / "plots").string());
  summarize(outcome.report);
  return outcome.failure ? outcome.failure->exit_code : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Prediction deviation, experiment impact, and sequential design for ODE models"};
  app.require_subcommand(1);
  app.fallthrough();
  Overrides o;
  app.add_option("--seed", o.seed, "Scenario seed");
  app.add_option("--restarts", o.restarts, "Fit and deviation restarts");
  app.add_option("--alpha", o.alpha, "Bootstrap interval level");
  app.add_option("--bootstrap-samples", o.bootstrap_samples, "Bootstrap resamples (>= 100)");
  app.add_option("--eta-mode", o.eta_mode, "Candidate closeness bound")->check(CLI::IsMember({"ratio", "chi2", "fixed"}));
  app.add_option("--eta-multiplier", o.eta_multiplier, "Scale of the closeness bound")->check(CLI::IsMember({1, 4}));
  app.add_option("--out", o.out, "Output directory");
  app.add_option("--data", o.data, "Dataset file replacing the configured data");

  std::string input;
  struct Command {
    const char* name;
    const char* help;
    std::vector<std::string> stages;
  };
  const std::vector<Command> commands{
      {"simulate", "Simulate the configured dataset and write it as CSV", {"simulate"}},
      {"fit", "Best fit with bootstrap interval", {"fit"}},
      {"deviate", "Prediction deviation", {"deviate"}},
      {"impact", "Estimated impact of every candidate", {"impact"}},
      {"rank", "Rank candidates by estimated impact", {"rank"}},
      {"sequence", "Greedy sequential design", {"sequence"}},
      {"validate", "Run the configured validation studies", {"validate"}},
      {"report", "Run every stage listed in a config, or re-run the config embedded in a report", {}},
  };
  std::vector<CLI::App*> subs;
  for (const auto& c : commands) {
    auto* sub = app.add_subcommand(c.name, c.help);
    sub->add_option("input", input, "Scenario config (JSON) or report")->required()->check(CLI::ExistingFile);
    subs.push_back(sub);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  try {
    for (std::size_t i = 0; i < commands.size(); ++i) {
      if (subs[i]->parsed()) return run(input, commands[i].stages, o, commands[i].stages.empty() || i == 0);
    }
  } catch (const std::exception& e) {
    const StageFailure f = classify("setup", e);
    std::cerr << "error (" << f.kind << "): " << f.message << '\n';
    return f.exit_code;
  }
  return 0;
}
