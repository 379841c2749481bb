#include <doctest.h>

#include "preddev/config.hpp"
#include "preddev/errors.hpp"
#include "preddev/expression.hpp"
#include "preddev/io.hpp"

#include <bit>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace preddev;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("preddev_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(PREDDEV_CLI) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("expression evaluation and gradients") {
  const Expression e = Expression::parse("a * x^2 - (b + 3) / x + -t", {"x", "a", "b", "t"});
  const std::vector<double> v{2.0, 1.5, 0.5, 4.0};
  CHECK(e.evaluate(v) == doctest::Approx(1.5 * 4 - 3.5 / 2 - 4));
  Vector g(3);
  e.evaluate(v, g);
  CHECK(g[0] == doctest::Approx(2 * 1.5 * 2 + 3.5 / 4));
  CHECK(g[1] == doctest::Approx(4.0));
  CHECK(g[2] == doctest::Approx(-0.5));
  CHECK(Expression::parse("2^-1", {}).evaluate({}) == doctest::Approx(0.5));
  CHECK(Expression::parse("1e-3*4", {}).evaluate({}) == doctest::Approx(0.004));
  CHECK_THROWS_AS(Expression::parse("x +", {"x"}), ConfigError);
  CHECK_THROWS_AS(Expression::parse("y", {"x"}), ConfigError);
  CHECK_THROWS_AS(Expression::parse("(x", {"x"}), ConfigError);
}

TEST_CASE("inline model matches the built-in decay model") {
  InlineModelSpec s;
  s.name = "decay";
  s.states = {"x"};
  s.parameters = {"k"};
  s.factors = {"x0"};
  s.rhs = {{"x", "-k * x"}};
  s.initial = {{"x", "x0"}};
  s.observables = {{"double_x", {{"x", 2.0}}}};
  const ModelSystem m = inline_model(s);
  const ExternalFactors nu{"a", {{"x0", 1.0}}};
  const std::vector<double> t{1.0};
  const Trajectory tr = integrate_with_sensitivities(m, Vector{{1.0}}, nu, t);
  CHECK(tr.states(0, 0) == doctest::Approx(std::exp(-1.0)).epsilon(1e-7));
  CHECK(tr.sensitivities[0](0, 0) == doctest::Approx(-std::exp(-1.0)).epsilon(1e-6));
  CHECK(m.observable("double_x").weights[0] == 2.0);
  s.rhs.clear();
  CHECK_THROWS_AS(inline_model(s), ConfigError);
}

TEST_CASE("dataset text round trip is bit-identical") {
  Dataset d;
  ObservedSeries s;
  s.condition_id = "c1";
  s.observable = "x";
  s.times = {0.1, 1.0 / 3.0, 2.5};
  s.replicates = {{std::nextafter(1.0, 2.0), -0.0}, {1e-300, 6.02214076e23}, {std::sqrt(2.0), 0.1 + 0.2}};
  s.variance = 1.0 / 7.0;
  d.series.push_back(s);
  std::stringstream buf;
  write_dataset(d, buf);
  const Dataset back = parse_dataset(buf);
  REQUIRE(back.series.size() == 1);
  const auto& b = back.series[0];
  CHECK(b.times == s.times);
  CHECK(std::bit_cast<std::uint64_t>(*b.variance) == std::bit_cast<std::uint64_t>(*s.variance));
  for (std::size_t k = 0; k < s.times.size(); ++k) {
    for (std::size_t r = 0; r < 2; ++r) {
      CHECK(std::bit_cast<std::uint64_t>(b.replicates[k][r]) == std::bit_cast<std::uint64_t>(s.replicates[k][r]));
    }
  }
}

TEST_CASE("dataset parsing errors name the line") {
  std::stringstream bad("condition_id,observable,time,replicate,value\nc,x,1,0,abc\n");
  try {
    parse_dataset(bad, "data.csv", {{"x", 1.0}});
    FAIL("no error");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("data.csv:2") != std::string::npos);
  }
  std::stringstream header("condition,observable,time,replicate,value\n");
  CHECK_THROWS_AS(parse_dataset(header), DataError);
  std::stringstream single("condition_id,observable,time,replicate,value\nc,x,1,0,1.5\n");
  CHECK_THROWS_AS(parse_dataset(single), DataError);
  std::stringstream ok("value,replicate,time,observable,condition_id\n1.5,0,1,x,c\n2.5,1,1,x,c\n");
  const Dataset d = parse_dataset(ok);
  CHECK(*d.series.at(0).variance == doctest::Approx(0.5));
}

TEST_CASE("time grids") {
  CHECK(parse_times(Json::parse(R"({"start": 0, "stop": 1, "step": 0.25})")) ==
        std::vector<double>{0, 0.25, 0.5, 0.75, 1});
  CHECK(parse_times(Json::parse(R"({"start": 1, "stop": 2, "count": 3})")) == std::vector<double>{1, 1.5, 2});
  CHECK_THROWS_AS(parse_times(Json::parse("[1, 1]")), ConfigError);
  CHECK_THROWS_AS(parse_times(Json::parse(R"({"start": 0, "stop": 1})")), ConfigError);
}

TEST_CASE("configs survive serialization") {
  for (const auto& entry : fs::directory_iterator(PREDDEV_SCENARIOS)) {
    CAPTURE(entry.path().string());
    const ScenarioConfig c = load_config(entry.path().string());
    const Json once = to_json(c);
    CHECK(to_json(parse_config(once)) == once);
    CHECK_NOTHROW(resolve(c));
  }
}

TEST_CASE("config errors") {
  const Json base = Json::parse(R"({
    "name": "t", "seed": 1, "model": "exp_decay",
    "conditions": [{"id": "a", "factors": {"x0": 1}}],
    "experiments": [{"id": "e", "condition": "a", "series": [{"observable": "x", "times": [1, 2]}]}],
    "data": {"simulate": {"noise": {"sigma": 0.1}}}
  })");
  CHECK_NOTHROW(resolve(parse_config(base)));
  Json j = base;
  j["typo"] = 1;
  CHECK_THROWS_AS(parse_config(j), ConfigError);
  j = base;
  j["model"] = "no_such_model";
  CHECK_THROWS_AS(resolve(parse_config(j)), ConfigError);
  j = base;
  j["experiments"][0]["condition"] = "b";
  CHECK_THROWS_AS(parse_config(j), ConfigError);
  j = base;
  j["stages"] = {"fit", "plot"};
  CHECK_THROWS_AS(parse_config(j), ConfigError);
  j = base;
  j["seed"] = "one";
  CHECK_THROWS_AS(parse_config(j), ConfigError);
}

TEST_CASE("command line exit codes") {
  const fs::path dir = scratch_dir("cli");
  const std::string out = " --out " + (dir / "out").string();
  const Json cfg = Json::parse(R"({
    "name": "t", "seed": 1, "model": "exp_decay",
    "conditions": [{"id": "a", "factors": {"x0": 1}}],
    "experiments": [{"id": "e", "condition": "a", "series": [{"observable": "x", "times": [0.5, 1, 2, 3]}]}],
    "data": {"simulate": {"noise": {"sigma": 0.05}}},
    "fit": {"restarts": 2}, "bootstrap": {"samples": 100}
  })");
  auto write = [&](const std::string& name, const std::string& text) {
    std::ofstream(dir / name) << text;
    return (dir / name).string();
  };
  const std::string good = write("good.json", cfg.dump());
  CHECK(run_cli("simulate " + good + out) == 0);
  CHECK(fs::exists(dir / "out" / "data.csv"));
  CHECK(run_cli("fit " + good + out) == 0);
  CHECK(fs::exists(dir / "out" / "report.json"));
  CHECK(fs::exists(dir / "out" / "plots" / "manifest.json"));
  CHECK(run_cli("fit " + good + out + " --seed 5 --restarts 2 --bootstrap-samples 100 --alpha 0.1") == 0);

  CHECK(run_cli("fit " + write("broken.json", "{ not json") + out) == 2);
  CHECK(run_cli("fit " + (dir / "missing.json").string() + out) == 2);
  CHECK(run_cli("fit " + good + out + " --eta-mode median") == 2);
  CHECK(run_cli("fit " + good + out + " --eta-multiplier 3") == 2);
  CHECK(run_cli("") == 2);

  Json with_file = cfg;
  with_file["data"] = Json::parse(R"({"file": "bad.csv"})");
  write("bad.csv", "condition_id,observable,time,replicate,value\na,x,0.5,0,oops\n");
  CHECK(run_cli("fit " + write("file.json", with_file.dump()) + out) == 4);

  Json stuck = cfg;
  stuck["fit"]["max_iterations"] = 0;
  CHECK(run_cli("fit " + write("stuck.json", stuck.dump()) + out) == 3);
}
