#include "preddev/config.hpp"
#include "preddev/models.hpp"
#include "preddev/pipeline.hpp"

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace preddev;

namespace {

Vector to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

py::dict describe(const std::string& name) {
  const ModelDescriptor d = ModelRegistry::instance().get(name);
  py::dict out;
  out["name"] = d.name;
  out["states"] = d.system.state_names;
  out["parameters"] = d.system.param_names;
  out["factors"] = d.system.factor_names;
  std::vector<std::string> obs;
  for (const auto& o : d.system.observables) obs.push_back(o.name);
  out["observables"] = obs;
  out["default_theta"] = std::vector<double>(d.default_true_theta.begin(), d.default_true_theta.end());
  out["documentation"] = d.documentation;
  return out;
}

std::vector<double> observe_py(const std::string& model, const std::vector<double>& theta,
                               const std::map<std::string, double>& factors, const std::string& observable,
                               const std::vector<double>& times) {
  const ModelDescriptor d = ModelRegistry::instance().get(model);
  return observe(d.system, to_vector(theta), ExternalFactors{"py", factors}, Series{observable, times, 1, {}});
}

// Runs a scenario given as a JSON string; returns the report as a JSON string.
std::string run_py(const std::string& config_json, const std::vector<std::string>& stages) {
  const PipelineOutcome out = run_pipeline(parse_config(Json::parse(config_json)), stages);
  if (out.failure) {
    const std::string msg = out.failure->stage + ": " + out.failure->message;
    if (out.failure->kind == "config") throw std::invalid_argument(msg);
    throw std::runtime_error(msg);
  }
  return out.report.dump();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Prediction deviation and experimental design for ODE models.";
  m.attr("__version__") = kVersion;
  m.def("models", [] { return ModelRegistry::instance().names(); }, "Names of the built-in models.");
  m.def("describe", &describe, py::arg("model"));
  m.def("observe", &observe_py, py::arg("model"), py::arg("theta"), py::arg("factors"), py::arg("observable"),
        py::arg("times"), "Noise-free observable values along `times`.");
  m.def("run", &run_py, py::arg("config_json"), py::arg("stages") = std::vector<std::string>{},
        py::call_guard<py::gil_scoped_release>());
}
