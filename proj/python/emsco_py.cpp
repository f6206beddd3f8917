#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "commands.hpp"
#include "emsco/baselines.hpp"
#include "emsco/oracle.hpp"

namespace py = pybind11;
using namespace emsco;

namespace {

// Big integers cross the boundary as decimal text and become Python ints.
py::int_ to_py(const BigInt& v) { return py::int_(py::str(to_string(v))); }

RunConfig config_from(const std::string& config_json, const std::vector<std::string>& overrides) {
  nlohmann::json doc = config_json.empty() ? nlohmann::json::object() : nlohmann::json::parse(config_json);
  for (const auto& o : overrides) apply_override(doc, o);
  auto cfg = RunConfig::from_json(doc);
  cfg.validate();
  return cfg;
}

std::vector<std::pair<std::string, std::string>> run_command(const std::string& name, const std::string& config_json,
                                                             const std::vector<std::string>& overrides) {
  const auto cfg = config_from(config_json, overrides);
  py::gil_scoped_release release;
  if (name == "synth") return cli::cmd_synth(cfg);
  if (name == "split") return cli::cmd_split(cfg);
  if (name == "evolve") return cli::cmd_evolve(cfg);
  if (name == "bruteforce") return cli::cmd_bruteforce(cfg);
  if (name == "baseline") return cli::cmd_baseline(cfg);
  if (name == "neighborhood") return cli::cmd_neighborhood(cfg);
  if (name == "report") return cli::cmd_report(cfg);
  throw Error("unknown command: " + name);
}

}  // namespace

PYBIND11_MODULE(_emsco, m) {
  m.doc() = "Multi-stage cost-sensitive classifier search (native core)";

  py::register_exception<Error>(m, "EmscoError", PyExc_ValueError);

  py::class_<Chromosome>(m, "Chromosome")
      .def(py::init<std::vector<int>>(), py::arg("assignments"))
      .def_static("parse", [](const std::string& s) { return Chromosome::parse(s); })
      .def_static("compress", [](const std::vector<int>& raw) { return Chromosome::compress(raw); })
      .def_static("single_stage", &Chromosome::single_stage)
      .def_property_readonly("assignments", &Chromosome::assignments)
      .def_property_readonly("stage_count", &Chromosome::stage_count)
      .def("stage_features", &Chromosome::stage_features)
      .def("cumulative_features", &Chromosome::cumulative_features)
      .def("__len__", &Chromosome::size)
      .def("__str__", &Chromosome::to_string)
      .def("__repr__", [](const Chromosome& q) { return "Chromosome(" + q.to_string() + ")"; })
      .def("__eq__", [](const Chromosome& a, const Chromosome& b) { return a == b; })
      .def("__hash__", [](const Chromosome& q) { return py::hash(py::str(q.to_string())); });

  m.def("stirling2", [](int n, int j) { return to_py(stirling2(n, j)); });
  m.def("count_space", [](int n, int k) { return to_py(count_space(n, k).total); },
        "Number of gap-free chromosomes of length n with at most k stages.");
  m.def("space_ratio", [](int n, int k) { return space_ratio(n, k).value; });
  m.def("enumerate_space", [](int n, int k) { return enumerate_space(n, k); });
  m.def("neighbors", &von_neumann_neighbors, py::arg("chromosome"), py::arg("k"));
  m.def("aggregate_metric", &aggregate_metric, py::arg("g1"), py::arg("g2"), py::arg("g3_raw"),
        py::arg("total_cost"));
  m.def("default_max_stages", &default_max_stages);

  m.def("_run_command", &run_command, py::arg("name"), py::arg("config_json") = "",
        py::arg("overrides") = std::vector<std::string>{});
  m.def("_commit", [](const cli::Artifacts& artifacts) { cli::commit(artifacts); });
}
