#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "ncmdp/environments.hpp"
#include "ncmdp/error.hpp"
#include "ncmdp/experiments.hpp"
#include "ncmdp/oracle.hpp"

namespace py = pybind11;
using namespace ncmdp;

namespace {

UpdateRule parse_rule(const std::string& rule) {
  if (rule == "standard") return UpdateRule::Standard;
  if (rule == "cui") return UpdateRule::CuiMin;
  throw Error(ErrorCode::InvalidArgument, "rule must be 'standard' or 'cui'");
}

}  // namespace

PYBIND11_MODULE(_ncmdp, m) {
  m.doc() = "Non-cumulative objectives mapped onto ordinary MDPs";
  py::register_exception<Error>(m, "Error", PyExc_ValueError);

  py::class_<ObjectiveState>(m, "ObjectiveState")
      .def_readonly("h", &ObjectiveState::h)
      .def_readonly("t", &ObjectiveState::t)
      .def("__repr__", [](const ObjectiveState& s) {
        std::ostringstream out;
        out << "ObjectiveState(t=" << s.t << ", h=[";
        for (std::size_t i = 0; i < s.h.size(); ++i) out << (i ? ", " : "") << s.h[i];
        out << "])";
        return out.str();
      });

  py::class_<Objective>(m, "Objective")
      .def(py::init([](const std::string& id) { return Objective::parse(id); }), py::arg("id"))
      .def_property_readonly("id", &Objective::id)
      .def_property_readonly("state_size", &Objective::state_size)
      .def("init", &Objective::init)
      .def("update", &Objective::update, py::arg("state"), py::arg("reward"))
      .def("adapted_reward", &Objective::adapted_reward, py::arg("state"), py::arg("reward"))
      .def("value", [](const Objective& f, const std::vector<double>& r) { return f.value(r); }, py::arg("rewards"))
      .def("adapted_rewards",
           [](const Objective& f, const std::vector<double>& r) { return adapted_rewards(r, f); }, py::arg("rewards"))
      .def("__repr__", [](const Objective& f) { return "Objective('" + f.id() + "')"; });

  m.def("objective_ids", [] {
    std::vector<std::string> ids;
    for (const auto& f : table_objectives()) ids.push_back(f.id());
    return ids;
  });

  m.def("verify", [] {
    std::vector<std::tuple<std::string, bool, std::string>> out;
    for (const auto& c : run_verify().checks) out.emplace_back(c.name, c.passed, c.detail);
    return out;
  }, "Runs the built-in self checks; returns (name, passed, detail) tuples.");

  m.def("toy_returns", [] {
    const ToyReport r = run_toy();
    return std::make_pair(r.ours_return, r.cui_return);
  }, "Exact returns of the augmented and min-update greedy policies on the two-step process.");

  m.def("bootstrap_ci", [](const std::vector<double>& x, std::size_t resamples, std::uint64_t seed) {
    const BootstrapResult b = bootstrap_ci(x, resamples, seed);
    return py::make_tuple(b.mean, b.lower, b.upper);
  }, py::arg("samples"), py::arg("resamples") = 10000, py::arg("seed") = 0);

  m.def("grid_tiles", [](std::size_t n, std::uint64_t seed) {
    const GridWorld g = make_grid(n, seed);
    return std::vector<double>(g.tiles().begin(), g.tiles().end());
  },
        py::arg("n"), py::arg("seed"));

  m.def("grid_oracle", [](std::size_t n, std::uint64_t seed) {
    return exact_optimal_return(make_grid(n, seed).tabular(), Objective::min()).value;
  }, py::arg("n"), py::arg("seed"), "Best achievable expected min-reward on a random grid.");

  m.def("run_grid", [](std::size_t n, std::size_t grids, std::size_t seeds, const std::string& rule,
                       std::size_t steps, std::uint64_t master_seed) {
    GridExperiment cfg;
    cfg.n = n;
    cfg.grids = grids;
    cfg.seeds = seeds;
    cfg.rule = parse_rule(rule);
    cfg.steps = steps;
    cfg.master_seed = master_seed;
    std::vector<py::dict> out;
    for (const GridRun& r : run_grid(cfg)) {
      py::dict d;
      d["grid_seed"] = r.grid_seed;
      d["agent_seed"] = r.agent_seed;
      d["oracle_return"] = r.oracle_return;
      d["final_return"] = r.final_return();
      out.push_back(d);
    }
    return out;
  }, py::arg("n") = 3, py::arg("grids") = 10, py::arg("seeds") = 5, py::arg("rule") = "standard",
     py::arg("steps") = 100000, py::arg("master_seed") = 0);
}
