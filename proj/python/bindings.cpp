#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "aware/baselines.hpp"
#include "aware/errors.hpp"
#include "aware/ledger.hpp"
#include "aware/service.hpp"
#include "aware/sim.hpp"
#include "aware/stats.hpp"

namespace py = pybind11;
using namespace aware;

namespace {

stats::Alternative alternative_from(const std::string& name) {
  if (name == "greater") return stats::Alternative::greater;
  if (name == "two_sided") return stats::Alternative::two_sided;
  throw DomainError("alternative must be 'greater' or 'two_sided'");
}

py::dict result_dict(const stats::TestResult& r) {
  py::dict d;
  d["kind"] = std::string(stats::to_string(r.kind));
  d["statistic"] = r.statistic;
  d["df"] = r.df;
  d["p_value"] = r.p_value;
  d["support"] = r.support;
  d["low_expected_counts"] = r.low_expected_counts;
  return d;
}

std::vector<py::dict> run_stream(const std::string& policy, const std::vector<double>& p_values,
                                 double alpha, std::optional<std::vector<double>> support) {
  auto config = ledger::LedgerConfig::with_defaults(ledger::parse_policy(policy), alpha);
  if (support && support->size() != p_values.size()) {
    throw DomainError("support must have one entry per p-value");
  }
  std::vector<ledger::StreamItem> items;
  for (std::size_t k = 0; k < p_values.size(); ++k) {
    ledger::StreamItem item{p_values[k], std::nullopt};
    if (support) item.support_fraction = (*support)[k];
    items.push_back(item);
  }
  std::vector<py::dict> out;
  for (const auto& d : ledger::run_stream(config, items)) {
    py::dict row;
    row["outcome"] = std::string(ledger::to_string(d.outcome));
    row["budget"] = d.budget;
    row["wealth"] = d.wealth_after;
    out.push_back(row);
  }
  return out;
}

std::string simulate_csv(const std::string& config_json) {
  const auto config = sim::config_from_json(nlohmann::json::parse(config_json));
  std::ostringstream out;
  sim::write_csv(out, sim::run_experiment(config));
  return out.str();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Alpha-investing ledger, baseline procedures and simulation harness.";

  auto base = py::register_exception<Error>(m, "AwareError", PyExc_RuntimeError);
  py::register_exception<DomainError>(m, "DomainError", base.ptr());
  py::register_exception<DegenerateInputError>(m, "DegenerateInputError", base.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());

  m.def("ln_gamma", &stats::ln_gamma, py::arg("x"));
  m.def("chi2_sf", &stats::chi2_sf, py::arg("x"), py::arg("df"));
  m.def("t_sf", &stats::t_sf, py::arg("t"), py::arg("df"));
  m.def(
      "welch_t_test",
      [](const std::vector<double>& a, const std::vector<double>& b, const std::string& alt) {
        return result_dict(stats::welch_t_test(a, b, alternative_from(alt)));
      },
      py::arg("a"), py::arg("b"), py::arg("alternative") = "two_sided");
  m.def(
      "chi2_gof",
      [](const std::vector<double>& observed, const std::vector<double>& reference) {
        return result_dict(stats::chi2_gof_counts(observed, reference));
      },
      py::arg("observed"), py::arg("reference"));
  m.def(
      "chi2_homogeneity",
      [](const std::vector<double>& a, const std::vector<double>& b) {
        return result_dict(stats::chi2_homogeneity_counts(a, b));
      },
      py::arg("a"), py::arg("b"));

  m.def(
      "describe_policy",
      [](const std::string& spec) { return ledger::describe(ledger::parse_policy(spec)); },
      py::arg("spec"));
  m.def("run_stream", &run_stream, py::arg("policy"), py::arg("p_values"),
        py::arg("alpha") = 0.05, py::arg("support") = py::none());

  m.def(
      "pcer",
      [](const std::vector<double>& p, double alpha) { return baselines::pcer(p, alpha).rejected; },
      py::arg("p_values"), py::arg("alpha") = 0.05);
  m.def(
      "bonferroni",
      [](const std::vector<double>& p, double alpha) {
        return baselines::bonferroni(p, alpha).rejected;
      },
      py::arg("p_values"), py::arg("alpha") = 0.05);
  m.def(
      "benjamini_hochberg",
      [](const std::vector<double>& p, double alpha) {
        return baselines::benjamini_hochberg(p, alpha).rejected;
      },
      py::arg("p_values"), py::arg("alpha") = 0.05);
  m.def(
      "forward_stop",
      [](const std::vector<double>& p, double alpha) {
        return baselines::forward_stop(p, alpha).rejected;
      },
      py::arg("p_values"), py::arg("alpha") = 0.05);
  m.def("fwer_inflation", &baselines::fwer_inflation, py::arg("alpha"), py::arg("tests"));

  m.def("simulate_csv", &simulate_csv, py::arg("config_json"),
        py::call_guard<py::gil_scoped_release>());

  py::class_<service::SessionService>(m, "SessionService")
      .def(py::init([](const std::string& dir) {
             return std::make_unique<service::SessionService>(dir);
           }),
           py::arg("data_dir"))
      .def(
          "handle",
          [](service::SessionService& s, const std::string& method, const std::string& path,
             const std::string& body, const std::map<std::string, std::string>& query) {
            const auto r = s.handle(method, path, query, body);
            return py::make_tuple(r.status, r.body.dump());
          },
          py::arg("method"), py::arg("path"), py::arg("body") = "",
          py::arg("query") = std::map<std::string, std::string>{});
}
