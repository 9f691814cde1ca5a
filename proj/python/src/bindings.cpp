#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "mtssrp/calibrate.hpp"
#include "mtssrp/harness.hpp"
#include "mtssrp/monitor.hpp"
#include "mtssrp/planner.hpp"
#include "mtssrp/scenarios.hpp"

namespace py = pybind11;
using namespace mtssrp;

namespace {

Observation make_obs(std::size_t t, std::vector<std::size_t> idx, std::vector<double> values) {
  Observation obs;
  obs.time = t;
  obs.indices = std::move(idx);
  obs.values = std::move(values);
  return obs;
}

py::dict row_dict(const SummaryRow& r) {
  py::dict d;
  d["policy"] = r.policy;
  d["delta"] = r.delta;
  d["replications"] = r.replications;
  d["fired"] = r.fired;
  d["censoring_rate"] = r.censoring_rate;
  d["mean_delay"] = r.mean_delay;
  d["sd_delay"] = r.sd_delay;
  d["se_delay"] = r.se_delay;
  d["accuracy"] = r.accuracy;
  d["sd_accuracy"] = r.sd_accuracy;
  d["se_accuracy"] = r.se_accuracy;
  d["threshold"] = r.threshold;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Partially observed multi-mode Shiryaev-Roberts monitoring";

  py::register_exception<ModelError>(m, "ModelError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<ReplayError>(m, "ReplayError", PyExc_RuntimeError);
  py::register_exception<CalibrationError>(m, "CalibrationError", PyExc_RuntimeError);

  py::class_<ModeBank, std::shared_ptr<ModeBank>>(m, "ModeBank")
      .def_property_readonly("dim", &ModeBank::dim)
      .def_property_readonly("size", &ModeBank::size)
      .def_property_readonly("is_diagonal", &ModeBank::is_diagonal)
      .def("label", &ModeBank::label)
      .def("mode_mean", [](const ModeBank& b, std::size_t k) { return Eigen::VectorXd(b.mode(k).mean()); })
      .def("base_mean", [](const ModeBank& b) { return Eigen::VectorXd(b.base().mean()); })
      .def("support", [](const ModeBank& b, std::size_t k) {
        auto s = b.support(k);
        return std::vector<std::size_t>(s.begin(), s.end());
      });

  m.def("build_nonoverlap", [](std::size_t p, std::size_t k, double delta) {
    return std::make_shared<ModeBank>(build_nonoverlap(p, k, delta));
  }, py::arg("p") = 1000, py::arg("K") = 50, py::arg("delta") = 0.8);
  m.def("build_overlap", [](std::size_t rows, std::size_t cols, std::size_t knots, double delta) {
    return std::make_shared<ModeBank>(build_overlap(rows, cols, knots, delta));
  }, py::arg("rows") = 30, py::arg("cols") = 30, py::arg("knots") = 7, py::arg("delta") = 0.8);
  m.def("load_bank_file", [](const std::filesystem::path& p) { return std::make_shared<ModeBank>(load_bank_file(p)); });

  m.def("log_likelihood_ratio", [](const ModeBank& bank, std::size_t k, std::vector<std::size_t> idx,
                                   std::vector<double> values) {
    return log_likelihood_ratio(bank, k, make_obs(1, std::move(idx), std::move(values)));
  }, py::arg("bank"), py::arg("k"), py::arg("indices"), py::arg("values"));

  m.def("log1p_exp", &log1p_exp);

  // Runs the SR recursion from R = 0 over a sequence of observations; returns r_{k,t} per tick.
  m.def("monitor_trajectory", [](const ModeBank& bank, const std::vector<std::pair<std::vector<std::size_t>, std::vector<double>>>& seq) {
    MonitorState st = MonitorState::initial(bank.size());
    std::vector<std::vector<double>> out;
    for (const auto& [idx, vals] : seq) {
      st = update(st, bank, make_obs(st.t + 1, idx, vals));
      std::vector<double> row;
      for (const auto& s : st.logstats) row.push_back(s.log());
      out.push_back(std::move(row));
    }
    return out;
  }, py::arg("bank"), py::arg("observations"));

  m.def("plan_sort", [](std::vector<double> scores, std::size_t q) { return plan_sort(scores, q).indices; });
  m.def("plan_random", [](std::size_t p, std::size_t q, std::uint64_t seed) { return plan_random(p, q, seed).indices; });
  m.def("arl_bracket", &arl_bracket, py::arg("K"), py::arg("target_arl0"), py::arg("c") = 10.0);

  m.def("config_hash", [](const std::string& text) { return config_hash(parse_config(nlohmann::json::parse(text))); });
  m.def("canonical_config", [](const std::string& text) {
    return config_to_json(parse_config(nlohmann::json::parse(text))).dump();
  });

  // Calibrates (or reuses fixed thresholds) and runs the benchmark described by a JSON config string.
  m.def("run_benchmark", [](const std::string& text) {
    const BenchmarkConfig cfg = parse_config(nlohmann::json::parse(text));
    BenchmarkResult res;
    {
      py::gil_scoped_release release;
      res = run_benchmark(cfg);
    }
    py::list rows;
    for (const auto& r : res.table.rows) rows.append(row_dict(r));
    py::dict out;
    out["summary"] = rows;
    out["records_csv"] = records_csv(res.records);
    out["summary_csv"] = summary_csv(res.table);
    return out;
  }, py::arg("config_json"));
}
