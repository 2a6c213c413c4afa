// Python bindings for the study core: clocks, the statistics used by the
// report, the planner check and full study runs.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "pcar/catalog.hpp"
#include "pcar/error.hpp"
#include "pcar/experiments.hpp"
#include "pcar/report.hpp"
#include "pcar/stats.hpp"
#include "pcar/study.hpp"

namespace py = pybind11;
using namespace pcar;

namespace {

std::vector<int> advance(const std::vector<int>& taus, int tau_max, std::size_t played) {
    const auto next = lsd::LsdState::from_taus(taus, tau_max).advance(lsd::ArmId{played});
    return {next.taus().begin(), next.taus().end()};
}

std::vector<int> initial_state(std::size_t arms, int tau_max) {
    const auto s = lsd::LsdState::initial(arms, tau_max);
    return {s.taus().begin(), s.taus().end()};
}

py::dict welch(const std::vector<double>& x, const std::vector<double>& y) {
    const auto r = stats::welch_t(x, y);
    py::dict d;
    d["t"] = r.t;
    d["df"] = r.df;
    d["p"] = r.p;
    return d;
}

py::dict oracle(std::size_t arms, int tau_max, std::size_t horizon, std::size_t seeds, std::size_t episodes) {
    experiments::OracleCheckParams p;
    p.arms = arms;
    p.tau_max = tau_max;
    p.horizon = horizon;
    p.seeds = seeds;
    p.episodes = episodes;
    const auto r = experiments::oracle_check(p);
    py::list per_seed;
    for (const auto& s : r.seeds) {
        py::dict d;
        d["seed"] = s.seed;
        d["achieved"] = s.achieved;
        d["ratio"] = s.ratio;
        d["passed"] = s.passed;
        d["sequence"] = s.sequence;
        per_seed.append(d);
    }
    py::dict out;
    out["optimal"] = r.optimal;
    out["optimal_sequence"] = r.optimal_sequence;
    out["passed"] = r.passed;
    out["seeds"] = per_seed;
    return out;
}

py::dict run(const std::filesystem::path& config_path, const std::optional<std::filesystem::path>& out_dir) {
    const auto cfg = study::load_config(config_path);
    const auto catalog = catalog::load_catalog(cfg.catalog_path);
    const auto log = study::run_study(cfg, catalog);
    if (out_dir) {
        study::write_log(log, catalog.schema(), *out_dir);
        report::write_report(log, catalog.schema(), *out_dir / "report");
    }
    const auto o = study::summarize(log);
    py::dict d;
    d["records"] = log.records.size();
    d["config_hash"] = log.meta.config_hash;
    d["log_hash"] = study::hex64(study::log_hash(log, catalog.schema()));
    d["budget_violations"] = study::budget_violations(log.records, cfg.budget);
    d["pcar_final_reward"] = o.pcar_final_reward;
    d["random_final_reward"] = o.random_final_reward;
    d["control_final_reward"] = o.control_final_reward;
    d["pcar_acceptance_change"] = o.pcar_acceptance_change;
    d["random_acceptance_change"] = o.random_acceptance_change;
    return d;
}

}  // namespace

PYBIND11_MODULE(_pcar, m) {
    m.doc() = "Last-switch-dependent recommender study core";

    // The module attribute keeps the exception type alive.
    static PyObject* error_type = py::exception<Error>(m, "PcarError", PyExc_ValueError).ptr();
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            const std::string kind(to_string(e.kind()));
            py::object exc = py::reinterpret_borrow<py::object>(error_type)(kind + ": " + e.what());
            exc.attr("kind") = kind;
            PyErr_SetObject(error_type, exc.ptr());
        }
    });

    m.attr("version") = study::kVersion;

    m.def("initial_state", &initial_state, py::arg("arms"), py::arg("tau_max"),
          "Clocks of the fully rested state: every arm at +tau_max.");
    m.def("advance", &advance, py::arg("taus"), py::arg("tau_max"), py::arg("played"),
          "Successor clocks after playing arm `played`.");

    m.def("welch_t", &welch, py::arg("x"), py::arg("y"), "Welch two-sample t-test (two-sided p).");
    m.def("pearson", [](const std::vector<double>& x, const std::vector<double>& y) { return stats::pearson(x, y); },
          py::arg("x"), py::arg("y"));
    m.def("pss_trend", [](const std::vector<double>& s) { return stats::pss_trend(s); }, py::arg("scores"),
          "Least-squares slope of scores against 1..n.");
    m.def("student_t_quantile", &stats::student_t_quantile, py::arg("p"), py::arg("df"));
    m.def("sign_test_upper", &stats::sign_test_upper, py::arg("successes"), py::arg("trials"));

    m.def("oracle_check", &oracle, py::arg("arms") = 2, py::arg("tau_max") = 2, py::arg("horizon") = 10,
          py::arg("seeds") = 20, py::arg("episodes") = 5000,
          "Trains the learner on small instances and compares it with the exhaustive planner.");

    m.def("catalog_json", [](const std::filesystem::path& path) { return catalog::catalog_to_json(catalog::load_catalog(path)).dump(); },
          py::arg("path"), "Loads and validates a catalog TSV; returns its JSON form.");
    m.def("config_json", [](const std::filesystem::path& path) { return study::config_to_json(study::load_config(path)).dump(); },
          py::arg("path"), "Loads and validates a study config; returns it with every default filled in.");

    m.def("run_study", &run, py::arg("config"), py::arg("out") = std::nullopt,
          "Runs a study from a config file, optionally writing the log and report to `out`.");
}
