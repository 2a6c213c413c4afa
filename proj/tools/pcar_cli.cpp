// pcar — study runner command line.
//
//   pcar run     --config <path> --out <dir>
//   pcar report  --log <dir|records.csv> --out <dir>
//   pcar oracle  --k <arms> --tau-max <n> --horizon <n> --seeds <n> [--episodes <n>]
//   pcar sweep   --config <path> --param <dotted.path> --values <v1,v2,...> [--out <file>]
//
// On success the last stdout line starts with "ok:". Failures print one line
// "error: <kind>: <message>" to stderr and exit nonzero (2 usage, 3 check
// failed, 1 anything else).

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "pcar/error.hpp"
#include "pcar/experiments.hpp"
#include "pcar/report.hpp"
#include "pcar/study.hpp"

namespace {

using namespace pcar;

int fail(std::string_view kind, const std::string& message, int code = 1) {
    std::cerr << "error: " << kind << ": " << message << "\n";
    return code;
}

/// "0.1,0.5" -> [0.1, 0.5]; items that are not JSON are taken as strings.
std::vector<nlohmann::json> parse_values(const std::string& text) {
    std::vector<nlohmann::json> out;
    std::stringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
        const auto b = item.find_first_not_of(" \t");
        const auto e = item.find_last_not_of(" \t");
        if (b == std::string::npos) throw Error(ErrorKind::InvalidParameter, "empty item in --values");
        item = item.substr(b, e - b + 1);
        try {
            out.push_back(nlohmann::json::parse(item));
        } catch (const nlohmann::json::exception&) {
            out.push_back(item);
        }
    }
    if (out.empty()) throw Error(ErrorKind::InvalidParameter, "--values is empty");
    return out;
}

int cmd_run(const std::filesystem::path& config_path, const std::filesystem::path& out) {
    const auto cfg = study::load_config(config_path);
    const auto catalog = catalog::load_catalog(cfg.catalog_path);
    const auto log = study::run_study(cfg, catalog);
    const auto violations = study::budget_violations(log.records, cfg.budget);
    if (!violations.empty()) return fail("budget-violation", violations.front());

    study::write_log(log, catalog.schema(), out);
    {
        std::ofstream f(out / "config.json");
        if (!f) throw Error(ErrorKind::Io, "cannot write '" + (out / "config.json").string() + "'");
        f << study::config_to_json(cfg).dump(2) << "\n";
    }
    for (const auto& w : report::write_report(log, catalog.schema(), out / "report")) std::cerr << "warning: " << w << "\n";

    const auto o = study::summarize(log);
    auto mean = [](const std::vector<double>& v) { return v.empty() ? std::nan("") : stats::mean(v); };
    std::printf("final-week reward: pcar %.3f  random %.3f  control %.3f\n", mean(o.pcar_final_reward),
                mean(o.random_final_reward), mean(o.control_final_reward));
    std::printf("ok: records=%zu config_hash=%s log_hash=%s out=%s\n", log.records.size(), log.meta.config_hash.c_str(),
                study::hex64(study::log_hash(log, catalog.schema())).c_str(), out.string().c_str());
    return 0;
}

int cmd_report(const std::filesystem::path& log_path, const std::filesystem::path& out) {
    const auto schema = agent::AttributeSchema::defaults();
    const auto log = study::read_log(log_path, schema);
    for (const auto& w : report::write_report(log, schema, out)) std::cerr << "warning: " << w << "\n";
    std::printf("ok: records=%zu out=%s\n", log.records.size(), out.string().c_str());
    return 0;
}

int cmd_oracle(const experiments::OracleCheckParams& params) {
    const auto r = experiments::oracle_check(params);
    std::printf("optimal %.6f sequence", r.optimal);
    for (auto a : r.optimal_sequence) std::printf(" %zu", a);
    std::printf("\n");
    for (const auto& s : r.seeds) std::printf("seed %llu achieved %.6f ratio %.4f %s\n",
                                              static_cast<unsigned long long>(s.seed), s.achieved, s.ratio,
                                              s.passed ? "pass" : "fail");
    const auto needed = static_cast<std::size_t>(std::ceil(0.9 * static_cast<double>(params.seeds)));
    const std::string summary = std::to_string(r.passed) + "/" + std::to_string(params.seeds) +
                                " seeds reached " + std::to_string(params.target_ratio) + " of optimal (need " +
                                std::to_string(needed) + ")";
    if (r.passed < needed) return fail("check-failed", summary, 3);
    std::printf("ok: %s\n", summary.c_str());
    return 0;
}

int cmd_sweep(const std::filesystem::path& config_path, const std::string& param, const std::string& values,
              const std::string& out) {
    const auto j = study::load_config_json(config_path);
    const auto rows = experiments::sweep(j, config_path.parent_path(), param, parse_values(values));
    const auto csv = experiments::sweep_csv(param, rows);
    if (out.empty()) {
        std::cout << csv;
    } else {
        const std::filesystem::path p(out);
        if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
        std::ofstream f(p);
        if (!f) throw Error(ErrorKind::Io, "cannot write '" + out + "'");
        f << csv;
    }
    std::printf("ok: rows=%zu\n", rows.size());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"PCAR study simulator"};
    app.require_subcommand(1);

    std::string config, out, log, param, values;
    experiments::OracleCheckParams oracle;

    auto* run = app.add_subcommand("run", "simulate a study and write its log and report");
    run->add_option("--config", config, "study config (JSON)")->required();
    run->add_option("--out", out, "output directory")->required();

    auto* rep = app.add_subcommand("report", "summaries, plot data and Welch tests for a log");
    rep->add_option("--log", log, "log directory or records.csv")->required();
    rep->add_option("--out", out, "output directory")->required();

    auto* orc = app.add_subcommand("oracle", "compare the learner against the exhaustive planner");
    orc->add_option("--k", oracle.arms, "number of arms")->required();
    orc->add_option("--tau-max", oracle.tau_max, "clock cap")->required();
    orc->add_option("--horizon", oracle.horizon, "rounds per episode")->required();
    orc->add_option("--seeds", oracle.seeds, "learner seeds")->required();
    orc->add_option("--episodes", oracle.episodes, "training episodes per seed")->capture_default_str();

    auto* swp = app.add_subcommand("sweep", "run one study per parameter value");
    swp->add_option("--config", config, "base study config (JSON)")->required();
    swp->add_option("--param", param, "dotted parameter path, e.g. agent.lambda")->required();
    swp->add_option("--values", values, "comma-separated values")->required();
    swp->add_option("--out", out, "CSV path (default: stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::string msg = e.what();
        for (auto& c : msg)
            if (c == '\n') c = ' ';
        return fail("usage", msg, 2);
    }

    try {
        if (*run) return cmd_run(config, out);
        if (*rep) return cmd_report(log, out);
        if (*orc) return cmd_oracle(oracle);
        if (*swp) return cmd_sweep(config, param, values, out);
    } catch (const Error& e) {
        return fail(to_string(e.kind()), e.what());
    } catch (const std::exception& e) {
        return fail("internal", e.what());
    }
    return fail("usage", "no subcommand", 2);
}
