#include "pcar/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>

#include "pcar/error.hpp"

namespace pcar::report {

namespace {

std::string num(double v) {
    if (!std::isfinite(v)) return "NA";
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

const char* const kMetrics[] = {"acceptance", "reward"};

}  // namespace

Report build_report(const study::StudyLog& log) {
    if (log.records.empty()) throw Error(ErrorKind::Degenerate, "cannot report on an empty log");

    std::vector<stats::Observation> obs;
    std::set<std::pair<std::string, int>> group_phases;
    int weeks = 1;
    for (const auto& r : log.records) {
        const std::string group(cohort::to_string(r.group));
        group_phases.insert({group, r.phase});
        weeks = std::max(weeks, r.week);
        obs.push_back({group, r.phase, r.week, "acceptance", r.pid, r.accepted ? 1.0 : 0.0});
        if (r.reward) obs.push_back({group, r.phase, r.week, "reward", r.pid, static_cast<double>(*r.reward)});
    }
    weeks = std::max(weeks, log.meta.weeks_per_phase);

    std::vector<stats::CellKey> expected;
    for (const auto& [group, phase] : group_phases)
        for (int w = 1; w <= weeks; ++w)
            for (const char* m : kMetrics) expected.push_back({group, phase, w, m});

    auto mom = stats::mean_of_means(obs, expected);
    return {std::move(mom.rows), std::move(mom.warnings)};
}

std::string summary_csv(const Report& report) {
    std::map<stats::CellKey, double> means;
    for (const auto& r : report.rows) means[{r.group, r.phase, r.week, r.metric}] = r.mean;

    std::string out = "group,phase,week,metric,mean,ci_low,ci_high,n_participants,degenerate,delta_within_phase\n";
    for (const auto& r : report.rows) {
        const auto prev = means.find({r.group, r.phase, r.week - 1, r.metric});
        const double delta = prev == means.end() ? std::nan("") : r.mean - prev->second;
        out += r.group + ',' + std::to_string(r.phase) + ',' + std::to_string(r.week) + ',' + r.metric + ',' +
               num(r.mean) + ',' + num(r.ci_low) + ',' + num(r.ci_high) + ',' + std::to_string(r.n_participants) +
               ',' + (r.degenerate ? "1" : "0") + ',' + num(delta) + '\n';
    }
    return out;
}

nlohmann::json plot_data(const Report& report, const study::StudyMeta& meta) {
    nlohmann::json metrics = nlohmann::json::object();
    // (metric, group, phase) -> points, in row order (weeks ascending).
    std::map<std::tuple<std::string, std::string, int>, nlohmann::json> series;
    for (const auto& r : report.rows)
        series[{r.metric, r.group, r.phase}].push_back({{"week", r.week},
                                                        {"mean", r.mean},
                                                        {"ci_low", r.ci_low},
                                                        {"ci_high", r.ci_high},
                                                        {"n_participants", r.n_participants},
                                                        {"degenerate", r.degenerate}});
    for (const char* m : kMetrics) metrics[m] = nlohmann::json::array();
    for (auto& [key, points] : series) {
        const auto& [metric, group, phase] = key;
        metrics[metric].push_back({{"group", group}, {"phase", phase}, {"points", std::move(points)}});
    }
    return {{"schema_version", kPlotSchemaVersion},
            {"units", {{"reward", "Likert points (pre - post)"}, {"acceptance", "fraction of initiated prompts"}}},
            {"interval", "95% t-interval over participant means"},
            {"config_hash", meta.config_hash},
            {"seed", meta.seed},
            {"metrics", std::move(metrics)}};
}

std::string welch_csv(const Report& report) {
    std::map<std::tuple<int, int, std::string>, std::vector<const stats::SummaryRow*>> cells;
    for (const auto& r : report.rows) cells[{r.phase, r.week, r.metric}].push_back(&r);

    std::string out = "phase,week,metric,group_a,group_b,mean_a,mean_b,n_a,n_b,t,df,p\n";
    for (const auto& [key, rows] : cells) {
        const auto& [phase, week, metric] = key;
        for (std::size_t i = 0; i < rows.size(); ++i)
            for (std::size_t j = i + 1; j < rows.size(); ++j) {
                const auto& a = *rows[i];
                const auto& b = *rows[j];
                double t = std::nan(""), df = std::nan(""), p = std::nan("");
                try {
                    const auto w = stats::welch_t(a.participant_means, b.participant_means);
                    t = w.t;
                    df = w.df;
                    p = w.p;
                } catch (const Error& e) {
                    if (e.kind() != ErrorKind::Degenerate) throw;
                }
                out += std::to_string(phase) + ',' + std::to_string(week) + ',' + metric + ',' + a.group + ',' +
                       b.group + ',' + num(a.mean) + ',' + num(b.mean) + ',' + std::to_string(a.n_participants) +
                       ',' + std::to_string(b.n_participants) + ',' + num(t) + ',' + num(df) + ',' + num(p) + '\n';
            }
    }
    return out;
}

std::vector<std::string> write_report(const study::StudyLog& log, const agent::AttributeSchema& schema,
                                      const std::filesystem::path& dir) {
    const auto rep = build_report(log);
    std::filesystem::create_directories(dir);
    auto write = [&](const std::string& name, const std::string& content) {
        std::ofstream out(dir / name, std::ios::binary);
        if (!out) throw Error(ErrorKind::Io, "cannot write '" + (dir / name).string() + "'");
        out << content;
    };
    write("records.csv", study::records_csv(log, schema));
    write("summary.csv", summary_csv(rep));
    write("plot_data.json", plot_data(rep, log.meta).dump(2) + "\n");
    write("welch.csv", welch_csv(rep));
    return rep.warnings;
}

}  // namespace pcar::report
