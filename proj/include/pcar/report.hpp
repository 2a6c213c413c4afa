#pragma once

// Report files for a finished study log.
//
//   records.csv    the full record table (see study::records_csv)
//   summary.csv    group,phase,week,metric,mean,ci_low,ci_high,n_participants,
//                  degenerate,delta_within_phase
//   plot_data.json schema_version 1: metric -> series per (group, phase) with
//                  weekly mean and 95% CI bounds
//   welch.csv      phase,week,metric,group_a,group_b,mean_a,mean_b,n_a,n_b,t,df,p
//
// Metrics are "reward" (pre - post on completed prompts, Likert points) and
// "acceptance" (share of initiated prompts accepted). Every cell is a mean of
// participant means. delta_within_phase is the change from the previous week
// of the same group and phase ("NA" in a phase's first week).

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "pcar/stats.hpp"
#include "pcar/study.hpp"

namespace pcar::report {

inline constexpr int kPlotSchemaVersion = 1;

struct Report {
    std::vector<stats::SummaryRow> rows;
    std::vector<std::string> warnings;
};

/// Throws Degenerate on an empty log.
Report build_report(const study::StudyLog& log);

std::string summary_csv(const Report& report);
nlohmann::json plot_data(const Report& report, const study::StudyMeta& meta);
std::string welch_csv(const Report& report);

/// Writes the four report files into `dir`; returns the warnings.
std::vector<std::string> write_report(const study::StudyLog& log, const agent::AttributeSchema& schema,
                                      const std::filesystem::path& dir);

}  // namespace pcar::report
