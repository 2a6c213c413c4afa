#pragma once

// Phase-structured study simulation.
//
// Phase 1 splits participants into control (EMA-only prompts) and random
// content; phase 2 reallocates everyone into random and PCAR. Each weekday
// runs on a 5-minute tick: the scheduler decides whether to prompt, the
// participant accepts or lets the prompt time out, a pre-EMA is taken, the
// group's policy picks content, and a post-EMA ten minutes later yields the
// reward (pre - post).

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "pcar/catalog.hpp"
#include "pcar/cohort.hpp"
#include "pcar/config.hpp"

namespace pcar::study {

inline constexpr const char* kVersion = "1.0.0";

struct DecisionEvent {
    std::uint64_t pid = 0;
    cohort::SimTime timestamp;
    TriggerMode mode = TriggerMode::Random;
    double score = 0.0;
};

struct StudyMeta {
    std::string config_hash;
    std::uint64_t seed = 0;
    std::string version = kVersion;
    int weeks_per_phase = 2;
    std::size_t n_participants = 0;
};

struct StudyLog {
    StudyMeta meta;
    std::vector<cohort::InterventionRecord> records;  // by (pid, timestamp)
    std::vector<DecisionEvent> decisions;
};

/// Phase-1 and phase-2 group of every participant, indexed by pid.
struct Assignment {
    std::vector<cohort::Group> phase1;
    std::vector<cohort::Group> phase2;
};

Assignment assign_groups(const StudyConfig& cfg);

StudyLog run_study(const StudyConfig& cfg);
StudyLog run_study(const StudyConfig& cfg, const catalog::Catalog& catalog);

/// Record CSV. Columns:
/// seed,pid,group,phase,week,day,timestamp,clock,weekday,emotional_regulation,
/// therapy_group,location,intervention_id,tau_before,accepted,completed,
/// pre_stress,post_stress,reward,trigger_score
std::string records_csv(const StudyLog& log, const agent::AttributeSchema& schema);
std::vector<cohort::InterventionRecord> parse_records_csv(const std::string& text,
                                                          const agent::AttributeSchema& schema);

/// Decision CSV: pid,timestamp,clock,mode,score — one row per trigger decision.
std::string decisions_csv(const StudyLog& log);
std::vector<DecisionEvent> parse_decisions_csv(const std::string& text);

/// FNV-1a 64 over the record and decision CSVs.
std::uint64_t log_hash(const StudyLog& log, const agent::AttributeSchema& schema);

/// Writes records.csv, decisions.csv and meta.json into `dir`.
void write_log(const StudyLog& log, const agent::AttributeSchema& schema, const std::filesystem::path& dir);

/// Reads a log directory (or a records.csv path directly); decisions.csv and
/// meta.json are picked up when they sit next to the records.
StudyLog read_log(const std::filesystem::path& path, const agent::AttributeSchema& schema);

/// Violations of the hard delivery rules found in a finished log.
std::vector<std::string> budget_violations(const std::vector<cohort::InterventionRecord>& records,
                                           const scheduler::BudgetRules& rules);

/// Headline quantities of one run.
struct StudyOutcome {
    /// Participant means of reward in the last week of phase 2 (pcar, random)
    /// and the last week of phase 1 (control).
    std::vector<double> pcar_final_reward;
    std::vector<double> random_final_reward;
    std::vector<double> control_final_reward;
    /// Week-over-week change of the group mean acceptance within phase 2
    /// (last week minus first week), NaN when a week is empty.
    double pcar_acceptance_change = 0.0;
    double random_acceptance_change = 0.0;
};

StudyOutcome summarize(const StudyLog& log);

}  // namespace pcar::study
