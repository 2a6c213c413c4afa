#pragma once

// Study configuration file (JSON, schema_version 1). Unknown keys are
// rejected so that sweeps over a misspelled parameter fail instead of
// silently running the default. See configs/default_study.json for the full
// key set.

#include <cstdint>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "pcar/agent.hpp"
#include "pcar/cohort.hpp"
#include "pcar/scheduler.hpp"

namespace pcar::study {

inline constexpr int kConfigSchemaVersion = 1;

struct Phase1Allocation {
    double control = 0.25;
    double random = 0.75;
};

struct Phase2Allocation {
    double random = 0.4;
    double pcar = 0.6;
};

enum class TriggerMode { Model, Random };

struct SchedulerConfig {
    TriggerMode mode = TriggerMode::Model;
    double threshold = 0.5;
    /// 0.01 rather than 0.1: the budget term sums scores over labeled prompts,
    /// of which a day holds at most max_per_day, so it can only pull scores up;
    /// at 0.1 every score clears the threshold and timing degenerates to
    /// "first eligible tick".
    double budget_penalty = 0.01;
    double step = 0.05;
    int epochs = 500;
    /// Per-eligible-tick trigger probability for random timing and for the
    /// cold start before the timing model has enough history.
    double random_trigger_prob = 0.03;
    /// Labeled prompts required before the timing model replaces random timing.
    int min_history = 10;
    /// Fit one nightly model on the whole cohort's history (the features carry
    /// no participant identity) instead of one model per participant.
    bool pooled = true;
};

struct StudyConfig {
    std::uint64_t seed = 1;
    std::size_t n_participants = 28;
    Phase1Allocation phase1;
    Phase2Allocation phase2;
    int weeks_per_phase = 2;
    scheduler::BudgetRules budget;
    SchedulerConfig scheduler;
    agent::AgentParams agent;
    /// Count declined or unfinished opportunities as rounds of the switch clock.
    bool advance_on_decline = false;
    /// Seed each PCAR learner with SARSA updates replayed from the
    /// participant's own phase-1 random-content history.
    bool pcar_warm_start = true;
    /// Collect a second EMA ten minutes after an EMA-only prompt.
    bool control_post_ema = true;
    cohort::CohortParams cohort;
    /// As written in the file; resolved against the config's directory.
    std::string catalog;
    std::filesystem::path catalog_path;
    std::string output_dir;

    void validate() const;
};

/// Parses and validates; relative catalog paths resolve against `base_dir`.
StudyConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir);
StudyConfig load_config(const std::filesystem::path& path);
nlohmann::json load_config_json(const std::filesystem::path& path);

nlohmann::json config_to_json(const StudyConfig& cfg);

/// FNV-1a 64 of the canonical (sorted-key, compact) JSON form.
std::uint64_t config_hash(const StudyConfig& cfg);
std::uint64_t fnv1a64(std::string_view data, std::uint64_t basis = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t v);

/// Replaces the value at a dotted path ("agent.lambda", "cohort.engagement.sensitivity").
/// Throws Config when the path does not exist.
void set_parameter(nlohmann::json& config, const std::string& dotted_path, const nlohmann::json& value);

}  // namespace pcar::study
