#pragma once

// Reusable experiment harnesses shared by the CLI and the acceptance suite:
// the learner-vs-planner check on a small LSD instance, the matched-budget
// timing benchmark, and one-parameter config sweeps.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "pcar/agent.hpp"
#include "pcar/config.hpp"
#include "pcar/study.hpp"

namespace pcar::experiments {

// ---------------------------------------------------------------------------
// Learner vs. exhaustive planner

struct OracleCheckParams {
    std::size_t arms = 2;
    int tau_max = 2;
    std::size_t horizon = 10;
    std::size_t seeds = 20;
    std::size_t episodes = 5000;
    /// Fraction of the optimal total a seed must reach.
    double target_ratio = 0.95;
};

struct OracleSeedResult {
    std::uint64_t seed = 0;
    double achieved = 0.0;  // greedy rollout of the trained learner
    double ratio = 0.0;
    bool passed = false;
    std::vector<std::size_t> sequence;
};

struct OracleCheckResult {
    double optimal = 0.0;
    std::vector<std::size_t> optimal_sequence;
    std::vector<OracleSeedResult> seeds;
    std::size_t passed = 0;
};

/// Reward surface of the check: (1 if tau > 0 else 0.2) + 0.1 * arm.
double oracle_reward(lsd::ArmId arm, int tau);

/// Trains one single-attribute learner per seed (epsilon annealed from 0.2 to 0
/// over all rounds, one episode = `horizon` rounds from the rested state) and
/// compares its greedy rollout against plan_oracle.
OracleCheckResult oracle_check(const OracleCheckParams& params);

// ---------------------------------------------------------------------------
// Timing model vs. uniform-random triggering at a matched budget

struct SchedulerBenchmarkParams {
    std::size_t participants = 28;
    int train_days = 10;  // weekdays of random-trigger history
    int eval_days = 10;   // weekdays of evaluation
    double history_trigger_prob = 0.03;
    scheduler::BudgetRules budget;
    double threshold = 0.5;
    double budget_penalty = 0.01;
    int epochs = 500;
    double step = 0.05;
    cohort::CohortParams cohort;
    /// One model fitted on the whole cohort's history instead of one per participant.
    bool pooled = true;
};

struct SchedulerBenchmarkResult {
    std::uint64_t seed = 0;
    double model_acceptance = 0.0;   // mean over participants
    double random_acceptance = 0.0;  // mean over participants
    double model_daily_triggers = 0.0;
    double random_daily_triggers = 0.0;
    double random_trigger_prob = 0.0;  // calibrated to match the model's volume
};

SchedulerBenchmarkResult scheduler_benchmark(const SchedulerBenchmarkParams& params, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Sweeps

struct SweepRow {
    std::string value;  // JSON text of the swept value
    std::uint64_t seed = 0;
    std::string config_hash;
    std::string log_hash;
    double pcar_final_reward = 0.0;
    double random_final_reward = 0.0;
    double control_final_reward = 0.0;
    double pcar_acceptance_change = 0.0;
    double random_acceptance_change = 0.0;
    std::size_t records = 0;
    std::size_t budget_violations = 0;
};

/// Runs one study per value with `param` (dotted path) replaced. Unless the
/// swept parameter is the seed itself, run i uses seed hash64(base seed, i) so
/// that runs are independent but reproducible.
std::vector<SweepRow> sweep(const nlohmann::json& base_config, const std::filesystem::path& base_dir,
                            const std::string& param, const std::vector<nlohmann::json>& values);

std::string sweep_csv(const std::string& param, const std::vector<SweepRow>& rows);

}  // namespace pcar::experiments
