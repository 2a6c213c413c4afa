#include "pcar/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "pcar/error.hpp"
#include "pcar/stats.hpp"

namespace pcar::experiments {

using cohort::SimTime;

// ---------------------------------------------------------------------------
// Learner vs. exhaustive planner

double oracle_reward(lsd::ArmId arm, int tau) {
    return (tau > 0 ? 1.0 : 0.2) + 0.1 * static_cast<double>(arm.index);
}

namespace {

agent::AttributeSchema single_attribute(std::size_t arms) {
    std::vector<std::string> values;
    for (std::size_t i = 0; i < arms; ++i) values.push_back("arm" + std::to_string(i));
    return agent::AttributeSchema({agent::Attribute{"arm", values}});
}

double play(const agent::AttributeVector& a, const agent::AgentBundle& bundle) {
    return oracle_reward({a.values[0]}, bundle.states()[0].tau({a.values[0]}));
}

}  // namespace

OracleCheckResult oracle_check(const OracleCheckParams& params) {
    if (params.arms < 1) throw Error(ErrorKind::InvalidParameter, "oracle check needs at least one arm");
    if (params.horizon < 1 || params.seeds < 1)
        throw Error(ErrorKind::InvalidParameter, "oracle check needs horizon >= 1 and seeds >= 1");

    // The guard is enforced here before any training happens.
    const auto plan = agent::plan_oracle(oracle_reward, params.arms, params.tau_max, params.horizon);

    OracleCheckResult out;
    out.optimal = plan.total;
    for (const auto& a : plan.sequence) out.optimal_sequence.push_back(a.index);

    const auto schema = single_attribute(params.arms);
    agent::AgentParams ap;
    ap.tau_max = params.tau_max;
    ap.trait_buckets = 1;
    ap.epsilon_start = 0.2;
    ap.epsilon_end = 0.0;
    ap.epsilon_rounds = static_cast<std::uint64_t>(params.episodes * params.horizon);
    const agent::ContextBucket ctx{agent::Period::Morning, 0};

    for (std::size_t s = 0; s < params.seeds; ++s) {
        OracleSeedResult r;
        r.seed = s + 1;
        agent::AgentBundle bundle(schema, ap, r.seed);
        for (std::size_t ep = 0; ep < params.episodes; ++ep) {
            bundle.reset_clocks();
            auto action = bundle.select_action(ctx);
            for (std::size_t t = 0; t < params.horizon; ++t) {
                const double reward = play(action, bundle);
                if (t + 1 < params.horizon) {
                    auto next = bundle.select_next(ctx, action);
                    bundle.update({ctx, action, reward, agent::Successor{ctx, next}});
                    action = next;
                } else {
                    bundle.update({ctx, action, reward, std::nullopt});
                }
            }
            bundle.end_episode();
        }

        // Greedy rollout; epsilon has annealed to 0 and is pinned there.
        auto eval = bundle;
        eval.reset_clocks();
        std::vector<lsd::ArmId> seq;
        for (std::size_t t = 0; t < params.horizon; ++t) {
            const auto a = eval.select_action(ctx);
            seq.push_back({a.values[0]});
            r.sequence.push_back(a.values[0]);
            eval.advance_clocks(a);
        }
        r.achieved = agent::sequence_reward(oracle_reward, seq, params.arms, params.tau_max);
        r.ratio = out.optimal > 0.0 ? r.achieved / out.optimal : 1.0;
        r.passed = r.ratio >= params.target_ratio - 1e-12;
        out.passed += r.passed ? 1 : 0;
        out.seeds.push_back(std::move(r));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Timing benchmark

namespace {

constexpr std::uint64_t kHistoryStream = 0x68697374ULL;
constexpr std::uint64_t kModelStream = 0x6d6f646cULL;
constexpr std::uint64_t kRandomStream = 0x72616e64ULL;

struct EvalTally {
    int triggers = 0;
    int accepted = 0;
};

/// Simulates `days` calendar days starting at `first_day` with the given
/// trigger rule; acceptance follows the participant's intervention receptivity.
template <class Rule>
EvalTally simulate_days(const cohort::ParticipantModel& p, const scheduler::BudgetRules& rules, int first_day,
                        int days, Engine& rng, Rule&& fire,
                        std::vector<scheduler::TrainingExample>* history = nullptr) {
    EvalTally tally;
    scheduler::BudgetState budget(rules);
    for (int day = first_day; day < first_day + days; ++day) {
        if (rules.weekdays_only && !SimTime::at(day, 0).is_weekday()) continue;
        const int first = (rules.window_start_minute + scheduler::kTickMinutes - 1) / scheduler::kTickMinutes *
                          scheduler::kTickMinutes;
        for (int m = first; m <= rules.window_end_minute; m += scheduler::kTickMinutes) {
            const auto now = SimTime::at(day, m);
            if (!scheduler::eligible(budget, now)) continue;
            const auto x = scheduler::features(now, budget);
            if (!fire(budget, now, x)) continue;
            budget.record_delivery(now);
            const bool ok = cohort::accept(p, now, cohort::PromptKind::Intervention, 1.0, rng);
            ++tally.triggers;
            tally.accepted += ok ? 1 : 0;
            if (history) history->push_back({x, ok ? 1.0 : 0.0, day});
        }
    }
    return tally;
}

/// Calendar days needed to cover `weekdays` weekdays from day `first`.
int calendar_span(int first, int weekdays, bool weekdays_only) {
    if (!weekdays_only) return weekdays;
    int d = first;
    for (int seen = 0; seen < weekdays; ++d)
        if (SimTime::at(d, 0).is_weekday()) ++seen;
    return d - first;
}

}  // namespace

SchedulerBenchmarkResult scheduler_benchmark(const SchedulerBenchmarkParams& params, std::uint64_t seed) {
    if (params.participants < 1 || params.train_days < 1 || params.eval_days < 1)
        throw Error(ErrorKind::InvalidParameter, "benchmark needs participants and days >= 1");
    const auto schema = agent::AttributeSchema::defaults();
    const auto cohort = cohort::default_cohort(params.participants, schema, params.cohort, seed);

    const int train_span = calendar_span(0, params.train_days, params.budget.weekdays_only);
    const int eval_span = calendar_span(train_span, params.eval_days, params.budget.weekdays_only);
    const double eval_weekdays = static_cast<double>(params.eval_days);

    std::vector<std::vector<scheduler::TrainingExample>> histories;
    for (const auto& p : cohort) {
        Engine rng(hash64(p.seed, kHistoryStream));
        std::vector<scheduler::TrainingExample> history;
        simulate_days(
            p, params.budget, 0, train_span, rng,
            [&](const scheduler::BudgetState&, SimTime, const std::vector<double>&) {
                return bernoulli(rng, params.history_trigger_prob);
            },
            &history);
        histories.push_back(std::move(history));
    }

    scheduler::TimingModel init;
    init.threshold = params.threshold;
    init.budget_penalty = params.budget_penalty;
    auto fit = [&](const std::vector<scheduler::TrainingExample>& h) {
        return h.empty() ? init
                         : scheduler::train(init, h, params.budget.max_per_day, params.epochs, params.step).model;
    };
    std::vector<scheduler::TimingModel> models;
    if (params.pooled) {
        // Budget term groups by participant-day: renumber so days never merge
        // across participants.
        std::vector<scheduler::TrainingExample> all;
        int group = -1;
        for (const auto& h : histories) {
            int last_day = -1;
            for (auto e : h) {
                if (e.day != last_day) {
                    last_day = e.day;
                    ++group;
                }
                e.day = group;
                all.push_back(std::move(e));
            }
        }
        models.assign(cohort.size(), fit(all));
    } else {
        for (const auto& h : histories) models.push_back(fit(h));
    }

    std::vector<double> model_acc;
    int model_triggers = 0;
    for (std::size_t i = 0; i < cohort.size(); ++i) {
        const auto& p = cohort[i];
        const auto& model = models[i];
        Engine eval_rng(hash64(p.seed, kModelStream));
        const auto t = simulate_days(p, params.budget, train_span, eval_span, eval_rng,
                                     [&](const scheduler::BudgetState& b, SimTime now, const std::vector<double>&) {
                                         return scheduler::decide(model, b, now);
                                     });
        model_triggers += t.triggers;
        if (t.triggers > 0) model_acc.push_back(static_cast<double>(t.accepted) / t.triggers);
    }

    // Uniform-random triggering: one per-tick probability for the whole
    // cohort, bisected so that the mean daily volume matches the model's.
    auto run_random = [&](double q, std::vector<double>* acc) {
        int triggers = 0;
        for (const auto& p : cohort) {
            Engine rng(hash64(p.seed, kRandomStream));
            const auto t = simulate_days(p, params.budget, train_span, eval_span, rng,
                                         [&](const scheduler::BudgetState&, SimTime, const std::vector<double>&) {
                                             return bernoulli(rng, q);
                                         });
            triggers += t.triggers;
            if (acc && t.triggers > 0) acc->push_back(static_cast<double>(t.accepted) / t.triggers);
        }
        return triggers;
    };
    double lo = 0.0, hi = 1.0;
    for (int i = 0; i < 30; ++i) {
        const double mid = 0.5 * (lo + hi);
        (run_random(mid, nullptr) < model_triggers ? lo : hi) = mid;
    }
    const double q = 0.5 * (lo + hi);
    std::vector<double> random_acc;
    const int random_triggers = run_random(q, &random_acc);

    const double n = static_cast<double>(cohort.size());
    SchedulerBenchmarkResult out;
    out.seed = seed;
    out.model_acceptance = model_acc.empty() ? 0.0 : stats::mean(model_acc);
    out.random_acceptance = random_acc.empty() ? 0.0 : stats::mean(random_acc);
    out.model_daily_triggers = model_triggers / (n * eval_weekdays);
    out.random_daily_triggers = random_triggers / (n * eval_weekdays);
    out.random_trigger_prob = q;
    return out;
}

// ---------------------------------------------------------------------------
// Sweeps

std::vector<SweepRow> sweep(const nlohmann::json& base_config, const std::filesystem::path& base_dir,
                            const std::string& param, const std::vector<nlohmann::json>& values) {
    if (values.empty()) throw Error(ErrorKind::InvalidParameter, "sweep needs at least one value");
    const auto base = study::parse_config(base_config, base_dir);
    const auto catalog = catalog::load_catalog(base.catalog_path);
    const bool seed_sweep = param == "seed";

    std::vector<SweepRow> rows;
    for (std::size_t i = 0; i < values.size(); ++i) {
        auto j = base_config;
        study::set_parameter(j, param, values[i]);
        if (!seed_sweep) j["seed"] = hash64(base.seed, i);
        const auto cfg = study::parse_config(j, base_dir);
        const auto log = study::run_study(cfg, catalog);
        const auto o = study::summarize(log);

        auto mean_or_nan = [](const std::vector<double>& v) { return v.empty() ? std::nan("") : stats::mean(v); };
        SweepRow r;
        r.value = values[i].dump();
        r.seed = cfg.seed;
        r.config_hash = log.meta.config_hash;
        r.log_hash = study::hex64(study::log_hash(log, catalog.schema()));
        r.pcar_final_reward = mean_or_nan(o.pcar_final_reward);
        r.random_final_reward = mean_or_nan(o.random_final_reward);
        r.control_final_reward = mean_or_nan(o.control_final_reward);
        r.pcar_acceptance_change = o.pcar_acceptance_change;
        r.random_acceptance_change = o.random_acceptance_change;
        r.records = log.records.size();
        r.budget_violations = study::budget_violations(log.records, cfg.budget).size();
        rows.push_back(std::move(r));
    }
    return rows;
}

std::string sweep_csv(const std::string& param, const std::vector<SweepRow>& rows) {
    auto num = [](double v) -> std::string {
        if (std::isnan(v)) return "NA";
        char buf[48];
        std::snprintf(buf, sizeof buf, "%.6f", v);
        return buf;
    };
    auto quote = [](const std::string& s) {
        if (s.find_first_of(",\"\n") == std::string::npos) return s;
        std::string q = "\"";
        for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
        return q + "\"";
    };
    std::string out =
        "param,value,seed,config_hash,log_hash,pcar_final_reward,random_final_reward,control_final_reward,"
        "pcar_acceptance_change,random_acceptance_change,records,budget_violations\n";
    for (const auto& r : rows)
        out += quote(param) + ',' + quote(r.value) + ',' + std::to_string(r.seed) + ',' + r.config_hash + ',' +
               r.log_hash + ',' + num(r.pcar_final_reward) + ',' + num(r.random_final_reward) + ',' +
               num(r.control_final_reward) + ',' + num(r.pcar_acceptance_change) + ',' +
               num(r.random_acceptance_change) + ',' + std::to_string(r.records) + ',' +
               std::to_string(r.budget_violations) + '\n';
    return out;
}

}  // namespace pcar::experiments
