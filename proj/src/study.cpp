#include "pcar/study.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>
#include <stdexcept>

#include "pcar/error.hpp"
#include "pcar/scheduler.hpp"

namespace pcar::study {

using cohort::Group;
using cohort::InterventionRecord;
using cohort::SimTime;

Assignment assign_groups(const StudyConfig& cfg) {
    const std::size_t n = cfg.n_participants;
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Engine rng(hash64(cfg.seed, 0x616c6c6f63ULL));
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);

    Assignment a{std::vector<Group>(n, Group::Random), std::vector<Group>(n, Group::Random)};
    const auto n_control = static_cast<std::size_t>(std::llround(static_cast<double>(n) * cfg.phase1.control));
    for (std::size_t i = 0; i < std::min(n_control, n); ++i) a.phase1[order[i]] = Group::Control;

    // Phase 2 spreads PCAR slots evenly over the shuffled order, which keeps
    // the split stratified by phase-1 group (controls come first).
    const double f = cfg.phase2.pcar;
    for (std::size_t i = 0; i < n; ++i) {
        const auto before = static_cast<long long>(std::floor(static_cast<double>(i) * f + 1e-9));
        const auto after = static_cast<long long>(std::floor(static_cast<double>(i + 1) * f + 1e-9));
        a.phase2[order[i]] = after > before ? Group::Pcar : Group::Random;
    }
    return a;
}

namespace {

struct PendingStep {
    agent::ContextBucket ctx;
    agent::AttributeVector action;
    double reward = 0.0;
};

constexpr std::uint64_t kAgentStream = 0x70636172ULL;

class ParticipantRun {
public:
    ParticipantRun(const StudyConfig& cfg, const catalog::Catalog& catalog, const cohort::ParticipantModel& p,
                   Group phase1, Group phase2, StudyLog& log)
        : cfg_(cfg),
          catalog_(catalog),
          p_(p),
          groups_{phase1, phase2},
          log_(log),
          rng_(p.seed),
          budget_(cfg.budget),
          engagement_(p.engagement) {
        model_.threshold = cfg.scheduler.threshold;
        model_.budget_penalty = cfg.scheduler.budget_penalty;
        for (const auto& attr : catalog.schema().attributes())
            clocks_.push_back(lsd::LsdState::initial(attr.values.size(), cfg.agent.tau_max));
    }

    /// Simulates one calendar day: phase bookkeeping, the tick loop, and the
    /// end-of-day learner step. Timing-model training happens in the caller.
    void run_day(int day) {
        const int phase_days = 7 * cfg_.weeks_per_phase;
        phase_ = day < phase_days ? 1 : 2;
        week_ = (day % phase_days) / 7 + 1;
        if (day == phase_days) begin_phase2();
        group_ = groups_[phase_ - 1];
        if (cfg_.budget.weekdays_only && !SimTime::at(day, 0).is_weekday()) return;

        const int first_tick = (cfg_.budget.window_start_minute + scheduler::kTickMinutes - 1) /
                               scheduler::kTickMinutes * scheduler::kTickMinutes;
        for (int minute = first_tick; minute <= cfg_.budget.window_end_minute; minute += scheduler::kTickMinutes)
            tick(SimTime::at(day, minute), day);
        finish_day();
    }

    const std::vector<scheduler::TrainingExample>& history() const noexcept { return history_; }

    void set_model(const scheduler::TimingModel& model) {
        model_ = model;
        trained_ = true;
    }

private:
    void tick(SimTime now, int day) {
        if (!scheduler::eligible(budget_, now)) return;
        const auto x = scheduler::features(now, budget_);
        bool fire = false;
        double score = 0.0;
        TriggerMode mode = TriggerMode::Random;
        if (cfg_.scheduler.mode == TriggerMode::Model && trained_) {
            mode = TriggerMode::Model;
            fire = scheduler::decide(model_, budget_, now);
            score = scheduler::score(model_, x);
        } else {
            score = cfg_.scheduler.random_trigger_prob;
            fire = bernoulli(rng_, score);
        }
        if (!fire) return;

        log_.decisions.push_back({p_.pid, now, mode, score});
        budget_.record_delivery(now);
        const bool accepted = deliver(now, day, score);
        history_.push_back({x, accepted ? 1.0 : 0.0, day});
    }

    agent::AttributeVector choose(const agent::ContextBucket& ctx) {
        if (group_ == Group::Random) return agent::random_policy(catalog_.schema(), rng_);
        if (!pending_) return bundle_->select_action(ctx);
        auto next = bundle_->select_next(ctx, pending_->action);
        bundle_->update({pending_->ctx, pending_->action, pending_->reward, agent::Successor{ctx, next}});
        pending_.reset();
        return next;
    }

    void advance_env(const agent::AttributeVector& action) {
        for (std::size_t a = 0; a < clocks_.size(); ++a) clocks_[a] = clocks_[a].advance({action.values[a]});
    }

    bool deliver(SimTime now, int day, double score) {
        InterventionRecord rec;
        rec.seed = cfg_.seed;
        rec.pid = p_.pid;
        rec.group = group_;
        rec.phase = phase_;
        rec.week = week_;
        rec.day = day;
        rec.timestamp = now;
        rec.trigger_score = score;

        const bool content = group_ != Group::Control;
        const auto period = agent::period_from_hour(now.hour());
        const agent::ContextBucket ctx{period, p_.trait_bucket};

        auto pick = [&] {
            rec.action = choose(ctx);
            for (std::size_t a = 0; a < clocks_.size(); ++a) rec.tau_before.push_back(clocks_[a].tau({rec.action->values[a]}));
            rec.intervention_id = catalog::resolve(catalog_, *rec.action, rng_).id;
        };

        if (content && cfg_.advance_on_decline) pick();
        const auto kind = content ? cohort::PromptKind::Intervention : cohort::PromptKind::EmaOnly;
        rec.accepted = cohort::accept(p_, now, kind, engagement_.factor(), rng_);

        if (rec.accepted) {
            rec.pre_stress = cohort::pre_stress(p_, now, rng_);
            if (content && !rec.action) pick();
            rec.completed = bernoulli(rng_, p_.completion_prob) && (content || cfg_.control_post_ema);
            if (rec.completed) {
                rec.post_stress = rec.action ? cohort::post_stress(p_, *rec.pre_stress, *rec.action, rec.tau_before,
                                                                   period, rng_)
                                             : cohort::post_stress_control(p_, *rec.pre_stress, rng_);
                rec.reward = *rec.pre_stress - *rec.post_stress;
            }
        }

        if (rec.action) {
            if (rec.completed) {
                // Engagement follows the benefit the participant experienced,
                // not the noisy self-report of it.
                engagement_.observe(cohort::expected_effect(p_, *rec.action, rec.tau_before, period));
                advance_env(*rec.action);
                if (group_ == Group::Pcar) pending_ = PendingStep{ctx, *rec.action, static_cast<double>(*rec.reward)};
            } else if (cfg_.advance_on_decline) {
                advance_env(*rec.action);
                if (group_ == Group::Pcar) bundle_->advance_clocks(*rec.action);
            }
        }

        if (phase_ == 1) phase1_records_.push_back(rec);
        log_.records.push_back(std::move(rec));
        return log_.records.back().accepted;
    }

    void finish_day() {
        if (pending_) {
            bundle_->update({pending_->ctx, pending_->action, pending_->reward, std::nullopt});
            pending_.reset();
        }
        if (bundle_) bundle_->end_episode();
    }

    void begin_phase2() {
        if (groups_[1] != Group::Pcar) return;
        auto params = cfg_.agent;
        bundle_.emplace(catalog_.schema(), params, hash64(p_.seed, kAgentStream));
        if (cfg_.pcar_warm_start && groups_[0] == Group::Random) {
            replay_phase1();
            for (std::size_t a = 0; a < clocks_.size(); ++a)
                if (!(bundle_->states()[a] == clocks_[a]))
                    throw std::logic_error("learner clocks diverged from the environment after warm start");
        }
        // Without a replay the learner still has to see the clocks the
        // participant actually accumulated in phase 1.
        bundle_->set_clocks(clocks_);
    }

    // SARSA over the participant's logged phase-1 trajectory, using the same
    // pending/next-step pairing as the online loop.
    void replay_phase1() {
        std::optional<PendingStep> pending;
        int day = -1;
        auto close_day = [&] {
            if (pending) bundle_->update({pending->ctx, pending->action, pending->reward, std::nullopt});
            pending.reset();
            bundle_->end_episode();
        };
        for (const auto& rec : phase1_records_) {
            if (rec.day != day) {
                if (day >= 0) close_day();
                day = rec.day;
            }
            if (!rec.action) continue;
            const agent::ContextBucket ctx{agent::period_from_hour(rec.timestamp.hour()), p_.trait_bucket};
            if (pending) {
                bundle_->update({pending->ctx, pending->action, pending->reward, agent::Successor{ctx, *rec.action}});
                pending.reset();
            }
            if (rec.completed)
                pending = PendingStep{ctx, *rec.action, static_cast<double>(*rec.reward)};
            else if (cfg_.advance_on_decline)
                bundle_->advance_clocks(*rec.action);
        }
        if (day >= 0) close_day();
    }

    const StudyConfig& cfg_;
    const catalog::Catalog& catalog_;
    const cohort::ParticipantModel& p_;
    Group groups_[2];
    StudyLog& log_;
    Engine rng_;

    scheduler::BudgetState budget_;
    scheduler::TimingModel model_;
    bool trained_ = false;
    std::vector<scheduler::TrainingExample> history_;

    cohort::Engagement engagement_;
    std::vector<lsd::LsdState> clocks_;
    std::optional<agent::AgentBundle> bundle_;
    std::optional<PendingStep> pending_;
    std::vector<InterventionRecord> phase1_records_;

    int phase_ = 1;
    int week_ = 1;
    Group group_ = Group::Control;
};

}  // namespace

StudyLog run_study(const StudyConfig& cfg) {
    const auto catalog = catalog::load_catalog(cfg.catalog_path);
    return run_study(cfg, catalog);
}

namespace {

/// Nightly timing-model refit, from zeros, on everything labeled so far.
void retrain(const StudyConfig& cfg, std::vector<std::unique_ptr<ParticipantRun>>& runs) {
    scheduler::TimingModel fresh;
    fresh.threshold = cfg.scheduler.threshold;
    fresh.budget_penalty = cfg.scheduler.budget_penalty;
    const auto min_history = static_cast<std::size_t>(cfg.scheduler.min_history);
    auto fit = [&](std::span<const scheduler::TrainingExample> h) {
        return scheduler::train(fresh, h, cfg.budget.max_per_day, cfg.scheduler.epochs, cfg.scheduler.step).model;
    };

    if (!cfg.scheduler.pooled) {
        for (auto& run : runs)
            if (run->history().size() >= min_history) run->set_model(fit(run->history()));
        return;
    }
    // The budget term groups by day; participant-days are renumbered so that
    // each one counts against its own budget. Histories are chronological.
    std::vector<scheduler::TrainingExample> pooled;
    int group = -1;
    for (const auto& run : runs) {
        int last_day = -1;
        for (auto e : run->history()) {
            if (e.day != last_day) {
                last_day = e.day;
                ++group;
            }
            e.day = group;
            pooled.push_back(std::move(e));
        }
    }
    if (pooled.size() < min_history) return;
    const auto model = fit(pooled);
    for (auto& run : runs) run->set_model(model);
}

}  // namespace

StudyLog run_study(const StudyConfig& cfg, const catalog::Catalog& catalog) {
    cfg.validate();
    auto params = cfg.agent;
    params.trait_buckets = cfg.cohort.trait_buckets;
    StudyConfig effective = cfg;
    effective.agent = params;

    StudyLog log;
    log.meta.config_hash = hex64(config_hash(cfg));
    log.meta.seed = cfg.seed;
    log.meta.weeks_per_phase = cfg.weeks_per_phase;
    log.meta.n_participants = cfg.n_participants;

    const auto cohort = cohort::default_cohort(cfg.n_participants, catalog.schema(), cfg.cohort, cfg.seed);
    const auto groups = assign_groups(cfg);
    std::vector<std::unique_ptr<ParticipantRun>> runs;
    for (std::size_t i = 0; i < cohort.size(); ++i)
        runs.push_back(
            std::make_unique<ParticipantRun>(effective, catalog, cohort[i], groups.phase1[i], groups.phase2[i], log));

    const int days = 14 * cfg.weeks_per_phase;
    for (int day = 0; day < days; ++day) {
        for (auto& run : runs) run->run_day(day);
        if (cfg.scheduler.mode == TriggerMode::Model) retrain(effective, runs);
    }

    // Days were simulated cohort-wide; the log is ordered by (pid, time).
    std::stable_sort(log.records.begin(), log.records.end(),
                     [](const InterventionRecord& a, const InterventionRecord& b) { return a.pid < b.pid; });
    std::stable_sort(log.decisions.begin(), log.decisions.end(),
                     [](const DecisionEvent& a, const DecisionEvent& b) { return a.pid < b.pid; });
    return log;
}

// ---------------------------------------------------------------------------
// CSV

namespace {

constexpr const char* kRecordHeader =
    "seed,pid,group,phase,week,day,timestamp,clock,weekday,emotional_regulation,therapy_group,location,"
    "intervention_id,tau_before,accepted,completed,pre_stress,post_stress,reward,trigger_score";

std::string opt(const std::optional<int>& v) { return v ? std::to_string(*v) : std::string(); }

std::string fixed6(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        out.push_back(s.substr(start, pos - start));
        if (pos == std::string::npos) break;
        start = pos + 1;
    }
    return out;
}

template <class T>
T parse_number(const std::string& s, std::size_t row, const char* column, const char* table = "records") {
    try {
        std::size_t used = 0;
        T v{};
        if constexpr (std::is_same_v<T, double>)
            v = std::stod(s, &used);
        else if constexpr (std::is_same_v<T, std::uint64_t>)
            v = std::stoull(s, &used);
        else
            v = static_cast<T>(std::stoll(s, &used));
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw Error(ErrorKind::Parse,
                    std::string(table) + " row " + std::to_string(row) + ": bad " + column + " '" + s + "'");
    }
}

}  // namespace

std::string records_csv(const StudyLog& log, const agent::AttributeSchema& schema) {
    std::string out = kRecordHeader;
    out += '\n';
    for (const auto& r : log.records) {
        std::string attrs[3];
        if (r.action)
            for (std::size_t a = 0; a < 3 && a < schema.size(); ++a) attrs[a] = schema[a].values.at(r.action->values[a]);
        std::string taus;
        for (std::size_t i = 0; i < r.tau_before.size(); ++i) {
            if (i) taus += ';';
            taus += std::to_string(r.tau_before[i]);
        }
        out += std::to_string(r.seed) + ',' + std::to_string(r.pid) + ',' + std::string(cohort::to_string(r.group)) +
               ',' + std::to_string(r.phase) + ',' + std::to_string(r.week) + ',' + std::to_string(r.day) + ',' +
               std::to_string(r.timestamp.minutes) + ',' + cohort::format_clock(r.timestamp) + ',' +
               std::to_string(r.timestamp.weekday()) + ',' + attrs[0] + ',' + attrs[1] + ',' + attrs[2] + ',' +
               r.intervention_id + ',' + taus + ',' + (r.accepted ? "1" : "0") + ',' + (r.completed ? "1" : "0") +
               ',' + opt(r.pre_stress) + ',' + opt(r.post_stress) + ',' + opt(r.reward) + ',' +
               fixed6(r.trigger_score) + '\n';
    }
    return out;
}

std::vector<InterventionRecord> parse_records_csv(const std::string& text, const agent::AttributeSchema& schema) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw Error(ErrorKind::Parse, "records CSV is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kRecordHeader) throw Error(ErrorKind::Parse, "records CSV has an unexpected header");

    std::vector<InterventionRecord> out;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto c = split(line, ',');
        if (c.size() != 20) throw Error(ErrorKind::Parse, "records row " + std::to_string(row) + ": expected 20 columns");
        InterventionRecord r;
        r.seed = parse_number<std::uint64_t>(c[0], row, "seed");
        r.pid = parse_number<std::uint64_t>(c[1], row, "pid");
        const auto g = cohort::group_from_string(c[2]);
        if (!g) throw Error(ErrorKind::Parse, "records row " + std::to_string(row) + ": unknown group '" + c[2] + "'");
        r.group = *g;
        r.phase = parse_number<int>(c[3], row, "phase");
        r.week = parse_number<int>(c[4], row, "week");
        r.day = parse_number<int>(c[5], row, "day");
        r.timestamp.minutes = parse_number<std::int64_t>(c[6], row, "timestamp");
        if (!c[9].empty()) {
            agent::AttributeVector a;
            for (std::size_t i = 0; i < schema.size(); ++i) {
                const auto v = schema.find_value(i, c[9 + i]);
                if (!v)
                    throw Error(ErrorKind::Parse, "records row " + std::to_string(row) + ": unknown value '" + c[9 + i] + "'");
                a.values.push_back(*v);
            }
            r.action = a;
        }
        r.intervention_id = c[12];
        if (!c[13].empty())
            for (const auto& t : split(c[13], ';')) r.tau_before.push_back(parse_number<int>(t, row, "tau_before"));
        r.accepted = c[14] == "1";
        r.completed = c[15] == "1";
        if (!c[16].empty()) r.pre_stress = parse_number<int>(c[16], row, "pre_stress");
        if (!c[17].empty()) r.post_stress = parse_number<int>(c[17], row, "post_stress");
        if (!c[18].empty()) r.reward = parse_number<int>(c[18], row, "reward");
        r.trigger_score = parse_number<double>(c[19], row, "trigger_score");
        out.push_back(std::move(r));
    }
    return out;
}

std::string decisions_csv(const StudyLog& log) {
    std::string out = "pid,timestamp,clock,mode,score\n";
    for (const auto& d : log.decisions)
        out += std::to_string(d.pid) + ',' + std::to_string(d.timestamp.minutes) + ',' +
               cohort::format_clock(d.timestamp) + ',' + (d.mode == TriggerMode::Model ? "model" : "random") + ',' +
               fixed6(d.score) + '\n';
    return out;
}

std::vector<DecisionEvent> parse_decisions_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw Error(ErrorKind::Parse, "decisions CSV is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "pid,timestamp,clock,mode,score") throw Error(ErrorKind::Parse, "decisions CSV has an unexpected header");

    std::vector<DecisionEvent> out;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto c = split(line, ',');
        if (c.size() != 5)
            throw Error(ErrorKind::Parse, "decisions row " + std::to_string(row) + ": expected 5 columns");
        DecisionEvent d;
        d.pid = parse_number<std::uint64_t>(c[0], row, "pid", "decisions");
        d.timestamp.minutes = parse_number<std::int64_t>(c[1], row, "timestamp", "decisions");
        if (c[3] == "model")
            d.mode = TriggerMode::Model;
        else if (c[3] == "random")
            d.mode = TriggerMode::Random;
        else
            throw Error(ErrorKind::Parse, "decisions row " + std::to_string(row) + ": unknown mode '" + c[3] + "'");
        d.score = parse_number<double>(c[4], row, "score", "decisions");
        out.push_back(d);
    }
    return out;
}

std::uint64_t log_hash(const StudyLog& log, const agent::AttributeSchema& schema) {
    return fnv1a64(decisions_csv(log), fnv1a64(records_csv(log, schema)));
}

void write_log(const StudyLog& log, const agent::AttributeSchema& schema, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    auto write = [&](const std::string& name, const std::string& content) {
        std::ofstream out(dir / name, std::ios::binary);
        if (!out) throw Error(ErrorKind::Io, "cannot write '" + (dir / name).string() + "'");
        out << content;
    };
    write("records.csv", records_csv(log, schema));
    write("decisions.csv", decisions_csv(log));
    const nlohmann::json meta = {{"schema_version", 1},
                                 {"config_hash", log.meta.config_hash},
                                 {"seed", log.meta.seed},
                                 {"version", log.meta.version},
                                 {"weeks_per_phase", log.meta.weeks_per_phase},
                                 {"n_participants", log.meta.n_participants},
                                 {"log_hash", hex64(log_hash(log, schema))},
                                 {"records", log.records.size()}};
    write("meta.json", meta.dump(2) + "\n");
}

StudyLog read_log(const std::filesystem::path& path, const agent::AttributeSchema& schema) {
    const bool is_dir = std::filesystem::is_directory(path);
    const auto records_path = is_dir ? path / "records.csv" : path;
    std::ifstream in(records_path, std::ios::binary);
    if (!in) throw Error(ErrorKind::Io, "cannot open log '" + records_path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();

    StudyLog log;
    log.records = parse_records_csv(buf.str(), schema);
    int max_week = 1;
    for (const auto& r : log.records) max_week = std::max(max_week, r.week);
    log.meta.weeks_per_phase = max_week;
    if (!log.records.empty()) log.meta.seed = log.records.front().seed;

    if (std::ifstream dec_in(records_path.parent_path() / "decisions.csv", std::ios::binary); dec_in) {
        std::ostringstream dec;
        dec << dec_in.rdbuf();
        log.decisions = parse_decisions_csv(dec.str());
    }

    const auto meta_path = records_path.parent_path() / "meta.json";
    if (std::ifstream meta_in(meta_path); meta_in) {
        try {
            const auto meta = nlohmann::json::parse(meta_in);
            log.meta.config_hash = meta.value("config_hash", "");
            log.meta.weeks_per_phase = meta.value("weeks_per_phase", max_week);
            log.meta.n_participants = meta.value("n_participants", std::size_t{0});
            log.meta.version = meta.value("version", std::string(kVersion));
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorKind::Parse, "meta.json: " + std::string(e.what()));
        }
    }
    return log;
}

std::vector<std::string> budget_violations(const std::vector<InterventionRecord>& records,
                                           const scheduler::BudgetRules& rules) {
    std::vector<std::string> out;
    std::map<std::uint64_t, std::vector<SimTime>> by_pid;
    for (const auto& r : records) by_pid[r.pid].push_back(r.timestamp);
    for (auto& [pid, times] : by_pid) {
        std::sort(times.begin(), times.end());
        std::map<int, int> per_day;
        for (std::size_t i = 0; i < times.size(); ++i) {
            const auto t = times[i];
            const std::string where = "pid " + std::to_string(pid) + " day " + std::to_string(t.day()) + " " +
                                      cohort::format_clock(t);
            if (rules.weekdays_only && !t.is_weekday()) out.push_back(where + ": weekend delivery");
            if (t.minute_of_day() < rules.window_start_minute || t.minute_of_day() > rules.window_end_minute)
                out.push_back(where + ": outside the delivery window");
            if (++per_day[t.day()] > rules.max_per_day) out.push_back(where + ": daily cap exceeded");
            if (i > 0 && t.minutes - times[i - 1].minutes < rules.min_gap_minutes)
                out.push_back(where + ": gap below " + std::to_string(rules.min_gap_minutes) + " minutes");
        }
    }
    return out;
}

StudyOutcome summarize(const StudyLog& log) {
    const int last = log.meta.weeks_per_phase;
    std::map<std::uint64_t, std::pair<double, int>> pcar, random, control;
    // (phase 2 week) -> group -> pid -> (accepted, initiated)
    std::map<int, std::map<Group, std::map<std::uint64_t, std::pair<double, int>>>> acceptance;

    for (const auto& r : log.records) {
        if (r.phase == 2) {
            auto& acc = acceptance[r.week][r.group][r.pid];
            acc.first += r.accepted ? 1.0 : 0.0;
            ++acc.second;
        }
        if (!r.reward || r.week != last) continue;
        std::map<std::uint64_t, std::pair<double, int>>* target = nullptr;
        if (r.phase == 2 && r.group == Group::Pcar) target = &pcar;
        if (r.phase == 2 && r.group == Group::Random) target = &random;
        if (r.phase == 1 && r.group == Group::Control) target = &control;
        if (!target) continue;
        auto& acc = (*target)[r.pid];
        acc.first += *r.reward;
        ++acc.second;
    }

    auto means = [](const std::map<std::uint64_t, std::pair<double, int>>& m) {
        std::vector<double> v;
        for (const auto& [_, acc] : m) v.push_back(acc.first / acc.second);
        return v;
    };
    auto group_mean = [&](int week, Group g) {
        const auto wit = acceptance.find(week);
        if (wit == acceptance.end()) return std::nan("");
        const auto git = wit->second.find(g);
        if (git == wit->second.end() || git->second.empty()) return std::nan("");
        double s = 0.0;
        for (const auto& [_, acc] : git->second) s += acc.first / acc.second;
        return s / static_cast<double>(git->second.size());
    };

    StudyOutcome out;
    out.pcar_final_reward = means(pcar);
    out.random_final_reward = means(random);
    out.control_final_reward = means(control);
    out.pcar_acceptance_change = group_mean(last, Group::Pcar) - group_mean(1, Group::Pcar);
    out.random_acceptance_change = group_mean(last, Group::Random) - group_mean(1, Group::Random);
    return out;
}

}  // namespace pcar::study
