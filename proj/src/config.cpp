#include "pcar/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "pcar/error.hpp"

namespace pcar::study {

namespace {

using nlohmann::json;

[[noreturn]] void config_error(const std::string& message) { throw Error(ErrorKind::Config, message); }

// Reads keys from one JSON object and rejects any it was not asked about.
class Section {
public:
    Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) config_error("'" + path_ + "' must be an object");
    }
    ~Section() noexcept(false) {
        if (std::uncaught_exceptions()) return;
        for (const auto& [key, _] : j_.items())
            if (!seen_.count(key)) config_error("unknown key '" + qualified(key) + "'");
    }

    template <class T>
    void get(const std::string& key, T& out) {
        seen_.insert(key);
        if (!j_.contains(key)) return;
        try {
            out = j_.at(key).get<T>();
        } catch (const json::exception&) {
            config_error("'" + qualified(key) + "' has the wrong type");
        }
    }

    const json* child(const std::string& key) {
        seen_.insert(key);
        return j_.contains(key) ? &j_.at(key) : nullptr;
    }

    std::string qualified(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

int parse_clock(const std::string& s, const std::string& key) {
    int h = 0, m = 0;
    char extra = 0;
    if (std::sscanf(s.c_str(), "%d:%d%c", &h, &m, &extra) != 2 || h < 0 || h > 24 || m < 0 || m > 59)
        config_error("'" + key + "' must be HH:MM");
    return h * 60 + m;
}

std::string format_minutes(int minutes) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%02d:%02d", minutes / 60, minutes % 60);
    return buf;
}

void read_curve(Section& s, const std::string& key, cohort::HourlyCurve& out) {
    std::vector<double> v(out.begin(), out.end());
    s.get(key, v);
    if (v.size() != out.size()) config_error("'" + s.qualified(key) + "' must have 14 entries (hours 8..21)");
    std::copy(v.begin(), v.end(), out.begin());
}

}  // namespace

void StudyConfig::validate() const {
    auto close = [](double a, double b) { return std::abs(a - b) < 1e-9; };
    if (n_participants < 1) config_error("n_participants must be >= 1");
    if (phase1.control < 0 || phase1.random < 0 || !close(phase1.control + phase1.random, 1.0))
        config_error("phase1 fractions must be non-negative and sum to 1");
    if (phase2.random < 0 || phase2.pcar < 0 || !close(phase2.random + phase2.pcar, 1.0))
        config_error("phase2 fractions must be non-negative and sum to 1");
    if (weeks_per_phase < 1) config_error("weeks_per_phase must be >= 1");
    if (scheduler.threshold <= 0.0 || scheduler.threshold >= 1.0) config_error("scheduler.threshold must be in (0, 1)");
    if (scheduler.budget_penalty < 0.0) config_error("scheduler.budget_penalty must be >= 0");
    if (scheduler.step <= 0.0) config_error("scheduler.step must be > 0");
    if (scheduler.epochs < 0) config_error("scheduler.epochs must be >= 0");
    if (scheduler.random_trigger_prob < 0.0 || scheduler.random_trigger_prob > 1.0)
        config_error("scheduler.random_trigger_prob must be in [0, 1]");
    if (scheduler.min_history < 1) config_error("scheduler.min_history must be >= 1");
    try {
        budget.validate();
        agent.validate();
        cohort.validate();
    } catch (const Error& e) {
        config_error(e.what());
    }
    if (agent.trait_buckets != cohort.trait_buckets) config_error("agent and cohort trait buckets disagree");
    if (catalog_path.empty()) config_error("catalog path is required");
    if (!std::filesystem::exists(catalog_path)) config_error("catalog '" + catalog_path.string() + "' does not exist");
}

StudyConfig parse_config(const json& j, const std::filesystem::path& base_dir) {
    StudyConfig cfg;
    {
        Section root(j, "");
        int version = 0;
        root.get("schema_version", version);
        if (version != kConfigSchemaVersion)
            config_error("schema_version must be " + std::to_string(kConfigSchemaVersion));
        root.get("seed", cfg.seed);
        root.get("n_participants", cfg.n_participants);
        root.get("weeks_per_phase", cfg.weeks_per_phase);
        root.get("advance_on_decline", cfg.advance_on_decline);
        root.get("pcar_warm_start", cfg.pcar_warm_start);
        root.get("control_post_ema", cfg.control_post_ema);
        root.get("catalog", cfg.catalog);
        root.get("output_dir", cfg.output_dir);

        if (const json* p = root.child("phase1")) {
            Section s(*p, "phase1");
            s.get("control", cfg.phase1.control);
            s.get("random", cfg.phase1.random);
        }
        if (const json* p = root.child("phase2")) {
            Section s(*p, "phase2");
            s.get("random", cfg.phase2.random);
            s.get("pcar", cfg.phase2.pcar);
        }
        if (const json* p = root.child("budget")) {
            Section s(*p, "budget");
            s.get("max_per_day", cfg.budget.max_per_day);
            s.get("min_gap_minutes", cfg.budget.min_gap_minutes);
            s.get("weekdays_only", cfg.budget.weekdays_only);
            std::string start = format_minutes(cfg.budget.window_start_minute);
            std::string end = format_minutes(cfg.budget.window_end_minute);
            s.get("window_start", start);
            s.get("window_end", end);
            cfg.budget.window_start_minute = parse_clock(start, "budget.window_start");
            cfg.budget.window_end_minute = parse_clock(end, "budget.window_end");
        }
        if (const json* p = root.child("scheduler")) {
            Section s(*p, "scheduler");
            std::string mode = "model";
            s.get("mode", mode);
            if (mode == "model")
                cfg.scheduler.mode = TriggerMode::Model;
            else if (mode == "random")
                cfg.scheduler.mode = TriggerMode::Random;
            else
                config_error("scheduler.mode must be 'model' or 'random'");
            s.get("threshold", cfg.scheduler.threshold);
            s.get("budget_penalty", cfg.scheduler.budget_penalty);
            s.get("step", cfg.scheduler.step);
            s.get("epochs", cfg.scheduler.epochs);
            s.get("random_trigger_prob", cfg.scheduler.random_trigger_prob);
            s.get("min_history", cfg.scheduler.min_history);
            s.get("pooled", cfg.scheduler.pooled);
        }
        if (const json* p = root.child("agent")) {
            Section s(*p, "agent");
            s.get("alpha", cfg.agent.alpha);
            s.get("gamma", cfg.agent.gamma);
            s.get("lambda", cfg.agent.lambda);
            s.get("epsilon_start", cfg.agent.epsilon_start);
            s.get("epsilon_end", cfg.agent.epsilon_end);
            s.get("epsilon_rounds", cfg.agent.epsilon_rounds);
            s.get("tau_max", cfg.agent.tau_max);
            s.get("ghost_rollout_depth", cfg.agent.ghost_rollout_depth);
        }
        if (const json* p = root.child("cohort")) {
            Section s(*p, "cohort");
            auto& c = cfg.cohort;
            s.get("intervention_acceptance", c.intervention_acceptance);
            s.get("control_acceptance", c.control_acceptance);
            read_curve(s, "receptivity_shape", c.receptivity_shape);
            s.get("receptivity_shift_sd", c.receptivity_shift_sd);
            s.get("baseline_mean", c.baseline_mean);
            s.get("baseline_sd", c.baseline_sd);
            read_curve(s, "stress_offsets", c.stress_offsets);
            s.get("stress_sigma", c.stress_sigma);
            s.get("noise_sigma", c.noise_sigma);
            s.get("fatigue_decay", c.fatigue_decay);
            s.get("recovery_rounds", c.recovery_rounds);
            s.get("effect_means", c.effect_means);
            s.get("effect_value_sd", c.effect_value_sd);
            s.get("effect_period_sd", c.effect_period_sd);
            s.get("completion_prob", c.completion_prob);
            s.get("control_drift", c.control_drift);
            s.get("trait_buckets", c.trait_buckets);
            if (const json* e = s.child("engagement")) {
                Section es(*e, "cohort.engagement");
                es.get("sensitivity", c.engagement.sensitivity);
                es.get("reference", c.engagement.reference);
                es.get("floor", c.engagement.floor);
                es.get("ceiling", c.engagement.ceiling);
            }
        }
    }
    cfg.agent.trait_buckets = cfg.cohort.trait_buckets;
    if (!cfg.catalog.empty()) {
        std::filesystem::path p(cfg.catalog);
        cfg.catalog_path = p.is_absolute() ? p : base_dir / p;
    }
    cfg.validate();
    return cfg;
}

json load_config_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, "cannot open config '" + path.string() + "'");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw Error(ErrorKind::Parse, "config '" + path.string() + "': " + e.what());
    }
}

StudyConfig load_config(const std::filesystem::path& path) {
    return parse_config(load_config_json(path), path.parent_path());
}

json config_to_json(const StudyConfig& cfg) {
    const auto& c = cfg.cohort;
    return {
        {"schema_version", kConfigSchemaVersion},
        {"seed", cfg.seed},
        {"n_participants", cfg.n_participants},
        {"phase1", {{"control", cfg.phase1.control}, {"random", cfg.phase1.random}}},
        {"phase2", {{"random", cfg.phase2.random}, {"pcar", cfg.phase2.pcar}}},
        {"weeks_per_phase", cfg.weeks_per_phase},
        {"budget",
         {{"max_per_day", cfg.budget.max_per_day},
          {"min_gap_minutes", cfg.budget.min_gap_minutes},
          {"window_start", format_minutes(cfg.budget.window_start_minute)},
          {"window_end", format_minutes(cfg.budget.window_end_minute)},
          {"weekdays_only", cfg.budget.weekdays_only}}},
        {"scheduler",
         {{"mode", cfg.scheduler.mode == TriggerMode::Model ? "model" : "random"},
          {"threshold", cfg.scheduler.threshold},
          {"budget_penalty", cfg.scheduler.budget_penalty},
          {"step", cfg.scheduler.step},
          {"epochs", cfg.scheduler.epochs},
          {"random_trigger_prob", cfg.scheduler.random_trigger_prob},
          {"min_history", cfg.scheduler.min_history},
          {"pooled", cfg.scheduler.pooled}}},
        {"agent",
         {{"alpha", cfg.agent.alpha},
          {"gamma", cfg.agent.gamma},
          {"lambda", cfg.agent.lambda},
          {"epsilon_start", cfg.agent.epsilon_start},
          {"epsilon_end", cfg.agent.epsilon_end},
          {"epsilon_rounds", cfg.agent.epsilon_rounds},
          {"tau_max", cfg.agent.tau_max},
          {"ghost_rollout_depth", cfg.agent.ghost_rollout_depth}}},
        {"advance_on_decline", cfg.advance_on_decline},
        {"pcar_warm_start", cfg.pcar_warm_start},
        {"control_post_ema", cfg.control_post_ema},
        {"cohort",
         {{"intervention_acceptance", c.intervention_acceptance},
          {"control_acceptance", c.control_acceptance},
          {"receptivity_shape", c.receptivity_shape},
          {"receptivity_shift_sd", c.receptivity_shift_sd},
          {"baseline_mean", c.baseline_mean},
          {"baseline_sd", c.baseline_sd},
          {"stress_offsets", c.stress_offsets},
          {"stress_sigma", c.stress_sigma},
          {"noise_sigma", c.noise_sigma},
          {"fatigue_decay", c.fatigue_decay},
          {"recovery_rounds", c.recovery_rounds},
          {"effect_means", c.effect_means},
          {"effect_value_sd", c.effect_value_sd},
          {"effect_period_sd", c.effect_period_sd},
          {"completion_prob", c.completion_prob},
          {"control_drift", c.control_drift},
          {"trait_buckets", c.trait_buckets},
          {"engagement",
           {{"sensitivity", c.engagement.sensitivity},
            {"reference", c.engagement.reference},
            {"floor", c.engagement.floor},
            {"ceiling", c.engagement.ceiling}}}}},
        {"catalog", cfg.catalog},
        {"output_dir", cfg.output_dir},
    };
}

std::uint64_t fnv1a64(std::string_view data, std::uint64_t basis) {
    std::uint64_t h = basis;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::uint64_t config_hash(const StudyConfig& cfg) {
    json j = config_to_json(cfg);
    j.erase("output_dir");  // where results go does not change them
    return fnv1a64(j.dump());
}

void set_parameter(json& config, const std::string& dotted_path, const json& value) {
    if (dotted_path.empty()) config_error("empty parameter path");
    json* node = &config;
    std::size_t start = 0;
    while (true) {
        const auto dot = dotted_path.find('.', start);
        const std::string key = dotted_path.substr(start, dot - start);
        if (!node->is_object()) config_error("unknown parameter '" + dotted_path + "'");
        if (!node->contains(key)) {
            // Keys the file omits still exist with their defaults.
            const json defaults = config_to_json(StudyConfig{});
            const json* d = &defaults;
            std::size_t s = 0;
            bool known = true;
            while (true) {
                const auto dd = dotted_path.find('.', s);
                const std::string k = dotted_path.substr(s, dd - s);
                if (!d->is_object() || !d->contains(k)) {
                    known = false;
                    break;
                }
                d = &d->at(k);
                if (dd == std::string::npos) break;
                s = dd + 1;
            }
            if (!known) config_error("unknown parameter '" + dotted_path + "'");
            if (dot == std::string::npos) {
                (*node)[key] = value;
                return;
            }
            (*node)[key] = json::object();
        }
        node = &(*node)[key];
        if (dot == std::string::npos) break;
        start = dot + 1;
    }
    *node = value;
}

}  // namespace pcar::study
