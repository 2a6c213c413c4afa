#include "pcar/agent.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "pcar/error.hpp"

namespace pcar::agent {

Period period_from_hour(int hour) {
    if (hour >= 8 && hour <= 11) return Period::Morning;
    if (hour >= 12 && hour <= 16) return Period::Afternoon;
    if (hour >= 17 && hour <= 21) return Period::Evening;
    throw Error(ErrorKind::InvalidParameter, "hour " + std::to_string(hour) + " outside the 8-21 window");
}

std::string_view to_string(Period p) {
    switch (p) {
        case Period::Morning: return "morning";
        case Period::Afternoon: return "afternoon";
        case Period::Evening: return "evening";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// Schema

AttributeSchema::AttributeSchema(std::vector<Attribute> attributes) : attributes_(std::move(attributes)) {
    if (attributes_.empty()) throw Error(ErrorKind::InvalidParameter, "schema needs at least one attribute");
    std::set<std::string> names;
    for (const auto& a : attributes_) {
        if (a.values.empty())
            throw Error(ErrorKind::InvalidParameter, "attribute '" + a.name + "' has no values");
        if (!names.insert(a.name).second)
            throw Error(ErrorKind::InvalidParameter, "duplicate attribute '" + a.name + "'");
        std::set<std::string> seen;
        for (const auto& v : a.values)
            if (!seen.insert(v).second)
                throw Error(ErrorKind::InvalidParameter, "duplicate value '" + v + "' in '" + a.name + "'");
    }
}

AttributeSchema AttributeSchema::defaults() {
    return AttributeSchema({
        {"emotional_regulation",
         {"response_modulation", "attention_deployment", "cognitive_change", "situation_modification"}},
        {"therapy_group", {"positive_psychology", "cognitive_behavioral", "meta_cognitive", "somatic"}},
        {"location", {"indoor", "outdoor", "both"}},
    });
}

std::size_t AttributeSchema::max_values() const noexcept {
    std::size_t m = 0;
    for (const auto& a : attributes_) m = std::max(m, a.values.size());
    return m;
}

std::optional<std::size_t> AttributeSchema::find_attribute(std::string_view name) const {
    for (std::size_t i = 0; i < attributes_.size(); ++i)
        if (attributes_[i].name == name) return i;
    return std::nullopt;
}

std::optional<std::size_t> AttributeSchema::find_value(std::size_t attribute, std::string_view value) const {
    const auto& vals = attributes_.at(attribute).values;
    for (std::size_t i = 0; i < vals.size(); ++i)
        if (vals[i] == value) return i;
    return std::nullopt;
}

bool operator==(const AttributeSchema& a, const AttributeSchema& b) {
    if (a.attributes_.size() != b.attributes_.size()) return false;
    for (std::size_t i = 0; i < a.attributes_.size(); ++i)
        if (a.attributes_[i].name != b.attributes_[i].name || a.attributes_[i].values != b.attributes_[i].values)
            return false;
    return true;
}

void validate(const AttributeSchema& schema, const AttributeVector& action) {
    if (action.values.size() != schema.size())
        throw Error(ErrorKind::InvalidParameter, "action has " + std::to_string(action.values.size()) +
                                                     " values, schema has " + std::to_string(schema.size()));
    for (std::size_t p = 0; p < schema.size(); ++p)
        if (action.values[p] >= schema[p].values.size())
            throw Error(ErrorKind::InvalidArm, "value index " + std::to_string(action.values[p]) +
                                                   " out of range for '" + schema[p].name + "'");
}

std::string describe(const AttributeSchema& schema, const AttributeVector& action) {
    std::string out;
    for (std::size_t p = 0; p < action.values.size(); ++p) {
        if (p) out += '|';
        out += schema[p].values.at(action.values[p]);
    }
    return out;
}

void AgentParams::validate() const {
    auto fail = [](const std::string& m) { throw Error(ErrorKind::InvalidParameter, m); };
    if (!(alpha > 0.0 && alpha <= 1.0)) fail("alpha must be in (0, 1]");
    if (!(gamma >= 0.0 && gamma <= 1.0)) fail("gamma must be in [0, 1]");
    if (!(lambda >= 0.0 && lambda <= 1.0)) fail("lambda must be in [0, 1]");
    if (!(epsilon_start >= 0.0 && epsilon_start <= 1.0)) fail("epsilon_start must be in [0, 1]");
    if (!(epsilon_end >= 0.0 && epsilon_end <= 1.0)) fail("epsilon_end must be in [0, 1]");
    if (tau_max < 1) fail("tau_max must be >= 1");
    if (trait_buckets < 1) fail("trait_buckets must be >= 1");
    if (ghost_rollout_depth != 0) fail("ghost_rollout_depth is reserved; only 0 is supported");
}

// ---------------------------------------------------------------------------
// QModel

QModel::QModel(std::size_t values, int tau_max, std::size_t buckets)
    : values_(values),
      tau_max_(tau_max),
      buckets_(buckets),
      q_(values * lsd::tau_slots(tau_max) * buckets, 0.0),
      e_(q_.size(), 0.0) {}

std::size_t QModel::index(std::size_t value, int tau, std::size_t bucket) const {
    if (value >= values_ || bucket >= buckets_ || tau == 0 || tau > tau_max_ || tau < -tau_max_)
        throw Error(ErrorKind::InvalidParameter, "Q key out of range");
    return (value * lsd::tau_slots(tau_max_) + lsd::tau_index(tau, tau_max_)) * buckets_ + bucket;
}

void QModel::td_step(std::size_t value, int tau, std::size_t bucket, double step, double decay) {
    e_[index(value, tau, bucket)] = 1.0;
    for (std::size_t i = 0; i < q_.size(); ++i) {
        if (e_[i] == 0.0) continue;
        q_[i] += step * e_[i];
        e_[i] *= decay;
    }
}

void QModel::reset_traces() { std::fill(e_.begin(), e_.end(), 0.0); }

void QModel::scale_q(double factor) {
    for (double& v : q_) v *= factor;
}

double keyed_lookup(const QModel& model, const lsd::LsdState& state, std::size_t value, std::size_t bucket) {
    const auto key = state.reward_key(lsd::ArmId{value});
    return model.q(key.arm.index, key.tau, bucket);
}

// ---------------------------------------------------------------------------
// AgentBundle

AgentBundle::AgentBundle(AttributeSchema schema, AgentParams params, std::uint64_t seed)
    : schema_(std::move(schema)), params_(params), rng_(seed) {
    params_.validate();
    if (schema_.size() == 0) throw Error(ErrorKind::InvalidParameter, "empty schema");
    for (const auto& attr : schema_.attributes()) {
        states_.push_back(lsd::LsdState::initial(attr.values.size(), params_.tau_max));
        models_.emplace_back(attr.values.size(), params_.tau_max, params_.buckets());
    }
}

double AgentBundle::epsilon() const noexcept {
    if (params_.epsilon_rounds == 0) return params_.epsilon_end;
    const double frac =
        std::min(1.0, static_cast<double>(round_) / static_cast<double>(params_.epsilon_rounds));
    return params_.epsilon_start + (params_.epsilon_end - params_.epsilon_start) * frac;
}

std::size_t AgentBundle::bucket_index(const ContextBucket& ctx) const {
    if (ctx.trait_bucket < 0 || ctx.trait_bucket >= params_.trait_buckets)
        throw Error(ErrorKind::InvalidParameter, "trait bucket " + std::to_string(ctx.trait_bucket) +
                                                     " out of range");
    return static_cast<std::size_t>(ctx.period) * static_cast<std::size_t>(params_.trait_buckets) +
           static_cast<std::size_t>(ctx.trait_bucket);
}

double AgentBundle::action_value(std::size_t agent, std::size_t value, const ContextBucket& ctx) const {
    return keyed_lookup(models_.at(agent), states_.at(agent), value, bucket_index(ctx));
}

AttributeVector AgentBundle::select_on(std::span<const lsd::LsdState> states, const ContextBucket& ctx) {
    const std::size_t bucket = bucket_index(ctx);
    const double eps = epsilon();
    AttributeVector out;
    out.values.reserve(schema_.size());
    for (std::size_t p = 0; p < schema_.size(); ++p) {
        const std::size_t n = schema_[p].values.size();
        if (uniform01(rng_) < eps) {
            out.values.push_back(uniform_index(rng_, n));
            continue;
        }
        std::size_t best = 0;
        double best_q = keyed_lookup(models_[p], states[p], 0, bucket);
        for (std::size_t v = 1; v < n; ++v) {
            const double q = keyed_lookup(models_[p], states[p], v, bucket);
            if (q > best_q) {
                best_q = q;
                best = v;
            }
        }
        out.values.push_back(best);
    }
    return out;
}

AttributeVector AgentBundle::select_action(const ContextBucket& ctx) { return select_on(states_, ctx); }

AttributeVector AgentBundle::select_next(const ContextBucket& ctx, const AttributeVector& current) {
    validate(schema_, current);
    std::vector<lsd::LsdState> next;
    next.reserve(states_.size());
    for (std::size_t p = 0; p < states_.size(); ++p) next.push_back(states_[p].advance({current.values[p]}));
    return select_on(next, ctx);
}

void AgentBundle::update(const Transition& t) {
    if (!std::isfinite(t.reward)) throw Error(ErrorKind::InvalidParameter, "non-finite reward rejected");
    validate(schema_, t.action);
    const std::size_t bucket = bucket_index(t.ctx);
    std::optional<std::size_t> next_bucket;
    if (t.next) {
        validate(schema_, t.next->action);
        next_bucket = bucket_index(t.next->ctx);
    }
    const double decay = params_.gamma * params_.lambda;
    for (std::size_t p = 0; p < schema_.size(); ++p) {
        const std::size_t value = t.action.values[p];
        const int tau = states_[p].tau({value});
        lsd::LsdState after = states_[p].advance({value});

        double target = t.reward;
        if (t.next) target += params_.gamma * keyed_lookup(models_[p], after, t.next->action.values[p], *next_bucket);
        const double delta = target - models_[p].q(value, tau, bucket);

        models_[p].td_step(value, tau, bucket, params_.alpha * delta, decay);
        states_[p] = std::move(after);
    }
    ++round_;
}

void AgentBundle::set_clocks(std::vector<lsd::LsdState> states) {
    if (states.size() != schema_.size()) throw Error(ErrorKind::InvalidParameter, "one clock state per agent required");
    for (std::size_t p = 0; p < states.size(); ++p)
        if (states[p].arms() != schema_[p].values.size() || states[p].tau_max() != params_.tau_max)
            throw Error(ErrorKind::InvalidParameter, "clock state does not match agent " + std::to_string(p));
    states_ = std::move(states);
}

void AgentBundle::advance_clocks(const AttributeVector& action) {
    validate(schema_, action);
    for (std::size_t p = 0; p < states_.size(); ++p) states_[p] = states_[p].advance({action.values[p]});
}

void AgentBundle::end_episode() {
    for (auto& m : models_) m.reset_traces();
}

void AgentBundle::reset_clocks() {
    for (std::size_t p = 0; p < states_.size(); ++p)
        states_[p] = lsd::LsdState::initial(schema_[p].values.size(), params_.tau_max);
}

bool operator==(const AgentBundle& a, const AgentBundle& b) {
    return a.schema_ == b.schema_ && a.states_ == b.states_ && a.models_ == b.models_ && a.round_ == b.round_ &&
           a.rng_ == b.rng_;
}

std::vector<std::string> bucket_names(const AgentParams& params) {
    std::vector<std::string> names;
    for (std::size_t p = 0; p < kPeriods; ++p)
        for (int t = 0; t < params.trait_buckets; ++t)
            names.push_back(std::string(to_string(static_cast<Period>(p))) + ":" + std::to_string(t));
    return names;
}

// ---------------------------------------------------------------------------
// Snapshot

nlohmann::json AgentBundle::to_json() const {
    using nlohmann::json;
    json j;
    j["schema_version"] = 1;
    j["params"] = {{"alpha", params_.alpha},
                   {"gamma", params_.gamma},
                   {"lambda", params_.lambda},
                   {"epsilon_start", params_.epsilon_start},
                   {"epsilon_end", params_.epsilon_end},
                   {"epsilon_rounds", params_.epsilon_rounds},
                   {"tau_max", params_.tau_max},
                   {"trait_buckets", params_.trait_buckets},
                   {"ghost_rollout_depth", params_.ghost_rollout_depth}};
    j["round"] = round_;
    std::ostringstream rng_state;
    rng_state << rng_;
    j["rng_state"] = rng_state.str();

    json schema = json::array();
    for (const auto& a : schema_.attributes()) schema.push_back({{"name", a.name}, {"values", a.values}});
    j["schema"] = schema;

    const auto buckets = bucket_names(params_);
    json agents = json::object();
    for (std::size_t p = 0; p < schema_.size(); ++p) {
        const auto& attr = schema_[p];
        json values = json::object();
        for (std::size_t v = 0; v < attr.values.size(); ++v) {
            json taus = json::object();
            for (std::size_t s = 0; s < lsd::tau_slots(params_.tau_max); ++s) {
                const int tau = lsd::tau_from_index(s, params_.tau_max);
                json per_bucket = json::object();
                for (std::size_t b = 0; b < buckets.size(); ++b) per_bucket[buckets[b]] = models_[p].q(v, tau, b);
                taus[std::to_string(tau)] = per_bucket;
            }
            values[attr.values[v]] = taus;
        }
        agents[attr.name] = {{"clocks", std::vector<int>(states_[p].taus().begin(), states_[p].taus().end())},
                             {"q", values}};
    }
    j["agents"] = agents;
    return j;
}

AgentBundle AgentBundle::from_json(const nlohmann::json& j) {
    try {
        if (j.at("schema_version").get<int>() != 1)
            throw Error(ErrorKind::Parse, "unsupported Q snapshot schema_version");
        AgentParams params;
        const auto& jp = j.at("params");
        params.alpha = jp.at("alpha").get<double>();
        params.gamma = jp.at("gamma").get<double>();
        params.lambda = jp.at("lambda").get<double>();
        params.epsilon_start = jp.at("epsilon_start").get<double>();
        params.epsilon_end = jp.at("epsilon_end").get<double>();
        params.epsilon_rounds = jp.at("epsilon_rounds").get<std::uint64_t>();
        params.tau_max = jp.at("tau_max").get<int>();
        params.trait_buckets = jp.at("trait_buckets").get<int>();
        params.ghost_rollout_depth = jp.at("ghost_rollout_depth").get<int>();

        std::vector<Attribute> attrs;
        for (const auto& a : j.at("schema"))
            attrs.push_back({a.at("name").get<std::string>(), a.at("values").get<std::vector<std::string>>()});

        AgentBundle bundle(AttributeSchema(std::move(attrs)), params, 0);
        bundle.round_ = j.at("round").get<std::uint64_t>();
        std::istringstream rng_state(j.at("rng_state").get<std::string>());
        rng_state >> bundle.rng_;
        if (!rng_state) throw Error(ErrorKind::Parse, "malformed rng_state");

        const auto buckets = bucket_names(params);
        for (std::size_t p = 0; p < bundle.schema_.size(); ++p) {
            const auto& attr = bundle.schema_[p];
            const auto& ja = j.at("agents").at(attr.name);
            bundle.states_[p] = lsd::LsdState::from_taus(ja.at("clocks").get<std::vector<int>>(), params.tau_max);
            for (std::size_t v = 0; v < attr.values.size(); ++v) {
                const auto& jv = ja.at("q").at(attr.values[v]);
                for (std::size_t s = 0; s < lsd::tau_slots(params.tau_max); ++s) {
                    const int tau = lsd::tau_from_index(s, params.tau_max);
                    const auto& jt = jv.at(std::to_string(tau));
                    for (std::size_t b = 0; b < buckets.size(); ++b)
                        bundle.models_[p].set_q(v, tau, b, jt.at(buckets[b]).get<double>());
                }
            }
        }
        return bundle;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::Parse, std::string("Q snapshot: ") + e.what());
    }
}

// ---------------------------------------------------------------------------
// Ghost audit

namespace {

// A random valid global state whose clock at `arm` is `tau`. At most one
// clock is negative, as in any reachable state.
lsd::LsdState random_state_with(std::size_t arms, int tau_max, std::size_t arm, int tau, Engine& rng) {
    std::vector<int> taus(arms);
    const auto tm = static_cast<std::uint64_t>(tau_max);
    for (auto& t : taus) t = 1 + static_cast<int>(uniform_index(rng, tm));
    taus[arm] = tau;
    if (tau > 0 && arms > 1 && bernoulli(rng, 0.5)) {
        std::size_t other = uniform_index(rng, arms - 1);
        if (other >= arm) ++other;
        taus[other] = -(1 + static_cast<int>(uniform_index(rng, tm)));
    }
    return lsd::LsdState::from_taus(std::move(taus), tau_max);
}

}  // namespace

GhostAuditReport ghost_audit(const AgentBundle& bundle, const QLookup& lookup, std::uint64_t seed,
                             std::size_t states_per_key) {
    constexpr std::size_t kMaxCounterexamples = 10;
    GhostAuditReport report;
    Engine rng(seed);
    const int tau_max = bundle.params().tau_max;
    const auto& schema = bundle.schema();
    for (std::size_t p = 0; p < schema.size(); ++p) {
        const std::size_t arms = schema[p].values.size();
        const QModel& model = bundle.models()[p];
        for (std::size_t v = 0; v < arms; ++v) {
            for (std::size_t s = 0; s < lsd::tau_slots(tau_max); ++s) {
                const int tau = lsd::tau_from_index(s, tau_max);
                for (std::size_t b = 0; b < model.buckets(); ++b) {
                    const auto reference = random_state_with(arms, tau_max, v, tau, rng);
                    const double q_ref = lookup(model, reference, v, b);
                    for (std::size_t i = 0; i < states_per_key; ++i) {
                        const auto ghost = random_state_with(arms, tau_max, v, tau, rng);
                        const double q = lookup(model, ghost, v, b);
                        ++report.checks;
                        if (q == q_ref) continue;
                        report.passed = false;
                        if (report.counterexamples.size() < kMaxCounterexamples)
                            report.counterexamples.push_back(
                                {p, v, tau, b, std::vector<int>(reference.taus().begin(), reference.taus().end()),
                                 std::vector<int>(ghost.taus().begin(), ghost.taus().end()), q_ref, q});
                    }
                }
            }
        }
    }
    return report;
}

// ---------------------------------------------------------------------------
// Baselines

AttributeVector random_policy(const AttributeSchema& schema, Engine& rng) {
    AttributeVector out;
    out.values.reserve(schema.size());
    for (const auto& attr : schema.attributes()) out.values.push_back(uniform_index(rng, attr.values.size()));
    return out;
}

NoAction control_policy() noexcept { return {}; }

// ---------------------------------------------------------------------------
// Planning oracle

namespace {

struct Enumerator {
    const ArmReward& reward;
    std::size_t arms;
    std::size_t horizon;
    std::vector<lsd::ArmId> current;
    PlanResult best;
    bool have_best = false;

    void run(const lsd::LsdState& state, double total) {
        if (current.size() == horizon) {
            // Strictly better only; enumeration order is lexicographic, so the
            // first optimum found is the smallest.
            if (!have_best || total > best.total + 1e-12) {
                best = {current, total};
                have_best = true;
            }
            return;
        }
        for (std::size_t a = 0; a < arms; ++a) {
            const lsd::ArmId arm{a};
            const auto key = state.reward_key(arm);
            current.push_back(arm);
            run(state.advance(arm), total + reward(key.arm, key.tau));
            current.pop_back();
        }
    }
};

}  // namespace

PlanResult plan_oracle(const ArmReward& reward, std::size_t arms, int tau_max, std::size_t horizon,
                       std::uint64_t guard) {
    const auto start = lsd::LsdState::initial(arms, tau_max);
    std::uint64_t count = 1;
    for (std::size_t i = 0; i < horizon; ++i) {
        if (count > guard / arms) {
            throw Error(ErrorKind::GuardExceeded, "enumeration of " + std::to_string(arms) + "^" +
                                                      std::to_string(horizon) + " sequences exceeds the bound " +
                                                      std::to_string(guard));
        }
        count *= arms;
    }
    Enumerator e{reward, arms, horizon, {}, {}, false};
    e.current.reserve(horizon);
    e.run(start, 0.0);
    return e.best;
}

double sequence_reward(const ArmReward& reward, std::span<const lsd::ArmId> sequence, std::size_t arms,
                       int tau_max) {
    auto state = lsd::LsdState::initial(arms, tau_max);
    double total = 0.0;
    for (const auto arm : sequence) {
        const auto key = state.reward_key(arm);
        total += reward(key.arm, key.tau);
        state = state.advance(arm);
    }
    return total;
}

}  // namespace pcar::agent
