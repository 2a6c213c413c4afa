#pragma once

// PCAR learner: tabular SARSA(lambda) over (attribute value, switch clock of
// that value, context bucket), factorized into one independent agent per
// action attribute (the TensorAgent decomposition).
//
// Ghost-state replication is a property of the keying: a table entry never
// depends on the clocks of other values, so a single write updates the action
// value of every global state that shares the reward key.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "pcar/lsd.hpp"
#include "pcar/rng.hpp"

namespace pcar::agent {

enum class Period { Morning, Afternoon, Evening };

inline constexpr std::size_t kPeriods = 3;
inline constexpr int kFirstHour = 8;
inline constexpr int kLastHour = 21;

/// 8-11 morning, 12-16 afternoon, 17-21 evening. Other hours throw.
Period period_from_hour(int hour);
std::string_view to_string(Period p);

struct ContextBucket {
    Period period = Period::Morning;
    int trait_bucket = 0;

    friend bool operator==(const ContextBucket&, const ContextBucket&) = default;
};

struct Attribute {
    std::string name;
    std::vector<std::string> values;
};

class AttributeSchema {
public:
    AttributeSchema() = default;
    explicit AttributeSchema(std::vector<Attribute> attributes);

    /// emotional_regulation x therapy_group x location with the default value lists.
    static AttributeSchema defaults();

    std::size_t size() const noexcept { return attributes_.size(); }
    const Attribute& operator[](std::size_t i) const { return attributes_.at(i); }
    std::span<const Attribute> attributes() const noexcept { return attributes_; }
    std::size_t max_values() const noexcept;

    std::optional<std::size_t> find_attribute(std::string_view name) const;
    std::optional<std::size_t> find_value(std::size_t attribute, std::string_view value) const;

    friend bool operator==(const AttributeSchema& a, const AttributeSchema& b);

private:
    std::vector<Attribute> attributes_;
};

/// One value index per attribute, in schema order.
struct AttributeVector {
    std::vector<std::size_t> values;

    friend bool operator==(const AttributeVector&, const AttributeVector&) = default;
};

void validate(const AttributeSchema& schema, const AttributeVector& action);
std::string describe(const AttributeSchema& schema, const AttributeVector& action);

struct AgentParams {
    double alpha = 0.1;
    double gamma = 0.9;
    double lambda = 0.6;
    double epsilon_start = 0.2;
    double epsilon_end = 0.02;
    /// Rounds over which epsilon moves linearly from start to end.
    std::uint64_t epsilon_rounds = 30;
    int tau_max = 6;
    int trait_buckets = 2;
    /// Reserved for trajectory-level ghost propagation. Only 0 (off) is accepted.
    int ghost_rollout_depth = 0;

    void validate() const;
    std::size_t buckets() const noexcept { return kPeriods * static_cast<std::size_t>(trait_buckets); }
};

/// Action values and replacing eligibility traces for one agent, laid out as
/// [value][tau slot][bucket].
class QModel {
public:
    QModel() = default;
    QModel(std::size_t values, int tau_max, std::size_t buckets);

    double q(std::size_t value, int tau, std::size_t bucket) const { return q_[index(value, tau, bucket)]; }
    double trace(std::size_t value, int tau, std::size_t bucket) const { return e_[index(value, tau, bucket)]; }
    void set_q(std::size_t value, int tau, std::size_t bucket, double v) { q_[index(value, tau, bucket)] = v; }

    /// Replacing-trace TD step: E[key] = 1, Q += step * E, E *= decay.
    void td_step(std::size_t value, int tau, std::size_t bucket, double step, double decay);
    void reset_traces();
    void scale_q(double factor);

    std::size_t values() const noexcept { return values_; }
    int tau_max() const noexcept { return tau_max_; }
    std::size_t buckets() const noexcept { return buckets_; }
    std::span<const double> q_table() const noexcept { return q_; }
    std::span<const double> trace_table() const noexcept { return e_; }

    friend bool operator==(const QModel&, const QModel&) = default;

private:
    std::size_t index(std::size_t value, int tau, std::size_t bucket) const;

    std::size_t values_ = 0;
    int tau_max_ = 1;
    std::size_t buckets_ = 0;
    std::vector<double> q_;
    std::vector<double> e_;
};

/// Next step of a SARSA transition. Absent for a terminal step (end of episode).
struct Successor {
    ContextBucket ctx;
    AttributeVector action;
};

struct Transition {
    ContextBucket ctx;
    AttributeVector action;
    double reward = 0.0;
    std::optional<Successor> next;
};

/// Production action-value lookup: Q[value][tau of that value][bucket].
double keyed_lookup(const QModel& model, const lsd::LsdState& state, std::size_t value, std::size_t bucket);

using QLookup =
    std::function<double(const QModel&, const lsd::LsdState&, std::size_t value, std::size_t bucket)>;

class AgentBundle {
public:
    AgentBundle(AttributeSchema schema, AgentParams params, std::uint64_t seed);

    /// epsilon-greedy per agent on the current clocks; ties go to the lowest index.
    AttributeVector select_action(const ContextBucket& ctx);

    /// Same as select_action but evaluated on the clocks that will hold once
    /// `current` has been played. Used to pick a' before update(s, a, r, s', a').
    AttributeVector select_next(const ContextBucket& ctx, const AttributeVector& current);

    /// One SARSA(lambda) update per agent, then every agent's clock advances
    /// on its chosen value. Throws on a non-finite reward or invalid actions.
    void update(const Transition& t);

    /// Advances clocks without learning (e.g. an opportunity that is counted
    /// as a round but produced no reward).
    void advance_clocks(const AttributeVector& action);

    /// Adopts externally tracked clocks (one per agent, matching value counts
    /// and tau_max), e.g. when a learner takes over mid-study.
    void set_clocks(std::vector<lsd::LsdState> states);

    void end_episode();   // clears eligibility traces
    void reset_clocks();  // every value back to +tau_max

    double epsilon() const noexcept;
    std::size_t bucket_index(const ContextBucket& ctx) const;
    double action_value(std::size_t agent, std::size_t value, const ContextBucket& ctx) const;

    const AttributeSchema& schema() const noexcept { return schema_; }
    const AgentParams& params() const noexcept { return params_; }
    std::uint64_t round() const noexcept { return round_; }
    std::span<const lsd::LsdState> states() const noexcept { return states_; }
    std::span<const QModel> models() const noexcept { return models_; }
    QModel& model(std::size_t agent) { return models_.at(agent); }

    /// Documented snapshot: agents -> attribute -> value -> tau -> bucket -> Q.
    nlohmann::json to_json() const;
    static AgentBundle from_json(const nlohmann::json& j);

    friend bool operator==(const AgentBundle& a, const AgentBundle& b);

private:
    AttributeVector select_on(std::span<const lsd::LsdState> states, const ContextBucket& ctx);

    AttributeSchema schema_;
    AgentParams params_;
    std::vector<lsd::LsdState> states_;
    std::vector<QModel> models_;
    std::uint64_t round_ = 0;
    Engine rng_;
};

std::vector<std::string> bucket_names(const AgentParams& params);

struct GhostCounterexample {
    std::size_t agent = 0;
    std::size_t value = 0;
    int tau = 0;
    std::size_t bucket = 0;
    std::vector<int> state_a;
    std::vector<int> state_b;
    double q_a = 0.0;
    double q_b = 0.0;
};

struct GhostAuditReport {
    bool passed = true;
    std::size_t checks = 0;
    std::vector<GhostCounterexample> counterexamples;
};

/// Checks that action-value lookup is a function of (value, tau of that value,
/// bucket) only, by comparing lookups across randomly built global states that
/// agree on the key.
GhostAuditReport ghost_audit(const AgentBundle& bundle, const QLookup& lookup = keyed_lookup,
                             std::uint64_t seed = 0, std::size_t states_per_key = 4);

// Baseline policies.

struct NoAction {
    friend bool operator==(NoAction, NoAction) = default;
};

using PolicyChoice = std::variant<NoAction, AttributeVector>;

AttributeVector random_policy(const AttributeSchema& schema, Engine& rng);
NoAction control_policy() noexcept;

// Brute-force planning oracle for small LSD instances.

using ArmReward = std::function<double(lsd::ArmId, int tau)>;

struct PlanResult {
    std::vector<lsd::ArmId> sequence;
    double total = 0.0;
};

inline constexpr std::uint64_t kPlanGuard = 10'000'000;

/// Enumerates every arm sequence of length `horizon` from the all-rested
/// state. Returns the lexicographically smallest optimal sequence. Refuses
/// with GuardExceeded when arms^horizon > guard.
PlanResult plan_oracle(const ArmReward& reward, std::size_t arms, int tau_max, std::size_t horizon,
                       std::uint64_t guard = kPlanGuard);

/// Total reward of a fixed arm sequence from the all-rested state.
double sequence_reward(const ArmReward& reward, std::span<const lsd::ArmId> sequence, std::size_t arms,
                       int tau_max);

}  // namespace pcar::agent
