#pragma once

// Ground-truth simulated participants.
//
// Each participant has an hourly receptivity curve (probability of accepting
// a prompt), a momentary stress process on the 1-7 Likert scale, and an
// additive per-attribute effect table whose realized effect decays with the
// switch clock of each chosen attribute value:
//
//   f(tau) = min(1, tau / rho)   tau >= 1   (recovery after a switch-out)
//   f(tau) = mu^|tau|            tau <= -1  (fatigue under consecutive use)
//   effect = clamp(sum_p b_p[v_p][period] * f(tau_p), -3, 3)
//
// Acceptance is further scaled by an engagement factor that accumulates the
// benefit of completed interventions, so unhelpful or repetitive content
// erodes willingness to engage.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pcar/agent.hpp"
#include "pcar/rng.hpp"

namespace pcar::cohort {

inline constexpr int kHours = 14;  // 08..21
inline constexpr int kWindowStartMinute = 8 * 60;
inline constexpr int kWindowEndMinute = 21 * 60;
inline constexpr int kMinutesPerDay = 24 * 60;
inline constexpr int kLikertMin = 1;
inline constexpr int kLikertMax = 7;
inline constexpr double kMaxEffect = 3.0;

using HourlyCurve = std::array<double, kHours>;

/// Minutes since Monday 00:00 of the first simulated week.
struct SimTime {
    std::int64_t minutes = 0;

    static SimTime at(int day, int minute_of_day) {
        return {static_cast<std::int64_t>(day) * kMinutesPerDay + minute_of_day};
    }
    int day() const noexcept { return static_cast<int>(minutes / kMinutesPerDay); }
    int minute_of_day() const noexcept { return static_cast<int>(minutes % kMinutesPerDay); }
    int hour() const noexcept { return minute_of_day() / 60; }
    int weekday() const noexcept { return day() % 7; }  // 0 = Monday
    bool is_weekday() const noexcept { return weekday() < 5; }

    friend auto operator<=>(const SimTime&, const SimTime&) = default;
};

bool in_delivery_window(SimTime t) noexcept;
std::string format_clock(SimTime t);  // "HH:MM"

enum class PromptKind { Intervention, EmaOnly };

/// Engagement multiplies intervention receptivity. It starts at 1 and every
/// completed intervention moves it by sensitivity * (benefit - reference),
/// where benefit is the intervention's expected stress reduction, so content
/// that keeps helping builds engagement and unhelpful content erodes it.
struct EngagementParams {
    double sensitivity = 0.1;   // factor change per Likert point of benefit above the reference
    double reference = 0.3;     // benefit that leaves engagement unchanged
    double floor = 0.5;
    double ceiling = 1.5;
};

struct ParticipantModel {
    std::uint64_t pid = 0;
    double baseline_stress = 4.0;
    HourlyCurve hourly_stress_offsets{};
    HourlyCurve receptivity_curve{};          // intervention prompts
    HourlyCurve control_receptivity_curve{};  // EMA-only prompts
    double fatigue_decay = 0.6;               // mu
    int recovery_rounds = 3;                  // rho
    /// effects[attribute][value][period]
    std::vector<std::vector<std::array<double, agent::kPeriods>>> effects;
    double noise_sigma = 0.6;   // post-EMA noise
    double stress_sigma = 1.0;  // momentary stress spread
    double completion_prob = 0.916;
    double control_drift = 0.15;  // expected stress rise between control EMAs
    int trait_bucket = 0;
    std::uint64_t seed = 0;
    EngagementParams engagement;

    void validate() const;
    double receptivity(SimTime t, PromptKind kind) const;
};

struct CohortParams {
    double intervention_acceptance = 0.50;
    double control_acceptance = 0.77;
    /// Relative hourly receptivity, hours 8..21. Peaks at 16 and 19, dips at 8 and 18.
    HourlyCurve receptivity_shape{0.28, 0.42, 0.48, 0.50, 0.47, 0.45, 0.50,
                                  0.56, 0.74, 0.55, 0.36, 0.70, 0.52, 0.45};
    double receptivity_shift_sd = 0.06;
    double baseline_mean = 4.0;
    double baseline_sd = 0.6;
    HourlyCurve stress_offsets{0.3, 0.2, 0.0, 0.0, -0.1, -0.1, 0.0, 0.0, 0.1, 0.2, 0.3, 0.2, 0.1, 0.0};
    double stress_sigma = 1.0;
    double noise_sigma = 0.5;
    double fatigue_decay = 0.6;
    int recovery_rounds = 3;
    /// Mean base effect per attribute (schema order); missing entries use the last one.
    std::vector<double> effect_means{0.15, 0.15, 0.1};
    /// Spread of a value's effect across participants: which content helps is
    /// personal, and some content raises stress for some participants.
    double effect_value_sd = 1.2;
    double effect_period_sd = 0.1;
    double completion_prob = 0.916;
    double control_drift = 0.15;
    int trait_buckets = 2;
    EngagementParams engagement;

    void validate() const;
};

/// Rescales a curve to the target mean while keeping it inside [0, 1]:
/// scales toward 0 when lowering the mean, toward 1 when raising it.
HourlyCurve rescale_curve(const HourlyCurve& shape, double target_mean);

/// The cohort-level receptivity profile before per-participant jitter.
HourlyCurve default_receptivity(const CohortParams& params, PromptKind kind);

std::vector<ParticipantModel> default_cohort(std::size_t n, const agent::AttributeSchema& schema,
                                             const CohortParams& params, std::uint64_t study_seed);

/// Fatigue/recovery multiplier on the base effect.
double fatigue_factor(int tau, double mu, int rho);

/// Likert discretization: round half away from zero, then clamp to 1..7.
int to_likert(double x);

bool accept(const ParticipantModel& p, SimTime t, PromptKind kind, double engagement, Engine& rng);
int pre_stress(const ParticipantModel& p, SimTime t, Engine& rng);

/// Expected (noise-free, unrounded) effect of an action given the clocks of
/// the chosen values before delivery.
double expected_effect(const ParticipantModel& p, const agent::AttributeVector& action,
                       std::span<const int> tau_before, agent::Period period);

int post_stress(const ParticipantModel& p, int pre, const agent::AttributeVector& action,
                std::span<const int> tau_before, agent::Period period, Engine& rng);

/// Post EMA for a prompt that delivered no content.
int post_stress_control(const ParticipantModel& p, int pre, Engine& rng);

/// Running engagement of one participant.
class Engagement {
public:
    explicit Engagement(const EngagementParams& params) : params_(params) {}

    double factor() const noexcept { return factor_; }
    void observe(double benefit) noexcept;

private:
    EngagementParams params_;
    double factor_ = 1.0;
};

enum class Group { Control, Random, Pcar };
std::string_view to_string(Group g);
std::optional<Group> group_from_string(std::string_view s);

struct InterventionRecord {
    std::uint64_t seed = 0;
    std::uint64_t pid = 0;
    Group group = Group::Control;
    int phase = 1;
    int week = 1;  // within phase
    int day = 0;   // study day, 0 = first Monday
    SimTime timestamp;
    std::optional<agent::AttributeVector> action;
    std::string intervention_id;
    std::vector<int> tau_before;
    bool accepted = false;
    bool completed = false;
    std::optional<int> pre_stress;
    std::optional<int> post_stress;
    std::optional<int> reward;
    double trigger_score = 0.0;

    /// reward present iff completed, reward == pre - post, Likert bounds held.
    bool consistent() const noexcept;
};

}  // namespace pcar::cohort
