#include "pcar/cohort.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "pcar/error.hpp"

namespace pcar::cohort {

bool in_delivery_window(SimTime t) noexcept {
    const int m = t.minute_of_day();
    return t.is_weekday() && m >= kWindowStartMinute && m <= kWindowEndMinute;
}

std::string format_clock(SimTime t) {
    char buf[8];
    std::snprintf(buf, sizeof buf, "%02d:%02d", t.minute_of_day() / 60, t.minute_of_day() % 60);
    return buf;
}

namespace {

void check_probability(double p, const char* what) {
    if (!(p >= 0.0 && p <= 1.0)) throw Error(ErrorKind::InvalidParameter, std::string(what) + " must be in [0, 1]");
}

std::size_t hour_slot(SimTime t) {
    if (!in_delivery_window(t))
        throw Error(ErrorKind::InvalidParameter, "timestamp day " + std::to_string(t.day()) + " " + format_clock(t) +
                                                     " is outside the delivery window");
    return static_cast<std::size_t>(t.hour() - 8);
}

}  // namespace

void ParticipantModel::validate() const {
    if (!(baseline_stress >= kLikertMin && baseline_stress <= kLikertMax))
        throw Error(ErrorKind::InvalidParameter, "baseline stress must be in [1, 7]");
    for (double p : receptivity_curve) check_probability(p, "receptivity");
    for (double p : control_receptivity_curve) check_probability(p, "control receptivity");
    if (!(fatigue_decay > 0.0 && fatigue_decay < 1.0))
        throw Error(ErrorKind::InvalidParameter, "fatigue decay must be in (0, 1)");
    if (recovery_rounds < 1) throw Error(ErrorKind::InvalidParameter, "recovery rounds must be >= 1");
    for (const auto& attr : effects)
        for (const auto& value : attr)
            for (double b : value)
                if (!(std::abs(b) <= kMaxEffect))
                    throw Error(ErrorKind::InvalidParameter, "effect magnitude exceeds 3 Likert points");
    if (!(noise_sigma >= 0.0) || !(stress_sigma >= 0.0))
        throw Error(ErrorKind::InvalidParameter, "noise levels must be non-negative");
    check_probability(completion_prob, "completion probability");
}

double ParticipantModel::receptivity(SimTime t, PromptKind kind) const {
    const auto h = hour_slot(t);
    return kind == PromptKind::Intervention ? receptivity_curve[h] : control_receptivity_curve[h];
}

void CohortParams::validate() const {
    check_probability(intervention_acceptance, "intervention acceptance");
    check_probability(control_acceptance, "control acceptance");
    check_probability(completion_prob, "completion probability");
    for (double s : receptivity_shape)
        if (!(s >= 0.0)) throw Error(ErrorKind::InvalidParameter, "receptivity shape must be non-negative");
    if (std::accumulate(receptivity_shape.begin(), receptivity_shape.end(), 0.0) <= 0.0)
        throw Error(ErrorKind::InvalidParameter, "receptivity shape is all zero");
    if (!(fatigue_decay > 0.0 && fatigue_decay < 1.0))
        throw Error(ErrorKind::InvalidParameter, "fatigue decay must be in (0, 1)");
    if (recovery_rounds < 1) throw Error(ErrorKind::InvalidParameter, "recovery rounds must be >= 1");
    if (effect_means.empty()) throw Error(ErrorKind::InvalidParameter, "effect_means must not be empty");
    if (trait_buckets < 1) throw Error(ErrorKind::InvalidParameter, "trait_buckets must be >= 1");
    if (!(baseline_sd >= 0.0 && stress_sigma >= 0.0 && noise_sigma >= 0.0 && effect_value_sd >= 0.0 &&
          effect_period_sd >= 0.0 && receptivity_shift_sd >= 0.0))
        throw Error(ErrorKind::InvalidParameter, "spreads must be non-negative");
    if (!(engagement.floor > 0.0 && engagement.floor <= 1.0 && engagement.ceiling >= 1.0))
        throw Error(ErrorKind::InvalidParameter, "engagement bounds must bracket 1");
    if (!(engagement.sensitivity >= 0.0)) throw Error(ErrorKind::InvalidParameter, "engagement sensitivity must be >= 0");
}

HourlyCurve rescale_curve(const HourlyCurve& shape, double target_mean) {
    const double mean = std::accumulate(shape.begin(), shape.end(), 0.0) / kHours;
    HourlyCurve out{};
    for (int h = 0; h < kHours; ++h) {
        const double p = std::clamp(shape[h], 0.0, 1.0);
        if (target_mean <= mean)
            out[h] = mean > 0.0 ? p * target_mean / mean : 0.0;
        else
            out[h] = 1.0 - (1.0 - p) * (1.0 - target_mean) / (1.0 - mean);
    }
    return out;
}

HourlyCurve default_receptivity(const CohortParams& params, PromptKind kind) {
    return rescale_curve(params.receptivity_shape, kind == PromptKind::Intervention ? params.intervention_acceptance
                                                                                    : params.control_acceptance);
}

std::vector<ParticipantModel> default_cohort(std::size_t n, const agent::AttributeSchema& schema,
                                             const CohortParams& params, std::uint64_t study_seed) {
    if (n == 0) throw Error(ErrorKind::InvalidParameter, "cohort size must be >= 1");
    params.validate();
    const auto base_intervention = default_receptivity(params, PromptKind::Intervention);
    const auto base_control = default_receptivity(params, PromptKind::EmaOnly);

    std::vector<ParticipantModel> cohort;
    cohort.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        ParticipantModel p;
        p.pid = i;
        p.seed = hash64(study_seed, i);
        // A dedicated stream for parameter draws keeps the simulation stream
        // (seeded from p.seed) independent of how many parameters exist.
        Engine rng(hash64(p.seed, 0x70617261ULL));

        p.baseline_stress = std::clamp(normal(rng, params.baseline_mean, params.baseline_sd), 1.5, 6.5);
        p.hourly_stress_offsets = params.stress_offsets;
        const double shift = normal(rng, 0.0, params.receptivity_shift_sd);
        for (int h = 0; h < kHours; ++h) {
            p.receptivity_curve[h] = std::clamp(base_intervention[h] + shift, 0.02, 0.98);
            p.control_receptivity_curve[h] = std::clamp(base_control[h] + shift, 0.02, 0.98);
        }
        p.fatigue_decay = params.fatigue_decay;
        p.recovery_rounds = params.recovery_rounds;
        p.effects.resize(schema.size());
        for (std::size_t a = 0; a < schema.size(); ++a) {
            const double mean = params.effect_means[std::min(a, params.effect_means.size() - 1)];
            for (std::size_t v = 0; v < schema[a].values.size(); ++v) {
                const double value_effect = normal(rng, mean, params.effect_value_sd);
                std::array<double, agent::kPeriods> per_period{};
                for (auto& b : per_period)
                    b = std::clamp(value_effect + normal(rng, 0.0, params.effect_period_sd), -kMaxEffect, kMaxEffect);
                p.effects[a].push_back(per_period);
            }
        }
        p.noise_sigma = params.noise_sigma;
        p.stress_sigma = params.stress_sigma;
        p.completion_prob = params.completion_prob;
        p.control_drift = params.control_drift;
        p.trait_bucket = static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(params.trait_buckets)));
        p.engagement = params.engagement;
        cohort.push_back(std::move(p));
    }
    return cohort;
}

double fatigue_factor(int tau, double mu, int rho) {
    if (tau == 0) throw Error(ErrorKind::InvalidParameter, "switch clock cannot be 0");
    if (tau > 0) return std::min(1.0, static_cast<double>(tau) / rho);
    return std::pow(mu, -tau);
}

int to_likert(double x) {
    const double r = std::round(x);  // half away from zero
    return static_cast<int>(std::clamp(r, static_cast<double>(kLikertMin), static_cast<double>(kLikertMax)));
}

bool accept(const ParticipantModel& p, SimTime t, PromptKind kind, double engagement, Engine& rng) {
    const double prob = std::clamp(p.receptivity(t, kind) * engagement, 0.0, 1.0);
    return bernoulli(rng, prob);
}

int pre_stress(const ParticipantModel& p, SimTime t, Engine& rng) {
    const auto h = hour_slot(t);
    return to_likert(normal(rng, p.baseline_stress + p.hourly_stress_offsets[h], p.stress_sigma));
}

double expected_effect(const ParticipantModel& p, const agent::AttributeVector& action,
                       std::span<const int> tau_before, agent::Period period) {
    if (action.values.size() != p.effects.size() || tau_before.size() != p.effects.size())
        throw Error(ErrorKind::InvalidParameter, "action does not match the participant's effect table");
    double effect = 0.0;
    for (std::size_t a = 0; a < p.effects.size(); ++a) {
        const auto& b = p.effects[a].at(action.values[a])[static_cast<std::size_t>(period)];
        effect += b * fatigue_factor(tau_before[a], p.fatigue_decay, p.recovery_rounds);
    }
    return std::clamp(effect, -kMaxEffect, kMaxEffect);
}

int post_stress(const ParticipantModel& p, int pre, const agent::AttributeVector& action,
                std::span<const int> tau_before, agent::Period period, Engine& rng) {
    if (pre < kLikertMin || pre > kLikertMax) throw Error(ErrorKind::InvalidParameter, "pre stress outside 1..7");
    const double effect = expected_effect(p, action, tau_before, period);
    return to_likert(pre - effect + normal(rng, 0.0, p.noise_sigma));
}

int post_stress_control(const ParticipantModel& p, int pre, Engine& rng) {
    if (pre < kLikertMin || pre > kLikertMax) throw Error(ErrorKind::InvalidParameter, "pre stress outside 1..7");
    return to_likert(pre + p.control_drift + normal(rng, 0.0, p.noise_sigma));
}

void Engagement::observe(double benefit) noexcept {
    factor_ = std::clamp(factor_ + params_.sensitivity * (benefit - params_.reference), params_.floor, params_.ceiling);
}

std::string_view to_string(Group g) {
    switch (g) {
        case Group::Control: return "control";
        case Group::Random: return "random";
        case Group::Pcar: return "pcar";
    }
    return "?";
}

std::optional<Group> group_from_string(std::string_view s) {
    if (s == "control") return Group::Control;
    if (s == "random") return Group::Random;
    if (s == "pcar") return Group::Pcar;
    return std::nullopt;
}

bool InterventionRecord::consistent() const noexcept {
    auto likert = [](const std::optional<int>& v) { return !v || (*v >= kLikertMin && *v <= kLikertMax); };
    if (!likert(pre_stress) || !likert(post_stress)) return false;
    if (completed != reward.has_value()) return false;
    if (completed && !accepted) return false;
    if (accepted != pre_stress.has_value()) return false;
    if (reward) {
        if (!pre_stress || !post_stress) return false;
        if (*reward != *pre_stress - *post_stress) return false;
    }
    return true;
}

}  // namespace pcar::cohort
