#include <doctest.h>

#include <cmath>

#include "pcar/cohort.hpp"
#include "pcar/error.hpp"

using namespace pcar;
using namespace pcar::cohort;

namespace {

/// One attribute with one value whose base effect is `b` in every period.
ParticipantModel single_effect(double b, double noise = 0.0) {
    ParticipantModel p;
    p.baseline_stress = 4.0;
    p.receptivity_curve.fill(0.5);
    p.control_receptivity_curve.fill(0.5);
    p.effects = {{{b, b, b}}};
    p.noise_sigma = noise;
    p.fatigue_decay = 0.6;
    p.recovery_rounds = 3;
    return p;
}

const SimTime kTuesdayTen = SimTime::at(1, 10 * 60);

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

/// E[to_likert(N(m, s))] from the normal CDF: each Likert level k collects
/// the mass of [k - 0.5, k + 0.5), with the tails folded into 1 and 7.
double expected_likert(double m, double s) {
    double e = 0.0;
    for (int k = kLikertMin; k <= kLikertMax; ++k) {
        const double lo = k == kLikertMin ? 0.0 : normal_cdf((k - 0.5 - m) / s);
        const double hi = k == kLikertMax ? 1.0 : normal_cdf((k + 0.5 - m) / s);
        e += k * (hi - lo);
    }
    return e;
}

}  // namespace

TEST_CASE("post stress examples") {
    const auto p = single_effect(1.0);
    Engine rng(1);
    const agent::AttributeVector a{{0}};
    const int rested[] = {3};
    CHECK(post_stress(p, 5, a, rested, agent::Period::Morning, rng) == 4);

    const int fatigued[] = {-3};
    CHECK(expected_effect(p, a, fatigued, agent::Period::Morning) == doctest::Approx(0.216).epsilon(1e-12));
    CHECK(post_stress(p, 5, a, fatigued, agent::Period::Morning, rng) == 5);

    CHECK_THROWS_AS(post_stress(p, 0, a, rested, agent::Period::Morning, rng), Error);
    CHECK_THROWS_AS(post_stress(p, 8, a, rested, agent::Period::Morning, rng), Error);
}

TEST_CASE("fatigue factor shape") {
    CHECK(fatigue_factor(3, 0.6, 3) == 1.0);
    CHECK(fatigue_factor(6, 0.6, 3) == 1.0);
    CHECK(fatigue_factor(1, 0.6, 3) == doctest::Approx(1.0 / 3.0));
    CHECK(fatigue_factor(-1, 0.6, 3) == doctest::Approx(0.6));
    CHECK(fatigue_factor(-3, 0.6, 3) == doctest::Approx(0.216));
    CHECK_THROWS_AS(fatigue_factor(0, 0.6, 3), Error);
}

TEST_CASE("expected benefit is monotone in consecutive use and in rest") {
    const auto p = single_effect(2.0);
    const agent::AttributeVector a{{0}};
    double prev = 1e9;
    for (int depth = 1; depth <= 6; ++depth) {
        const int tau[] = {-depth};
        const double e = expected_effect(p, a, tau, agent::Period::Afternoon);
        CHECK(e <= prev);
        prev = e;
    }
    prev = -1e9;
    for (int rest = 1; rest <= p.recovery_rounds; ++rest) {
        const int tau[] = {rest};
        const double e = expected_effect(p, a, tau, agent::Period::Afternoon);
        CHECK(e >= prev);
        prev = e;
    }
}

TEST_CASE("effects are summed over attributes and clamped") {
    ParticipantModel p = single_effect(2.5);
    p.effects.push_back({{2.5, 2.5, 2.5}});
    const int tau[] = {6, 6};
    CHECK(expected_effect(p, agent::AttributeVector{{0, 0}}, tau, agent::Period::Evening) == kMaxEffect);
    const int one[] = {6};
    CHECK_THROWS_AS(expected_effect(p, agent::AttributeVector{{0}}, one, agent::Period::Evening), Error);
}

TEST_CASE("Likert rounding is half away from zero, then clamped") {
    CHECK(to_likert(4.5) == 5);
    CHECK(to_likert(3.5) == 4);
    CHECK(to_likert(4.49) == 4);
    CHECK(to_likert(0.4) == 1);
    CHECK(to_likert(-3.0) == 1);
    CHECK(to_likert(7.6) == 7);
}

TEST_CASE("pre stress: degenerate, clamped and Monte-Carlo cases") {
    auto p = single_effect(0.0);
    p.stress_sigma = 0.0;
    p.hourly_stress_offsets.fill(0.0);
    Engine rng(3);
    CHECK(pre_stress(p, kTuesdayTen, rng) == 4);

    p.baseline_stress = 7.0;
    p.hourly_stress_offsets.fill(0.4);
    CHECK(pre_stress(p, kTuesdayTen, rng) == 7);

    p.baseline_stress = 5.8;
    p.hourly_stress_offsets.fill(0.3);
    p.stress_sigma = 1.0;
    double sum = 0.0;
    const int n = 10000;
    for (int i = 0; i < n; ++i) sum += pre_stress(p, kTuesdayTen, rng);
    CHECK(std::abs(sum / n - expected_likert(6.1, 1.0)) < 0.05);

    CHECK_THROWS_AS(pre_stress(p, SimTime::at(1, 7 * 60), rng), Error);
    CHECK_THROWS_AS(pre_stress(p, SimTime::at(5, 10 * 60), rng), Error);  // Saturday
}

TEST_CASE("acceptance draws follow the receptivity") {
    auto p = single_effect(0.0);
    Engine rng(9);
    p.receptivity_curve.fill(1.0);
    for (int i = 0; i < 200; ++i) CHECK(accept(p, kTuesdayTen, PromptKind::Intervention, 1.0, rng));
    p.receptivity_curve.fill(0.0);
    for (int i = 0; i < 200; ++i) CHECK_FALSE(accept(p, kTuesdayTen, PromptKind::Intervention, 1.0, rng));
    p.receptivity_curve.fill(0.5);
    int yes = 0;
    for (int i = 0; i < 10000; ++i) yes += accept(p, kTuesdayTen, PromptKind::Intervention, 1.0, rng);
    CHECK(std::abs(yes / 10000.0 - 0.5) < 0.02);
    CHECK_THROWS_AS(accept(p, SimTime::at(2, 21 * 60 + 5), PromptKind::Intervention, 1.0, rng), Error);
}

TEST_CASE("control post EMA drifts up on average") {
    auto p = single_effect(0.0, 0.6);
    p.control_drift = 0.15;
    Engine rng(12);
    double sum = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) sum += 4 - post_stress_control(p, 4, rng);
    CHECK(sum / n < 0.0);
    CHECK(sum / n > -0.3);
}

TEST_CASE("default receptivity profile has the published peaks and dips") {
    const CohortParams params;
    const auto curve = default_receptivity(params, PromptKind::Intervention);
    auto at = [&](int hour) { return curve[static_cast<std::size_t>(hour - 8)]; };
    CHECK(at(16) > at(18));
    CHECK(at(19) > at(18));
    CHECK(at(16) > at(15));
    CHECK(at(16) > at(17));
    CHECK(at(19) > at(20));
    CHECK(at(8) < at(9));

    double mean = 0.0, cmean = 0.0;
    const auto control = default_receptivity(params, PromptKind::EmaOnly);
    for (int h = 0; h < kHours; ++h) {
        mean += curve[h] / kHours;
        cmean += control[h] / kHours;
        CHECK(control[h] <= 1.0);
    }
    CHECK(mean == doctest::Approx(0.50));
    CHECK(cmean == doctest::Approx(0.77));
}

TEST_CASE("default cohort: valid, deterministic, independent streams") {
    const auto schema = agent::AttributeSchema::defaults();
    const CohortParams params;
    const auto a = default_cohort(10, schema, params, 5);
    const auto b = default_cohort(12, schema, params, 5);
    REQUIRE(a.size() == 10);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK_NOTHROW(a[i].validate());
        CHECK(a[i].pid == i);
        // Adding participants leaves existing ones untouched.
        CHECK(a[i].seed == b[i].seed);
        CHECK(a[i].effects == b[i].effects);
        CHECK(a[i].receptivity_curve == b[i].receptivity_curve);
    }
    CHECK(a[0].seed != a[1].seed);
    CHECK_THROWS_AS(default_cohort(0, schema, params, 5), Error);
}

TEST_CASE("engagement accumulates benefit and respects its bounds") {
    EngagementParams ep;  // sensitivity 0.1, reference 0.3, floor 0.5, ceiling 1.5
    Engagement e(ep);
    CHECK(e.factor() == 1.0);
    e.observe(1.3);
    CHECK(e.factor() == doctest::Approx(1.1));
    e.observe(-0.7);
    CHECK(e.factor() == doctest::Approx(1.0));
    for (int i = 0; i < 100; ++i) e.observe(3.0);
    CHECK(e.factor() == ep.ceiling);
    for (int i = 0; i < 100; ++i) e.observe(-3.0);
    CHECK(e.factor() == ep.floor);
}

TEST_CASE("record consistency rules") {
    InterventionRecord r;
    CHECK(r.consistent());  // initiated, not accepted
    r.accepted = true;
    r.pre_stress = 5;
    CHECK(r.consistent());
    r.completed = true;
    CHECK_FALSE(r.consistent());  // completed without reward
    r.post_stress = 3;
    r.reward = 2;
    CHECK(r.consistent());
    r.reward = -2;
    CHECK_FALSE(r.consistent());
    r.reward = 2;
    r.post_stress = 8;
    CHECK_FALSE(r.consistent());
}

TEST_CASE("calendar helpers") {
    const auto t = SimTime::at(8, 16 * 60 + 35);
    CHECK(t.day() == 8);
    CHECK(t.weekday() == 1);
    CHECK(t.hour() == 16);
    CHECK(format_clock(t) == "16:35");
    CHECK(in_delivery_window(SimTime::at(0, 21 * 60)));
    CHECK_FALSE(in_delivery_window(SimTime::at(0, 21 * 60 + 5)));
    CHECK_FALSE(in_delivery_window(SimTime::at(6, 12 * 60)));
    CHECK(group_from_string("pcar") == Group::Pcar);
    CHECK_FALSE(group_from_string("other").has_value());
}
