#include <doctest.h>

#include <cmath>
#include <limits>
#include <map>

#include "pcar/agent.hpp"
#include "pcar/error.hpp"
#include "support.hpp"

using namespace pcar;
using namespace pcar::agent;

namespace {

AgentParams greedy_params() {
    AgentParams p;
    p.epsilon_start = 0.0;
    p.epsilon_end = 0.0;
    return p;
}

AttributeSchema one_attribute(std::size_t values) {
    std::vector<std::string> names;
    for (std::size_t v = 0; v < values; ++v) names.push_back("v" + std::to_string(v));
    return AttributeSchema({Attribute{"arm", names}});
}

/// Drives `steps` SARSA updates with rewards from a fixed function of the action.
void random_updates(AgentBundle& bundle, std::size_t steps, std::uint64_t seed) {
    Engine rng(seed);
    ContextBucket ctx{Period::Morning, 0};
    auto action = bundle.select_action(ctx);
    for (std::size_t i = 0; i < steps; ++i) {
        double reward = normal(rng, 0.0, 1.0);
        for (auto v : action.values) reward += 0.1 * static_cast<double>(v);
        ContextBucket next_ctx{static_cast<Period>(uniform_index(rng, kPeriods)),
                               static_cast<int>(uniform_index(rng, 2))};
        const auto next = bundle.select_next(next_ctx, action);
        bundle.update({ctx, action, reward, Successor{next_ctx, next}});
        if (i % 7 == 6) bundle.end_episode();
        ctx = next_ctx;
        action = next;
    }
}

}  // namespace

TEST_CASE("period buckets follow the hour") {
    CHECK(period_from_hour(8) == Period::Morning);
    CHECK(period_from_hour(11) == Period::Morning);
    CHECK(period_from_hour(12) == Period::Afternoon);
    CHECK(period_from_hour(16) == Period::Afternoon);
    CHECK(period_from_hour(17) == Period::Evening);
    CHECK(period_from_hour(21) == Period::Evening);
    CHECK_THROWS_AS(period_from_hour(7), Error);
    CHECK_THROWS_AS(period_from_hour(22), Error);
}

TEST_CASE("schema validation") {
    CHECK_THROWS_AS(AttributeSchema({Attribute{"a", {}}}), Error);
    CHECK_THROWS_AS(AttributeSchema({Attribute{"a", {"x"}}, Attribute{"a", {"y"}}}), Error);
    const auto s = AttributeSchema::defaults();
    REQUIRE(s.size() == 3);
    CHECK(s[0].name == "emotional_regulation");
    CHECK(s[1].name == "therapy_group");
    CHECK(s[2].name == "location");
    CHECK(s[2].values == std::vector<std::string>{"indoor", "outdoor", "both"});
    CHECK(s.max_values() == 4);
    CHECK_THROWS_AS(validate(s, AttributeVector{{0, 0}}), Error);
    CHECK_THROWS_AS(validate(s, AttributeVector{{0, 0, 3}}), Error);
}

TEST_CASE("greedy selection: ties go to index 0, argmax otherwise") {
    AgentBundle b(AttributeSchema::defaults(), greedy_params(), 7);
    const ContextBucket ctx{Period::Afternoon, 1};
    CHECK(b.select_action(ctx).values == std::vector<std::size_t>{0, 0, 0});

    const auto bucket = b.bucket_index(ctx);
    b.model(1).set_q(2, b.states()[1].tau({2}), bucket, 1.0);
    CHECK(b.select_action(ctx).values == std::vector<std::size_t>{0, 2, 0});
}

TEST_CASE("exploration is reproducible under a fixed seed") {
    AgentParams p;
    p.epsilon_start = p.epsilon_end = 1.0;
    AgentBundle a(AttributeSchema::defaults(), p, 99), b(AttributeSchema::defaults(), p, 99);
    bool varied = false;
    const auto first = a.select_action({});
    CHECK(first == b.select_action({}));
    for (int i = 0; i < 20; ++i) {
        const auto x = a.select_action({});
        CHECK(x == b.select_action({}));
        varied |= !(x == first);
    }
    CHECK(varied);
}

TEST_CASE("epsilon decays linearly over the configured rounds") {
    AgentParams p;
    p.epsilon_rounds = 10;
    AgentBundle b(one_attribute(2), p, 1);
    CHECK(b.epsilon() == doctest::Approx(0.2));
    for (int i = 0; i < 5; ++i) b.update({{}, AttributeVector{{0}}, 0.0, std::nullopt});
    CHECK(b.epsilon() == doctest::Approx(0.11));
    for (int i = 0; i < 10; ++i) b.update({{}, AttributeVector{{0}}, 0.0, std::nullopt});
    CHECK(b.epsilon() == doctest::Approx(0.02));
}

TEST_CASE("one-step TD from zeros") {
    AgentParams p;
    p.alpha = 0.5;
    p.gamma = 0.9;
    p.lambda = 0.0;
    AgentBundle b(AttributeSchema::defaults(), p, 1);
    const ContextBucket ctx{Period::Evening, 0};
    const AttributeVector act{{1, 2, 0}};
    b.update({ctx, act, 1.0, Successor{ctx, act}});
    const auto bucket = b.bucket_index(ctx);
    for (std::size_t agent = 0; agent < 3; ++agent) {
        const auto& m = b.models()[agent];
        const int tau = p.tau_max;  // every value was rested before the update
        for (std::size_t v = 0; v < m.values(); ++v)
            for (std::size_t s = 0; s < lsd::tau_slots(p.tau_max); ++s)
                for (std::size_t k = 0; k < m.buckets(); ++k) {
                    const int t = lsd::tau_from_index(s, p.tau_max);
                    const bool visited = v == act.values[agent] && t == tau && k == bucket;
                    CHECK(m.q(v, t, k) == (visited ? 0.5 : 0.0));
                }
    }
    // Clocks advanced on the chosen values.
    CHECK(b.states()[0].tau({1}) == -1);
    CHECK(b.states()[0].tau({0}) == p.tau_max);
}

TEST_CASE("zero rewards from zero tables leave every entry at zero") {
    AgentBundle b(AttributeSchema::defaults(), AgentParams{}, 3);
    Engine rng(5);
    for (int i = 0; i < 200; ++i) {
        const auto a = random_policy(b.schema(), rng);
        const auto n = random_policy(b.schema(), rng);
        b.update({{}, a, 0.0, Successor{{}, n}});
    }
    for (const auto& m : b.models())
        for (double q : m.q_table()) CHECK(q == 0.0);
}

TEST_CASE("non-finite rewards are rejected") {
    AgentBundle b(AttributeSchema::defaults(), AgentParams{}, 3);
    const AttributeVector a{{0, 0, 0}};
    CHECK_THROWS_AS(b.update({{}, a, std::numeric_limits<double>::quiet_NaN(), std::nullopt}), Error);
    CHECK_THROWS_AS(b.update({{}, a, std::numeric_limits<double>::infinity(), std::nullopt}), Error);
    CHECK(b.round() == 0);
}

TEST_CASE("SARSA(lambda) tables match the hand-unrolled trace calculation") {
    for (const auto& [name, c] : test::golden().at("sarsa").items()) {
        CAPTURE(name);
        AgentParams p;
        p.alpha = c.at("alpha").get<double>();
        p.gamma = c.at("gamma").get<double>();
        p.lambda = c.at("lambda").get<double>();
        p.tau_max = 2;
        p.trait_buckets = 1;
        AgentBundle b(one_attribute(2), p, 0);
        const ContextBucket ctx{Period::Morning, 0};
        for (const auto& step : c.at("steps")) {
            Transition t{ctx, AttributeVector{{step[0].get<std::size_t>()}}, step[1].get<double>(), std::nullopt};
            if (!step[2].is_null()) t.next = Successor{ctx, AttributeVector{{step[2].get<std::size_t>()}}};
            b.update(t);
        }
        std::map<std::pair<std::size_t, int>, double> expected;
        for (const auto& e : c.at("q")) expected[{e.at("value").get<std::size_t>(), e.at("tau").get<int>()}] = e.at("q");
        const auto& m = b.models()[0];
        for (std::size_t v = 0; v < 2; ++v)
            for (int tau : {-2, -1, 1, 2}) {
                const auto it = expected.find({v, tau});
                const double want = it == expected.end() ? 0.0 : it->second;
                CHECK(std::abs(m.q(v, tau, 0) - want) <= 1e-12);
            }
    }
}

TEST_CASE("replacing traces stay within [0, 1] and reset at episode end") {
    AgentBundle b(AttributeSchema::defaults(), AgentParams{}, 11);
    random_updates(b, 300, 4);
    for (const auto& m : b.models())
        for (double e : m.trace_table()) {
            CHECK(e >= 0.0);
            CHECK(e <= 1.0);
        }
    b.end_episode();
    for (const auto& m : b.models())
        for (double e : m.trace_table()) CHECK(e == 0.0);
}

TEST_CASE("ghost audit passes on fresh and trained bundles") {
    AgentBundle b(AttributeSchema::defaults(), AgentParams{}, 21);
    auto fresh = ghost_audit(b);
    CHECK(fresh.passed);
    CHECK(fresh.checks > 0);

    random_updates(b, 1000, 22);
    const auto trained = ghost_audit(b, keyed_lookup, 5);
    CHECK(trained.passed);
    CHECK(trained.counterexamples.empty());
}

TEST_CASE("ghost audit catches a lookup that depends on another value's clock") {
    AgentBundle b(AttributeSchema::defaults(), AgentParams{}, 21);
    random_updates(b, 200, 23);
    const QLookup corrupted = [](const QModel& m, const lsd::LsdState& s, std::size_t v, std::size_t bucket) {
        const std::size_t other = (v + 1) % s.arms();
        return keyed_lookup(m, s, v, bucket) + 0.01 * s.tau({other});
    };
    const auto report = ghost_audit(b, corrupted, 5);
    CHECK_FALSE(report.passed);
    REQUIRE_FALSE(report.counterexamples.empty());
    const auto& c = report.counterexamples.front();
    CHECK(c.q_a != c.q_b);
    CHECK(c.state_a[c.value] == c.state_b[c.value]);
}

TEST_CASE("tabular estimates converge to the empirical mean at a key") {
    AgentParams p;
    p.alpha = 0.02;
    p.gamma = 0.0;
    p.lambda = 0.0;
    p.tau_max = 1;
    p.trait_buckets = 1;
    AgentBundle b(one_attribute(1), p, 0);
    Engine rng(17);
    const AttributeVector a{{0}};
    double sum = 0.0;
    int visits = 0;
    for (int i = 0; i < 2000; ++i) {
        const bool steady = b.states()[0].tau({0}) == -1;
        const double r = 0.2 + 0.4 * uniform01(rng);
        if (steady) {
            sum += r;
            ++visits;
        }
        b.update({{}, a, r, Successor{{}, a}});
    }
    REQUIRE(visits >= 500);
    CHECK(std::abs(b.models()[0].q(0, -1, 0) - sum / visits) < 0.05);
}

TEST_CASE("greedy choice is invariant to positive rescaling of Q") {
    AgentBundle b(AttributeSchema::defaults(), AgentParams{}, 31);
    random_updates(b, 500, 32);
    auto j = b.to_json();
    j["params"]["epsilon_start"] = 0.0;
    j["params"]["epsilon_end"] = 0.0;
    auto greedy = AgentBundle::from_json(j);
    auto scaled = greedy;
    for (std::size_t agent = 0; agent < 3; ++agent) scaled.model(agent).scale_q(3.7);
    for (int per = 0; per < 3; ++per)
        for (int trait = 0; trait < 2; ++trait) {
            const ContextBucket ctx{static_cast<Period>(per), trait};
            CHECK(greedy.select_action(ctx) == scaled.select_action(ctx));
        }
}

TEST_CASE("same seed and inputs give identical bundles") {
    AgentBundle a(AttributeSchema::defaults(), AgentParams{}, 41), b(AttributeSchema::defaults(), AgentParams{}, 41);
    random_updates(a, 400, 42);
    random_updates(b, 400, 42);
    CHECK(a == b);
    AgentBundle c(AttributeSchema::defaults(), AgentParams{}, 43);
    random_updates(c, 400, 42);
    CHECK_FALSE(a == c);
}

TEST_CASE("JSON snapshot round-trips") {
    AgentBundle a(AttributeSchema::defaults(), AgentParams{}, 51);
    random_updates(a, 300, 52);
    a.end_episode();
    const auto j = a.to_json();
    CHECK(j.at("agents").at("location").at("q").at("indoor").at("-1").contains("morning:0"));
    const auto b = AgentBundle::from_json(nlohmann::json::parse(j.dump()));
    CHECK(a == b);
    auto a2 = a;
    auto b2 = b;
    CHECK(a2.select_action({}) == b2.select_action({}));
}

TEST_CASE("parameter validation") {
    AgentParams p;
    p.ghost_rollout_depth = 1;
    CHECK_THROWS_AS(p.validate(), Error);
    p = {};
    p.alpha = 0.0;
    CHECK_THROWS_AS(p.validate(), Error);
    p = {};
    p.lambda = 1.5;
    CHECK_THROWS_AS(p.validate(), Error);
}

TEST_CASE("set_clocks adopts matching clocks only") {
    AgentBundle b(AttributeSchema::defaults(), AgentParams{}, 1);
    std::vector<lsd::LsdState> clocks;
    for (const auto& attr : b.schema().attributes()) clocks.push_back(lsd::LsdState::initial(attr.values.size(), 6).advance({0}));
    b.set_clocks(clocks);
    CHECK(b.states()[2].tau({0}) == -1);
    clocks.pop_back();
    CHECK_THROWS_AS(b.set_clocks(clocks), Error);
}

TEST_CASE("random policy: constant on single values, uniform marginals") {
    Engine rng(1);
    const AttributeSchema single({Attribute{"a", {"only"}}, Attribute{"b", {"x"}}});
    CHECK(random_policy(single, rng).values == std::vector<std::size_t>{0, 0});

    const auto s = AttributeSchema::defaults();
    Engine r1(77), r2(77);
    CHECK(random_policy(s, r1) == random_policy(s, r2));

    std::vector<std::vector<int>> counts;
    for (const auto& a : s.attributes()) counts.emplace_back(a.values.size(), 0);
    const int n = 10000;
    for (int i = 0; i < n; ++i) {
        const auto v = random_policy(s, rng);
        for (std::size_t a = 0; a < s.size(); ++a) ++counts[a][v.values[a]];
    }
    for (std::size_t a = 0; a < s.size(); ++a) {
        const double k = static_cast<double>(counts[a].size());
        double chi2 = 0.0;
        for (int c : counts[a]) {
            CHECK(std::abs(c / static_cast<double>(n) - 1.0 / k) < 0.03);
            chi2 += std::pow(c - n / k, 2) / (n / k);
        }
        CHECK(chi2 < 16.27);  // chi-square 0.999 quantile for 3 df
    }
}

TEST_CASE("control policy never delivers content") {
    CHECK(control_policy() == NoAction{});
    const PolicyChoice c = control_policy();
    CHECK(std::holds_alternative<NoAction>(c));
}

TEST_CASE("planning oracle: single arm, alternation, frozen optima") {
    const ArmReward by_tau = [](lsd::ArmId, int tau) { return static_cast<double>(tau); };
    const auto one = plan_oracle(by_tau, 1, 3, 5);
    // Clocks before each play: +3, -1, -2, -3, -3.
    CHECK(one.total == doctest::Approx(3 - 1 - 2 - 3 - 3));
    CHECK(one.sequence.size() == 5);

    const auto alt = plan_oracle([](lsd::ArmId, int tau) { return tau > 0 ? 1.0 : 0.0; }, 2, 2, 4);
    CHECK(alt.total == 4.0);

    const auto& g = test::golden().at("plan");
    const auto h10 = plan_oracle(
        [](lsd::ArmId a, int tau) { return (tau > 0 ? 1.0 : 0.2) + 0.1 * static_cast<double>(a.index); }, 2, 2, 10);
    CHECK(h10.total == doctest::Approx(g.at("k2_tau2_h10").at("total").get<double>()).epsilon(1e-12));
    std::vector<std::size_t> seq;
    for (auto a : h10.sequence) seq.push_back(a.index);
    CHECK(seq == g.at("k2_tau2_h10").at("sequence").get<std::vector<std::size_t>>());

    const auto rested = g.at("k2_tau2_h4_rested");
    CHECK(alt.total == rested.at("total").get<double>());

    const double gains[] = {0.9, 0.6, 0.3};
    const auto fatigue = plan_oracle(
        [&](lsd::ArmId a, int tau) {
            return gains[a.index] * (tau > 0 ? std::min(1.0, tau / 3.0) : std::pow(0.6, -tau));
        },
        3, 3, 7);
    const auto& f = g.at("k3_tau3_h7_fatigue");
    CHECK(fatigue.total == doctest::Approx(f.at("total").get<double>()).epsilon(1e-12));
    seq.clear();
    for (auto a : fatigue.sequence) seq.push_back(a.index);
    CHECK(seq == f.at("sequence").get<std::vector<std::size_t>>());
    CHECK(sequence_reward(
              [&](lsd::ArmId a, int tau) {
                  return gains[a.index] * (tau > 0 ? std::min(1.0, tau / 3.0) : std::pow(0.6, -tau));
              },
              fatigue.sequence, 3, 3) == doctest::Approx(fatigue.total));
}

TEST_CASE("planning oracle refuses oversized enumerations") {
    try {
        plan_oracle([](lsd::ArmId, int) { return 0.0; }, 4, 2, 12);
        FAIL("expected a refusal");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::GuardExceeded);
    }
}
