#include <doctest.h>

#include <cmath>

#include "pcar/error.hpp"
#include "pcar/scheduler.hpp"
#include "support.hpp"

using namespace pcar;
using namespace pcar::scheduler;

namespace {

SimTime at(int day, int hour, int minute = 0) { return SimTime::at(day, hour * 60 + minute); }

constexpr int kMonday = 0, kTuesday = 1, kSaturday = 5;

/// Examples on `days` days, `per_day` per day; label from `label(i)`.
template <class F>
std::vector<TrainingExample> toy_history(int days, int per_day, F label) {
    std::vector<TrainingExample> h;
    int i = 0;
    for (int d = 0; d < days; ++d)
        for (int k = 0; k < per_day; ++k, ++i) {
            std::vector<double> x(kFeatureCount, 0.0);
            x[0] = std::sin(0.7 * i);
            x[1] = std::cos(1.3 * i);
            x[9] = (k + 0.5) / per_day;
            h.push_back({x, static_cast<double>(label(i, x)), d});
        }
    return h;
}

}  // namespace

TEST_CASE("eligibility rules") {
    BudgetState fresh{BudgetRules{}};
    CHECK_FALSE(eligible(fresh, at(kSaturday, 10)));
    CHECK(eligible(fresh, at(kTuesday, 10)));

    BudgetState gap{BudgetRules{}};
    gap.set(kTuesday, 1, at(kTuesday, 9));
    CHECK_FALSE(eligible(gap, at(kTuesday, 10)));
    CHECK(eligible(gap, at(kTuesday, 11)));

    CHECK_FALSE(eligible(fresh, at(kTuesday, 21, 5)));
    CHECK(eligible(fresh, at(kTuesday, 21, 0)));
    CHECK_FALSE(eligible(fresh, at(kTuesday, 7, 55)));

    BudgetState two{BudgetRules{}};
    two.set(kTuesday, 2, at(kTuesday, 7, 50));
    CHECK(eligible(two, at(kTuesday, 10)));

    BudgetState full{BudgetRules{}};
    full.set(kTuesday, 3, at(kTuesday, 14));
    CHECK_FALSE(eligible(full, at(kTuesday, 20)));
    CHECK(eligible(full, at(kTuesday + 1, 9)));  // new day resets the count

    BudgetRules weekends;
    weekends.weekdays_only = false;
    CHECK(eligible(BudgetState{weekends}, at(kSaturday, 10)));
}

TEST_CASE("budget rule validation") {
    BudgetRules r;
    r.max_per_day = 0;
    CHECK_THROWS_AS(r.validate(), Error);
    r = {};
    r.window_end_minute = r.window_start_minute;
    CHECK_THROWS_AS(r.validate(), Error);
}

TEST_CASE("feature vector layout") {
    BudgetState b{BudgetRules{}};
    const auto x = features(at(kMonday, 8), b);
    REQUIRE(x.size() == kFeatureCount);
    CHECK(x[2] == 1.0);  // Monday
    CHECK(x[3] == 0.0);
    CHECK(x[7] == 1.0);  // no prior prompt
    CHECK(x[8] == 1.0);  // full budget
    CHECK(x[9] == 1.0);  // whole window ahead

    CHECK(features(at(kMonday, 21), b)[9] == 0.0);
    CHECK(features(at(kMonday, 8), b)[0] != features(at(kMonday, 20), b)[0]);
    const auto mon = features(at(kMonday, 13), b), tue = features(at(kTuesday, 13), b);
    CHECK(mon[0] == tue[0]);
    CHECK(mon[1] == tue[1]);
    CHECK(tue[3] == 1.0);

    b.record_delivery(at(kTuesday, 9));
    const auto y = features(at(kTuesday, 11, 10), b);
    CHECK(y[7] == doctest::Approx(130.0 / 780.0));
    CHECK(y[8] == doctest::Approx(2.0 / 3.0));
    CHECK(y[9] == doctest::Approx((21 * 60 - (11 * 60 + 10)) / 780.0));
}

TEST_CASE("score: identities, limits and a golden value") {
    TimingModel m;
    const std::vector<double> x(kFeatureCount, 0.3);
    CHECK(score(m, x) == 0.5);
    m.bias = 50.0;
    CHECK(score(m, x) > 1.0 - 1e-12);
    m.bias = -50.0;
    CHECK(score(m, x) < 1e-12);
    CHECK_THROWS_AS(score(m, std::vector<double>(3, 0.0)), Error);

    const auto& g = test::golden().at("score");
    TimingModel gm;
    gm.weights = g.at("weights").get<std::vector<double>>();
    gm.bias = g.at("bias").get<double>();
    const auto gx = g.at("features").get<std::vector<double>>();
    CHECK(std::abs(score(gm, gx) - g.at("p").get<double>()) < 1e-14);
}

TEST_CASE("training fits a separable set") {
    const auto h = toy_history(20, 5, [](int, const std::vector<double>& x) { return x[0] > 0.0 ? 1.0 : 0.0; });
    TimingModel m;
    m.budget_penalty = 0.0;
    const auto r = train(m, h, 3.0, 500, 2.0);
    double mse = 0.0;
    for (const auto& e : h) mse += std::pow(score(r.model, e.features) - e.label, 2) / h.size();
    CHECK(mse < 0.05);
}

TEST_CASE("a large budget weight pulls expected daily triggers to the budget") {
    const auto h = toy_history(10, 6, [](int, const std::vector<double>&) { return 1.0; });
    TimingModel m;
    m.budget_penalty = 10.0;
    const auto r = train(m, h, 3.0, 500, 0.05);
    double sum = 0.0;
    for (const auto& e : h) sum += score(r.model, e.features);
    CHECK(std::abs(sum / 10.0 - 3.0) <= 0.5);
}

TEST_CASE("training: zero epochs, empty history, non-increasing loss") {
    const auto h = toy_history(8, 3, [](int i, const std::vector<double>& x) { return (x[1] > 0.2) != (i % 5 == 0); });
    TimingModel m;
    m.weights[3] = 0.2;
    const auto zero = train(m, h, 3.0, 0, 0.05);
    CHECK(zero.model == m);
    REQUIRE(zero.loss_history.size() == 1);
    CHECK(zero.loss_history[0] == doctest::Approx(training_loss(m, h, 3.0)));

    CHECK_THROWS_AS(train(m, {}, 3.0, 10, 0.05), Error);

    for (double penalty : {0.0, 0.01, 0.1, 1.0}) {
        m.budget_penalty = penalty;
        const auto r = train(m, h, 3.0, 500, 0.05);
        REQUIRE(r.loss_history.size() == 501);
        for (std::size_t i = 1; i < r.loss_history.size(); ++i)
            CHECK(r.loss_history[i] <= r.loss_history[i - 1] + 1e-15);
        CHECK(r.loss_history.back() == doctest::Approx(training_loss(r.model, h, 3.0)));
    }
}

TEST_CASE("training is deterministic") {
    const auto h = toy_history(6, 3, [](int i, const std::vector<double>&) { return i % 3 == 0 ? 1.0 : 0.0; });
    CHECK(train(TimingModel{}, h, 3.0, 100, 0.05).model == train(TimingModel{}, h, 3.0, 100, 0.05).model);
}

TEST_CASE("decide: eligibility gates the score; a day never exceeds the budget") {
    TimingModel eager;
    eager.bias = 5.0;  // score ~0.993
    BudgetState b{BudgetRules{}};
    CHECK_FALSE(decide(eager, b, at(kSaturday, 10)));
    CHECK(decide(eager, b, at(kTuesday, 10)));
    CHECK_THROWS_AS(decide(eager, b, at(kTuesday, 10, 2)), Error);

    TimingModel shy;
    shy.bias = -5.0;
    CHECK_FALSE(decide(shy, b, at(kTuesday, 10)));

    int triggers = 0;
    for (int m = 0; m < cohort::kMinutesPerDay; m += kTickMinutes) {
        const auto now = SimTime::at(kTuesday, m);
        if (decide(eager, b, now)) {
            b.record_delivery(now);
            ++triggers;
        }
    }
    CHECK(triggers == 3);
}

TEST_CASE("timing model snapshot round-trips") {
    TimingModel m;
    m.weights[4] = -0.25;
    m.bias = 0.125;
    m.threshold = 0.6;
    CHECK(TimingModel::from_json(nlohmann::json::parse(m.to_json().dump())) == m);
    CHECK_THROWS_AS(TimingModel::from_json(nlohmann::json{{"weights", "nope"}}), Error);
}
