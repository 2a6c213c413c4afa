#include "pcar/scheduler.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include "pcar/error.hpp"

namespace pcar::scheduler {

void BudgetRules::validate() const {
    if (max_per_day < 1) throw Error(ErrorKind::InvalidParameter, "max_per_day must be >= 1");
    if (min_gap_minutes < 0) throw Error(ErrorKind::InvalidParameter, "min_gap_minutes must be >= 0");
    if (window_start_minute < 0 || window_end_minute > cohort::kMinutesPerDay ||
        window_end_minute <= window_start_minute)
        throw Error(ErrorKind::InvalidParameter, "delivery window is empty or out of range");
}

void BudgetState::record_delivery(SimTime now) {
    if (day_ != now.day()) {
        day_ = now.day();
        delivered_ = 0;
    }
    ++delivered_;
    last_ = now;
}

bool eligible(const BudgetState& budget, SimTime now) {
    const auto& r = budget.rules();
    if (r.weekdays_only && !now.is_weekday()) return false;
    const int m = now.minute_of_day();
    if (m < r.window_start_minute || m > r.window_end_minute) return false;
    if (budget.delivered_on(now) >= r.max_per_day) return false;
    if (const auto last = budget.last_delivery(); last && now.minutes - last->minutes < r.min_gap_minutes)
        return false;
    return true;
}

bool on_tick(SimTime now) noexcept { return now.minutes % kTickMinutes == 0; }

std::vector<double> features(SimTime now, const BudgetState& budget) {
    const auto& r = budget.rules();
    const double window = r.window_minutes();
    std::vector<double> x(kFeatureCount, 0.0);
    const double angle = 2.0 * std::numbers::pi * (now.minute_of_day() / 60.0) / 24.0;
    x[0] = std::sin(angle);
    x[1] = std::cos(angle);
    if (now.is_weekday()) x[2 + static_cast<std::size_t>(now.weekday())] = 1.0;
    if (const auto last = budget.last_delivery())
        x[7] = std::min(static_cast<double>(now.minutes - last->minutes), window) / window;
    else
        x[7] = 1.0;
    x[8] = static_cast<double>(r.max_per_day - budget.delivered_on(now)) / r.max_per_day;
    x[9] = std::clamp((r.window_end_minute - now.minute_of_day()) / window, 0.0, 1.0);
    return x;
}

nlohmann::json TimingModel::to_json() const {
    return {{"schema_version", 1},
            {"weights", weights},
            {"bias", bias},
            {"threshold", threshold},
            {"budget_penalty", budget_penalty}};
}

TimingModel TimingModel::from_json(const nlohmann::json& j) {
    try {
        TimingModel m;
        m.weights = j.at("weights").get<std::vector<double>>();
        m.bias = j.at("bias").get<double>();
        m.threshold = j.at("threshold").get<double>();
        m.budget_penalty = j.at("budget_penalty").get<double>();
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::Parse, std::string("timing model: ") + e.what());
    }
}

double sigmoid(double z) noexcept {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

double score(const TimingModel& model, std::span<const double> x) {
    if (x.size() != model.weights.size())
        throw Error(ErrorKind::InvalidParameter, "feature dimension " + std::to_string(x.size()) +
                                                     " does not match model dimension " +
                                                     std::to_string(model.weights.size()));
    double z = model.bias;
    for (std::size_t i = 0; i < x.size(); ++i) z += model.weights[i] * x[i];
    return sigmoid(z);
}

namespace {

std::size_t count_days(std::span<const TrainingExample> history) {
    std::set<int> days;
    for (const auto& e : history) days.insert(e.day);
    return days.size();
}

}  // namespace

double training_loss(const TimingModel& model, std::span<const TrainingExample> history, double daily_budget) {
    if (history.empty()) throw Error(ErrorKind::InvalidParameter, "empty training history");
    double mse = 0.0;
    double expected = 0.0;
    for (const auto& e : history) {
        const double p = score(model, e.features);
        mse += (p - e.label) * (p - e.label);
        expected += p;
    }
    mse /= static_cast<double>(history.size());
    const double gap = expected / static_cast<double>(count_days(history)) - daily_budget;
    return mse + model.budget_penalty * gap * gap;
}

TrainResult train(const TimingModel& model, std::span<const TrainingExample> history, double daily_budget,
                  int epochs, double step) {
    if (history.empty()) throw Error(ErrorKind::InvalidParameter, "empty training history");
    if (epochs < 0) throw Error(ErrorKind::InvalidParameter, "epochs must be >= 0");
    for (const auto& e : history)
        if (e.features.size() != model.weights.size())
            throw Error(ErrorKind::InvalidParameter, "training example dimension mismatch");

    const double n = static_cast<double>(history.size());
    const double days = static_cast<double>(count_days(history));
    TrainResult out{model, {training_loss(model, history, daily_budget)}};
    auto& m = out.model;
    std::vector<double> p(history.size());
    std::vector<double> grad_w(m.weights.size());

    for (int epoch = 0; epoch < epochs; ++epoch) {
        double expected = 0.0;
        for (std::size_t i = 0; i < history.size(); ++i) {
            p[i] = score(m, history[i].features);
            expected += p[i];
        }
        const double budget_grad = 2.0 * m.budget_penalty * (expected / days - daily_budget) / days;
        std::fill(grad_w.begin(), grad_w.end(), 0.0);
        double grad_b = 0.0;
        for (std::size_t i = 0; i < history.size(); ++i) {
            const double dz = p[i] * (1.0 - p[i]) * (2.0 * (p[i] - history[i].label) / n + budget_grad);
            for (std::size_t k = 0; k < grad_w.size(); ++k) grad_w[k] += dz * history[i].features[k];
            grad_b += dz;
        }
        for (std::size_t k = 0; k < grad_w.size(); ++k) m.weights[k] -= step * grad_w[k];
        m.bias -= step * grad_b;
        out.loss_history.push_back(training_loss(m, history, daily_budget));
    }
    return out;
}

bool decide(const TimingModel& model, const BudgetState& budget, SimTime now) {
    if (!on_tick(now)) throw Error(ErrorKind::InvalidParameter, "decide called off the 5-minute grid");
    if (!eligible(budget, now)) return false;
    return score(model, features(now, budget)) >= model.threshold;
}

}  // namespace pcar::scheduler
