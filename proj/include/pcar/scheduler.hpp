#pragma once

// Budget-constrained intervention timing.
//
// Hard rules (per participant): at most max_per_day initiated prompts per
// day, at least min_gap_minutes between prompts, delivery only inside the
// daily window and, by default, only on weekdays. Within those rules a
// linear+sigmoid timing model scores each 5-minute tick; a prompt fires when
// the tick is eligible and the score reaches the threshold.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "pcar/cohort.hpp"

namespace pcar::scheduler {

using cohort::SimTime;

inline constexpr int kTickMinutes = 5;

struct BudgetRules {
    int max_per_day = 3;
    int min_gap_minutes = 120;
    int window_start_minute = cohort::kWindowStartMinute;
    int window_end_minute = cohort::kWindowEndMinute;
    bool weekdays_only = true;

    void validate() const;
    int window_minutes() const noexcept { return window_end_minute - window_start_minute; }
};

class BudgetState {
public:
    BudgetState() = default;
    explicit BudgetState(BudgetRules rules) : rules_(rules) { rules_.validate(); }

    /// Prompts already initiated on the day of `now`.
    int delivered_on(SimTime now) const noexcept { return day_ == now.day() ? delivered_ : 0; }
    std::optional<SimTime> last_delivery() const noexcept { return last_; }
    const BudgetRules& rules() const noexcept { return rules_; }

    void record_delivery(SimTime now);

    /// Test hook: sets the counters directly.
    void set(int day, int delivered, std::optional<SimTime> last) {
        day_ = day;
        delivered_ = delivered;
        last_ = last;
    }

private:
    BudgetRules rules_;
    int day_ = -1;
    int delivered_ = 0;
    std::optional<SimTime> last_;
};

bool eligible(const BudgetState& budget, SimTime now);
bool on_tick(SimTime now) noexcept;

inline constexpr std::size_t kFeatureCount = 10;

/// sin/cos of the hour angle, weekday one-hot (Mon..Fri), minutes since the
/// last prompt (capped at the window length, normalized), prompts remaining
/// today / max_per_day, window minutes remaining / window length.
std::vector<double> features(SimTime now, const BudgetState& budget);

struct TimingModel {
    std::vector<double> weights = std::vector<double>(kFeatureCount, 0.0);
    double bias = 0.0;
    double threshold = 0.5;
    double budget_penalty = 0.1;

    nlohmann::json to_json() const;
    static TimingModel from_json(const nlohmann::json& j);

    friend bool operator==(const TimingModel&, const TimingModel&) = default;
};

double sigmoid(double z) noexcept;

/// sigmoid(w . x + b). Throws on a dimension mismatch.
double score(const TimingModel& model, std::span<const double> x);

struct TrainingExample {
    std::vector<double> features;
    double label = 0.0;  // 1 accepted, 0 not
    int day = 0;         // groups examples for the budget term
};

/// mean((p - y)^2) + budget_penalty * (sum(p) / days - daily_budget)^2
double training_loss(const TimingModel& model, std::span<const TrainingExample> history, double daily_budget);

struct TrainResult {
    TimingModel model;
    /// Loss before the first epoch followed by the loss after each epoch.
    std::vector<double> loss_history;
};

/// Full-batch gradient descent on training_loss, starting from `model`.
TrainResult train(const TimingModel& model, std::span<const TrainingExample> history, double daily_budget,
                  int epochs, double step);

/// eligible(budget, now) && score >= threshold. `now` must sit on the 5-minute grid.
bool decide(const TimingModel& model, const BudgetState& budget, SimTime now);

}  // namespace pcar::scheduler
