#pragma once

// Last-Switch-Dependent state: one signed switch clock per arm.
//
//   tau[a] = -r  arm a has been played for the last r consecutive rounds
//   tau[a] = +r  arm a has not been played for the last r rounds
//
// Clocks saturate at +/- tau_max and are never zero.

#include <cstddef>
#include <span>
#include <vector>

namespace pcar::lsd {

struct ArmId {
    std::size_t index = 0;

    friend bool operator==(ArmId, ArmId) = default;
    friend auto operator<=>(ArmId, ArmId) = default;
};

/// The reward-relevant part of a global state for one action. Two global
/// states sharing this key are ghost states of each other.
struct RewardKey {
    ArmId arm;
    int tau = 0;

    friend bool operator==(const RewardKey&, const RewardKey&) = default;
};

class LsdState {
public:
    /// All arms maximally rested (+tau_max). Throws InvalidParameter on k == 0
    /// or tau_max == 0.
    static LsdState initial(std::size_t arms, int tau_max);

    /// Builds a state from explicit clocks; every entry must be nonzero and
    /// within [-tau_max, tau_max].
    static LsdState from_taus(std::vector<int> taus, int tau_max);

    /// Returns the successor after playing `played`. The receiver is not
    /// modified.
    [[nodiscard]] LsdState advance(ArmId played) const;

    [[nodiscard]] RewardKey reward_key(ArmId arm) const;

    int tau(ArmId arm) const;
    int tau_max() const noexcept { return tau_max_; }
    std::size_t arms() const noexcept { return taus_.size(); }
    std::span<const int> taus() const noexcept { return taus_; }

    friend bool operator==(const LsdState&, const LsdState&) = default;

private:
    LsdState(std::vector<int> taus, int tau_max) : taus_(std::move(taus)), tau_max_(tau_max) {}
    void check_arm(ArmId arm) const;

    std::vector<int> taus_;
    int tau_max_ = 1;
};

/// Dense index of a clipped clock: -tau_max..-1 map to 0..tau_max-1 and
/// +1..+tau_max map to tau_max..2*tau_max-1.
constexpr std::size_t tau_index(int tau, int tau_max) noexcept {
    return tau < 0 ? static_cast<std::size_t>(tau + tau_max)
                   : static_cast<std::size_t>(tau + tau_max - 1);
}

constexpr int tau_from_index(std::size_t index, int tau_max) noexcept {
    const int i = static_cast<int>(index);
    return i < tau_max ? i - tau_max : i - tau_max + 1;
}

constexpr std::size_t tau_slots(int tau_max) noexcept {
    return static_cast<std::size_t>(2 * tau_max);
}

}  // namespace pcar::lsd
