#include "pcar/lsd.hpp"

#include <algorithm>
#include <string>

#include "pcar/error.hpp"

namespace pcar::lsd {

LsdState LsdState::initial(std::size_t arms, int tau_max) {
    if (arms == 0) throw Error(ErrorKind::InvalidParameter, "arm count must be >= 1");
    if (tau_max < 1) throw Error(ErrorKind::InvalidParameter, "tau_max must be >= 1");
    return LsdState(std::vector<int>(arms, tau_max), tau_max);
}

LsdState LsdState::from_taus(std::vector<int> taus, int tau_max) {
    if (taus.empty()) throw Error(ErrorKind::InvalidParameter, "arm count must be >= 1");
    if (tau_max < 1) throw Error(ErrorKind::InvalidParameter, "tau_max must be >= 1");
    for (int t : taus) {
        if (t == 0 || t > tau_max || t < -tau_max)
            throw Error(ErrorKind::InvalidParameter,
                        "clock " + std::to_string(t) + " outside {-tau_max..-1, 1..tau_max}");
    }
    return LsdState(std::move(taus), tau_max);
}

void LsdState::check_arm(ArmId arm) const {
    if (arm.index >= taus_.size())
        throw Error(ErrorKind::InvalidArm, "arm " + std::to_string(arm.index) + " out of range (" +
                                               std::to_string(taus_.size()) + " arms)");
}

LsdState LsdState::advance(ArmId played) const {
    check_arm(played);
    std::vector<int> next(taus_);
    for (std::size_t a = 0; a < next.size(); ++a) {
        int& t = next[a];
        if (a == played.index)
            t = t > 0 ? -1 : std::max(t - 1, -tau_max_);
        else
            t = t < 0 ? 1 : std::min(t + 1, tau_max_);
    }
    return LsdState(std::move(next), tau_max_);
}

RewardKey LsdState::reward_key(ArmId arm) const {
    check_arm(arm);
    return {arm, taus_[arm.index]};
}

int LsdState::tau(ArmId arm) const {
    check_arm(arm);
    return taus_[arm.index];
}

}  // namespace pcar::lsd
