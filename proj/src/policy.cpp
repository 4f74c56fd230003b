#include "resched/policy.hpp"

#include <cmath>

#include "resched/errors.hpp"

namespace resched {

RandomizedThresholdPolicy constrained_optimal_policy(double r_s, double b) {
    if (!(b > 0.0) || b > 1.0) throw InvalidBudget("budget must lie in (0,1]");
    if (r_s < 0.0 || r_s > 1.0) throw std::invalid_argument("r_s must be in [0,1]");
    if (r_s == 0.0)
        throw ChannelDead("r_s = 0: threshold is unbounded; initialize the channel estimate first");
    const double x = 1.0 / (r_s * b) - 1.0 / r_s;
    double fl = std::floor(x);
    if (fl < 0.0) fl = 0.0;  // b = 1 should give exactly (0, 1) despite rounding
    RandomizedThresholdPolicy policy;
    policy.theta = static_cast<long>(fl);
    policy.r_theta = 1.0 - (x - fl);
    if (policy.r_theta > 1.0) policy.r_theta = 1.0;
    return policy;
}

double comm_rate(long theta, double r_s) {
    if (theta < 0) throw std::invalid_argument("theta must be nonnegative");
    if (!(r_s > 0.0)) throw ChannelDead("comm_rate undefined for r_s = 0");
    return 1.0 / (r_s * static_cast<double>(theta) + 1.0);
}

int decide(const RandomizedThresholdPolicy& policy, long tau, double u) {
    if (tau < policy.theta) return 0;
    if (tau > policy.theta) return 1;
    return u < policy.r_theta ? 1 : 0;
}

}  // namespace resched
