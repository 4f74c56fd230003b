#pragma once

namespace resched {

// Transmit iff tau > theta; at tau == theta transmit with probability
// r_theta. Deterministic thresholds are the r_theta = 1 special case.
struct RandomizedThresholdPolicy {
    long theta = 0;
    double r_theta = 1.0;
};

// Closed-form budget-matching policy: theta = floor(x) with
// x = 1/(r_s b) - 1/r_s, r_theta = 1 - frac(x) (exactly 1 when x is an
// integer). The long-run transmission rate of the result equals b.
// Throws InvalidBudget for b outside (0,1] and ChannelDead for r_s = 0
// (no finite threshold exists; run channel initialization first).
RandomizedThresholdPolicy constrained_optimal_policy(double r_s, double b);

// Long-run transmission rate of a deterministic threshold: 1/(r_s theta + 1).
double comm_rate(long theta, double r_s);

// Pure decision function; u is a uniform [0,1) draw supplied by the caller
// (randomness is injected, never generated here).
int decide(const RandomizedThresholdPolicy& policy, long tau, double u);

}  // namespace resched
