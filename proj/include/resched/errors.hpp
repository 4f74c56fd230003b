#pragma once

#include <stdexcept>
#include <string>

namespace resched {

// Iterative solver ran out of iterations (Riccati fixed point, etc.).
struct NonConvergence : std::runtime_error {
    double residual;
    NonConvergence(const std::string& what, double res)
        : std::runtime_error(what + " (residual " + std::to_string(res) + ")"), residual(res) {}
};

struct DimensionMismatch : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Covariance trace exceeded the magnitude cap while extending the ladder.
struct UnstableLadder : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct StateOutOfRange : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Brute-force enumeration refused: state space too big.
struct TooLarge : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct InvalidBudget : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Success probability is zero: no finite threshold meets any budget.
// Callers must run an initialization phase before asking for a policy.
struct ChannelDead : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct NoSamples : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Stationary-average tail does not contract; long-run cost is unbounded.
struct DivergentTail : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace resched
