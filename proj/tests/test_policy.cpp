#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "resched/errors.hpp"
#include "resched/policy.hpp"

using namespace resched;

TEST_CASE("closed-form budget policy at the reference point") {
    const RandomizedThresholdPolicy p = constrained_optimal_policy(0.7, 0.4);
    CHECK(p.theta == 2);
    CHECK(p.r_theta == doctest::Approx(6.0 / 7.0).epsilon(1e-12));
}

TEST_CASE("integer break point keeps the randomization probability at one") {
    // x = 1/(0.5*0.5) - 1/0.5 = 2 exactly.
    const RandomizedThresholdPolicy p = constrained_optimal_policy(0.5, 0.5);
    CHECK(p.theta == 2);
    CHECK(p.r_theta == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("fractional break point") {
    // x = 1/0.27 - 1/0.9 = 70/27, so theta = 2 and r_theta = 11/27.
    const RandomizedThresholdPolicy p = constrained_optimal_policy(0.9, 0.3);
    CHECK(p.theta == 2);
    CHECK(p.r_theta == doctest::Approx(11.0 / 27.0).epsilon(1e-12));
}

TEST_CASE("full budget transmits every step") {
    const RandomizedThresholdPolicy p = constrained_optimal_policy(0.7, 1.0);
    CHECK(p.theta == 0);
    CHECK(p.r_theta == doctest::Approx(1.0));
}

TEST_CASE("budget validation") {
    CHECK_THROWS_AS(constrained_optimal_policy(0.7, 0.0), InvalidBudget);
    CHECK_THROWS_AS(constrained_optimal_policy(0.7, 1.5), InvalidBudget);
    CHECK_THROWS_AS(constrained_optimal_policy(0.7, -0.1), InvalidBudget);
    CHECK_THROWS_AS(constrained_optimal_policy(0.0, 0.4), ChannelDead);
}

TEST_CASE("deterministic threshold communication rate") {
    CHECK(comm_rate(2, 0.7) == doctest::Approx(1.0 / 2.4).epsilon(1e-12));
    CHECK(comm_rate(0, 0.9) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("decision function uses the supplied draw only at the threshold") {
    const RandomizedThresholdPolicy p{2, 0.25};
    CHECK(decide(p, 0, 0.0) == 0);
    CHECK(decide(p, 1, 0.99) == 0);
    CHECK(decide(p, 3, 0.99) == 1);
    CHECK(decide(p, 2, 0.2) == 1);   // below r_theta: transmit
    CHECK(decide(p, 2, 0.25) == 0);  // at or above: hold
    CHECK(decide(p, 2, 0.9) == 0);
}

TEST_CASE("randomized policies match any feasible budget exactly") {
    // Long-run rate from the renewal structure of the holding-time cycle.
    for (int i = 1; i <= 10; ++i)
        for (int j = 1; j <= 10; ++j) {
            const double rs = i / 10.0;
            const double b = j / 10.0;
            const RandomizedThresholdPolicy p = constrained_optimal_policy(rs, b);
            REQUIRE(p.theta >= 0);
            REQUIRE(p.r_theta > 0.0);
            REQUIRE(p.r_theta <= 1.0);
            const double residual = (1.0 - rs * p.r_theta) / rs;
            const double rate = (p.r_theta + residual) / (p.theta + 1.0 + residual);
            CHECK(rate == doctest::Approx(b).epsilon(1e-12));
        }
}
