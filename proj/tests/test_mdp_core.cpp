#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "resched/errors.hpp"
#include "resched/mdp_core.hpp"
#include "resched/process_model.hpp"

using namespace resched;

namespace {

LtiSystem benchmark_system() {
    LtiSystem sys;
    sys.A.resize(2, 2);
    sys.A << 1.2, 1.0, 0.0, 0.8;
    sys.C = Eigen::MatrixXd::Identity(2, 2);
    sys.Sigma_w = Eigen::MatrixXd::Identity(2, 2);
    sys.Sigma_v = Eigen::MatrixXd::Identity(2, 2);
    return sys;
}

std::vector<double> benchmark_traces(int M) {
    const LtiSystem sys = benchmark_system();
    return cost_ladder(sys, steady_state_covariance(sys), M).traces;
}

}  // namespace

TEST_CASE("transition stencils") {
    Transition t = transition(3, 1, 10, 0.7);
    REQUIRE(t.count == 2);
    CHECK(t.next[0] == 0);
    CHECK(t.prob[0] == doctest::Approx(0.7));
    CHECK(t.next[1] == 4);
    CHECK(t.prob[1] == doctest::Approx(0.3));

    t = transition(10, 1, 10, 0.7);  // saturated holding time
    REQUIRE(t.count == 2);
    CHECK(t.next[0] == 0);
    CHECK(t.next[1] == 10);

    t = transition(5, 0, 10, 0.7);
    REQUIRE(t.count == 1);
    CHECK(t.next[0] == 6);
    CHECK(t.prob[0] == doctest::Approx(1.0));

    t = transition(10, 0, 10, 0.7);
    REQUIRE(t.count == 1);
    CHECK(t.next[0] == 10);
}

TEST_CASE("stage cost adds the price only when transmitting") {
    const std::vector<double> traces = {2.0, 3.0, 4.0};
    CHECK(stage_cost(1, 0, 5.0, traces) == doctest::Approx(3.0));
    CHECK(stage_cost(1, 1, 5.0, traces) == doctest::Approx(8.0));
    CHECK_THROWS_AS(stage_cost(3, 0, 5.0, traces), StateOutOfRange);
}

TEST_CASE("solver reproduces the frozen optima") {
    const std::vector<double> tr30 = benchmark_traces(30);

    SolveResult s = relative_value_iteration({30, 0.7, 20.0, tr30}, 1e-11);
    CHECK(s.converged);
    CHECK(s.j_star == doctest::Approx(16.441116029693).epsilon(1e-8));
    CHECK(extract_threshold(greedy_policy(s)) == 2);

    s = relative_value_iteration({30, 0.9, 10.0, tr30}, 1e-11);
    CHECK(s.j_star == doctest::Approx(8.381941685231).epsilon(1e-8));
    CHECK(extract_threshold(greedy_policy(s)) == 1);

    s = relative_value_iteration({30, 0.6, 10.0, tr30}, 1e-11);
    CHECK(s.j_star == doctest::Approx(13.642779681568).epsilon(1e-8));
    CHECK(extract_threshold(greedy_policy(s)) == 1);

    const std::vector<double> tr10 = benchmark_traces(10);
    s = relative_value_iteration({10, 0.7, 20.0, tr10}, 1e-11);
    CHECK(s.j_star == doctest::Approx(16.436088888167).epsilon(1e-8));
    CHECK(extract_threshold(greedy_policy(s)) == 2);
}

TEST_CASE("free transmissions make always-transmit optimal") {
    const SolveResult s = relative_value_iteration({10, 0.8, 0.0, benchmark_traces(10)}, 1e-11);
    CHECK(extract_threshold(greedy_policy(s)) == 0);
}

TEST_CASE("iteration exhaustion returns the flagged best iterate") {
    const SolveResult s =
        relative_value_iteration({10, 0.7, 20.0, benchmark_traces(10)}, 1e-15, 5);
    CHECK_FALSE(s.converged);
    CHECK(s.iterations == 5);
    CHECK(s.residual > 1e-15);
}

TEST_CASE("solution satisfies the fixed-point equations") {
    const std::vector<double> tr = benchmark_traces(10);
    const TruncatedMdp mdp{10, 0.7, 20.0, tr};
    const SolveResult s = relative_value_iteration(mdp, 1e-12);
    for (int tau = 0; tau <= 10; ++tau)
        for (int a = 0; a < 2; ++a) {
            const Transition t = transition(tau, a, 10, 0.7);
            double rhs = stage_cost(tau, a, 20.0, tr);
            for (int i = 0; i < t.count; ++i) rhs += t.prob[i] * s.q.value(t.next[i]);
            CHECK(std::abs(rhs - s.q.at(tau, a) - s.j_star) < 1e-8);
        }
}

TEST_CASE("greedy policy breaks ties toward holding") {
    QTable q(2);
    q.at(1, 0) = 5.0;
    q.at(1, 1) = 5.0;
    CHECK(greedy_policy(q)[1] == 0);
}

TEST_CASE("threshold extraction") {
    CHECK(extract_threshold({0, 0, 1, 1}) == 2);
    CHECK(extract_threshold({1, 1, 1}) == 0);
    CHECK(extract_threshold({0, 0}) == 2);  // never transmits: one past the end
    CHECK(extract_threshold({0, 1, 0, 1}) == kNotThreshold);
    CHECK(extract_threshold({1, 0}) == kNotThreshold);
}

TEST_CASE("structure report flags violations with their magnitude") {
    QTable good(3);
    for (int tau = 0; tau <= 3; ++tau) {
        good.at(tau, 0) = tau * tau;          // convex increasing
        good.at(tau, 1) = tau * tau + 3 - tau;  // advantage shrinks with tau
    }
    const StructureReport ok = check_structure(good);
    CHECK(ok.monotone_v);
    CHECK(ok.monotone_q);
    CHECK(ok.submodular_q);
    CHECK(ok.max_violation <= 0.0);

    QTable bad = good;
    bad.at(2, 0) = 0.0;  // breaks monotonicity in tau
    const StructureReport rep = check_structure(bad);
    CHECK_FALSE(rep.monotone_q);
    CHECK(rep.max_violation > 1.0);

    const QTable trivial(0);
    CHECK(check_structure(trivial).max_violation == 0.0);
}

TEST_CASE("analytic policy value at the reference point") {
    const LtiSystem sys = benchmark_system();
    TraceExtender ext(sys, steady_state_covariance(sys));
    const auto [j_e, j_r] = policy_value_analytic({2, 6.0 / 7.0}, 0.7, ext);
    CHECK(j_r == doctest::Approx(0.4).epsilon(1e-12));
    CHECK(j_e == doctest::Approx(8.995718004648888).epsilon(1e-9));
}

TEST_CASE("perfect channel with zero threshold pins the chain at zero") {
    const LtiSystem sys = benchmark_system();
    TraceExtender ext(sys, steady_state_covariance(sys));
    const auto [j_e, j_r] = policy_value_analytic({0, 1.0}, 1.0, ext);
    CHECK(j_e == doctest::Approx(1.289041470990220).epsilon(1e-10));
    CHECK(j_r == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("tail divergence is reported, not summed") {
    // rho(A)^2 (1 - r_s) = 1.44 * 0.98 > 1: the stationary tail cannot
    // contract and the long-run cost is unbounded.
    const LtiSystem sys = benchmark_system();
    TraceExtender ext(sys, steady_state_covariance(sys));
    CHECK_THROWS_AS(policy_value_analytic({0, 1.0}, 0.02, ext), DivergentTail);
}

TEST_CASE("enumeration agrees with the solver on the frozen grid") {
    const std::vector<double> tr = benchmark_traces(10);
    const double grid_rs[4] = {0.3, 0.5, 0.7, 0.9};
    const double grid_lam[4] = {0.0, 5.0, 20.0, 100.0};
    const int expected_theta[4][4] = {
        {0, 0, 0, 2}, {0, 0, 1, 3}, {0, 1, 2, 3}, {0, 1, 2, 3}};
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) {
            const TruncatedMdp mdp{10, grid_rs[i], grid_lam[j], tr};
            const auto [policy, cost] = brute_force_optimal(mdp);
            const SolveResult s = relative_value_iteration(mdp, 1e-12);
            CHECK(std::abs(cost - s.j_star) / cost < 1e-6);
            CHECK(extract_threshold(policy) == expected_theta[i][j]);

            const auto [p2, c2] = brute_force_optimal_parallel(mdp);
            CHECK(p2 == policy);
            CHECK(c2 == cost);
        }
}

TEST_CASE("price at the known tie point yields the tie cost") {
    const std::vector<double> tr = benchmark_traces(10);
    const auto [policy, cost] = brute_force_optimal({10, 1.0, 13.420231660125, tr});
    CHECK(cost == doctest::Approx(9.409995721329).epsilon(1e-9));
    (void)policy;
}

TEST_CASE("enumeration refuses oversized chains") {
    CHECK_THROWS_AS(brute_force_optimal({15, 0.7, 20.0, std::vector<double>(16, 1.0)}),
                    TooLarge);
}

TEST_CASE("single Bellman sweep from zero prices transmission out") {
    const std::vector<double> tr = benchmark_traces(10);
    QTable q(10);
    bellman_sweeps(q, tr, 0.7, 20.0, 1);
    // The sweep subtracts the previous table's reference entry (zero here),
    // so the first iterate is exactly the stage cost.
    for (int tau = 0; tau <= 10; ++tau) {
        CHECK(q.at(tau, 0) == doctest::Approx(tr[tau]).epsilon(1e-12));
        CHECK(q.at(tau, 1) == doctest::Approx(tr[tau] + 20.0).epsilon(1e-12));
    }
    // Greedy on this table never transmits -- the one-sweep pathology.
    for (int action : greedy_policy(q)) CHECK(action == 0);
}

TEST_CASE("enough sweeps from zero recover the solver's policy") {
    const std::vector<double> tr = benchmark_traces(10);
    QTable q(10);
    bellman_sweeps(q, tr, 0.7, 20.0, 300);
    const SolveResult s = relative_value_iteration({10, 0.7, 20.0, tr}, 1e-12);
    CHECK(greedy_policy(q) == greedy_policy(s));
    CHECK(q.ref() == doctest::Approx(s.j_star).epsilon(1e-6));
}
