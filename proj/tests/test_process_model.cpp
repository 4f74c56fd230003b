#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "resched/errors.hpp"
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

LtiSystem scalar_system(double a) {
    LtiSystem sys;
    sys.A = Eigen::MatrixXd::Constant(1, 1, a);
    sys.C = Eigen::MatrixXd::Identity(1, 1);
    sys.Sigma_w = Eigen::MatrixXd::Identity(1, 1);
    sys.Sigma_v = Eigen::MatrixXd::Identity(1, 1);
    return sys;
}

}  // namespace

TEST_CASE("steady-state covariance of the benchmark plant") {
    const LtiSystem sys = benchmark_system();
    const Eigen::MatrixXd p = steady_state_covariance(sys);
    CHECK(p.trace() == doctest::Approx(1.289041470990220).epsilon(1e-12));
    CHECK(p(0, 0) == doctest::Approx(0.72533312).epsilon(1e-7));
    CHECK(p(0, 1) == doctest::Approx(0.05906538).epsilon(1e-6));
    CHECK(p(1, 0) == doctest::Approx(p(0, 1)).epsilon(1e-12));
    CHECK(p(1, 1) == doctest::Approx(0.56370835).epsilon(1e-7));
}

TEST_CASE("scalar fixed point has the closed-form root") {
    // P = (A^2 P + 1) / (A^2 P + 2) at A = 0.5 solves P^2 + 7P - 4 = 0.
    const Eigen::MatrixXd p = steady_state_covariance(scalar_system(0.5));
    CHECK(p(0, 0) == doctest::Approx((-7.0 + std::sqrt(65.0)) / 2.0).epsilon(1e-12));
}

TEST_CASE("memoryless plant halves the prior") {
    LtiSystem sys = benchmark_system();
    sys.A.setZero();
    const Eigen::MatrixXd p = steady_state_covariance(sys);
    CHECK(p(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(p(1, 1) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(std::abs(p(0, 1)) < 1e-12);
}

TEST_CASE("covariance propagation is linear in tau for a random walk") {
    const LtiSystem sys = scalar_system(1.0);
    const Eigen::MatrixXd p0 = Eigen::MatrixXd::Constant(1, 1, 2.0);
    for (long tau : {0L, 1L, 2L, 3L})
        CHECK(error_covariance(sys, p0, tau)(0, 0) ==
              doctest::Approx(2.0 + tau).epsilon(1e-12));

    const CovarianceLadder ladder = cost_ladder(sys, p0, 3);
    REQUIRE(ladder.traces.size() == 4);
    CHECK(ladder.traces[0] == doctest::Approx(2.0));
    CHECK(ladder.traces[3] == doctest::Approx(5.0));
}

TEST_CASE("benchmark cost ladder matches the frozen rungs") {
    const LtiSystem sys = benchmark_system();
    const Eigen::MatrixXd p = steady_state_covariance(sys);
    const CovarianceLadder ladder = cost_ladder(sys, p, 30);
    const double expected[9] = {1.28904147099,  4.11071831154, 9.40999572133,
                                19.7069280673,  38.0406302876, 68.4129791771,
                                116.349909978,  189.66000298,  299.495057325};
    for (int i = 0; i < 9; ++i)
        CHECK(ladder.traces[i] == doctest::Approx(expected[i]).epsilon(1e-9));
    CHECK(ladder.traces[30] == doctest::Approx(1184268.13066).epsilon(1e-9));
    for (int i = 1; i <= 30; ++i) CHECK(ladder.traces[i] > ladder.traces[i - 1]);
}

TEST_CASE("ladder refuses to run past the magnitude cap") {
    const LtiSystem sys = benchmark_system();
    const Eigen::MatrixXd p = steady_state_covariance(sys);
    CHECK_THROWS_AS(cost_ladder(sys, p, 100, 1e6), UnstableLadder);
}

TEST_CASE("stability margin") {
    const LtiSystem sys = benchmark_system();  // rho(A) = 1.2
    CHECK(stability_margin(sys, 0.7) == doctest::Approx(1.44 * 0.3).epsilon(1e-12));
    CHECK(stability_margin(sys, 0.2) > 1.0);
    CHECK(stability_margin(sys, 1.0) == doctest::Approx(0.0));
}

TEST_CASE("unobservable unstable plant does not converge") {
    LtiSystem sys = scalar_system(2.0);
    sys.C.setZero();
    CHECK_THROWS_AS(steady_state_covariance(sys, 1e-12, 2000), NonConvergence);
}

TEST_CASE("dimension validation") {
    LtiSystem sys = benchmark_system();
    sys.C.resize(1, 3);
    sys.C << 1.0, 0.0, 0.0;
    CHECK_THROWS_AS(sys.validate(), DimensionMismatch);

    LtiSystem sys2 = benchmark_system();
    sys2.Sigma_w = Eigen::MatrixXd::Identity(3, 3);
    CHECK_THROWS_AS(sys2.validate(), DimensionMismatch);
}

TEST_CASE("trace extender matches the eager ladder and grows on demand") {
    const LtiSystem sys = benchmark_system();
    const Eigen::MatrixXd p = steady_state_covariance(sys);
    TraceExtender ext(sys, p);
    const CovarianceLadder ladder = cost_ladder(sys, p, 35);
    CHECK(ext[0] == doctest::Approx(ladder.traces[0]).epsilon(1e-12));
    CHECK(ext[35] == doctest::Approx(ladder.traces[35]).epsilon(1e-12));
    CHECK(ext.computed() >= 36);
}
