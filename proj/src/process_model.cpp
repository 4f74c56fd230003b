#include "resched/process_model.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <string>

#include "resched/errors.hpp"

namespace resched {

namespace {

void require_square(const Eigen::MatrixXd& m, const char* name) {
    if (m.rows() != m.cols())
        throw DimensionMismatch(std::string(name) + " must be square, got " +
                                std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
}

void require_symmetric(const Eigen::MatrixXd& m, const char* name) {
    const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale)
        throw std::invalid_argument(std::string(name) + " is not symmetric");
}

double min_eigenvalue(const Eigen::MatrixXd& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

}  // namespace

void LtiSystem::validate() const {
    require_square(A, "A");
    require_square(Sigma_w, "Sigma_w");
    require_square(Sigma_v, "Sigma_v");
    if (Sigma_w.rows() != A.rows())
        throw DimensionMismatch("Sigma_w dimension does not match A");
    if (C.cols() != A.rows())
        throw DimensionMismatch("C column count does not match A");
    if (Sigma_v.rows() != C.rows())
        throw DimensionMismatch("Sigma_v dimension does not match C rows");
    require_symmetric(Sigma_w, "Sigma_w");
    require_symmetric(Sigma_v, "Sigma_v");
    const double w_scale = std::max(1.0, Sigma_w.cwiseAbs().maxCoeff());
    if (min_eigenvalue(Sigma_w) < -1e-9 * w_scale)
        throw std::invalid_argument("Sigma_w is not positive semidefinite");
    if (min_eigenvalue(Sigma_v) <= 0.0)
        throw std::invalid_argument("Sigma_v is not positive definite");
}

Eigen::MatrixXd steady_state_covariance(const LtiSystem& sys, double tol, long max_iter) {
    sys.validate();
    if (tol <= 0.0) throw std::invalid_argument("tol must be positive");
    const int n = sys.n();
    const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
    Eigen::MatrixXd post = Eigen::MatrixXd::Zero(n, n);
    double diff = 0.0;
    for (long it = 0; it < max_iter; ++it) {
        Eigen::MatrixXd pred = sys.A * post * sys.A.transpose() + sys.Sigma_w;
        Eigen::MatrixXd s = sys.C * pred * sys.C.transpose() + sys.Sigma_v;
        Eigen::MatrixXd gain = s.ldlt().solve(sys.C * pred.transpose()).transpose();
        Eigen::MatrixXd next = (I - gain * sys.C) * pred;
        next = 0.5 * (next + next.transpose()).eval();
        diff = (next - post).cwiseAbs().maxCoeff();
        post = next;
        if (diff < tol) return post;
    }
    throw NonConvergence("steady_state_covariance: fixed point not reached", diff);
}

Eigen::MatrixXd error_covariance(const LtiSystem& sys, const Eigen::MatrixXd& p_bar, long tau) {
    if (tau < 0) throw std::invalid_argument("tau must be nonnegative");
    if (p_bar.rows() != sys.A.rows() || p_bar.cols() != sys.A.cols())
        throw DimensionMismatch("p_bar dimension does not match A");
    Eigen::MatrixXd p = p_bar;
    for (long t = 0; t < tau; ++t) p = sys.A * p * sys.A.transpose() + sys.Sigma_w;
    return p;
}

CovarianceLadder cost_ladder(const LtiSystem& sys, const Eigen::MatrixXd& p_bar, int M,
                             double magnitude_cap) {
    if (M < 0) throw std::invalid_argument("M must be nonnegative");
    CovarianceLadder ladder;
    ladder.p_bar = p_bar;
    ladder.M = M;
    ladder.traces.reserve(M + 1);
    Eigen::MatrixXd p = p_bar;
    for (int tau = 0; tau <= M; ++tau) {
        if (tau > 0) p = sys.A * p * sys.A.transpose() + sys.Sigma_w;
        const double tr = p.trace();
        if (!(std::abs(tr) <= magnitude_cap))
            throw UnstableLadder("trace exceeded magnitude cap at tau=" + std::to_string(tau) +
                                 "; lower M or check stability_margin");
        ladder.traces.push_back(tr);
    }
    return ladder;
}

double stability_margin(const LtiSystem& sys, double r_s) {
    if (r_s < 0.0 || r_s > 1.0) throw std::invalid_argument("r_s must be in [0,1]");
    Eigen::EigenSolver<Eigen::MatrixXd> es(sys.A, false);
    const double rho = es.eigenvalues().cwiseAbs().maxCoeff();
    return rho * rho * (1.0 - r_s);
}

TraceExtender::TraceExtender(const LtiSystem& sys, const Eigen::MatrixXd& p_bar,
                             double magnitude_cap)
    : a_(sys.A), sigma_w_(sys.Sigma_w), p_(p_bar), cap_(magnitude_cap) {
    traces_.push_back(p_bar.trace());
}

double TraceExtender::operator[](std::size_t tau) {
    while (traces_.size() <= tau) {
        p_ = a_ * p_ * a_.transpose() + sigma_w_;
        const double tr = p_.trace();
        if (!(std::abs(tr) <= cap_))
            throw UnstableLadder("trace exceeded magnitude cap at tau=" +
                                 std::to_string(traces_.size()));
        traces_.push_back(tr);
    }
    return traces_[tau];
}

}  // namespace resched
