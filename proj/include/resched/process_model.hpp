#pragma once

#include <Eigen/Dense>
#include <vector>

namespace resched {

// Linear process x+ = A x + w observed through y = C x + v; the scheduler
// never simulates x itself, only the error-covariance ladder derived here.
struct LtiSystem {
    Eigen::MatrixXd A;
    Eigen::MatrixXd C;
    Eigen::MatrixXd Sigma_w;
    Eigen::MatrixXd Sigma_v;

    int n() const { return static_cast<int>(A.rows()); }

    // Shape consistency, symmetry to 1e-9 relative tolerance, eigenvalue
    // sign checks (Sigma_w PSD, Sigma_v PD). Throws DimensionMismatch or
    // std::invalid_argument.
    void validate() const;
};

struct CovarianceLadder {
    Eigen::MatrixXd p_bar;
    std::vector<double> traces;  // traces[tau] = Tr(P(tau)), tau = 0..M
    int M = 0;
};

// Steady-state a-posteriori Kalman covariance: fixed-point iteration of the
// prediction/update recursion from 0, symmetrized each step. Throws
// NonConvergence when max_iter is exhausted (detectability/stabilizability
// violation is the usual cause).
Eigen::MatrixXd steady_state_covariance(const LtiSystem& sys, double tol = 1e-12,
                                        long max_iter = 100000);

// P(tau): p_bar at tau = 0, then the recursion P(t) = A P(t-1) A^T + Sigma_w.
Eigen::MatrixXd error_covariance(const LtiSystem& sys, const Eigen::MatrixXd& p_bar, long tau);

// Trace ladder for tau = 0..M. Throws UnstableLadder if any entry exceeds
// magnitude_cap -- surface instability early instead of propagating
// infinities into solvers.
CovarianceLadder cost_ladder(const LtiSystem& sys, const Eigen::MatrixXd& p_bar, int M,
                             double magnitude_cap = 1e12);

// rho(A)^2 * (1 - r_s); values >= 1 mean the average cost may be unbounded.
double stability_margin(const LtiSystem& sys, double r_s);

// Lazily extends the trace ladder past any fixed M; used by analytic policy
// evaluation whose geometric tails run beyond the truncated chain.
class TraceExtender {
  public:
    TraceExtender(const LtiSystem& sys, const Eigen::MatrixXd& p_bar,
                  double magnitude_cap = 1e12);

    // Trace of P(tau), extending the ladder on demand.
    double operator[](std::size_t tau);

    std::size_t computed() const { return traces_.size(); }

  private:
    Eigen::MatrixXd a_;
    Eigen::MatrixXd sigma_w_;
    Eigen::MatrixXd p_;  // last computed rung
    std::vector<double> traces_;
    double cap_;
};

}  // namespace resched
