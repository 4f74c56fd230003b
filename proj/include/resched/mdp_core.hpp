#pragma once

#include <array>
#include <utility>
#include <vector>

#include "resched/policy.hpp"
#include "resched/process_model.hpp"

namespace resched {

// Truncated average-cost MDP over holding times {0..M} with actions
// {0 = idle, 1 = transmit}. Stage cost traces[tau] + lambda * a.
struct TruncatedMdp {
    int M = 0;
    double r_s = 1.0;
    double lambda = 0.0;
    std::vector<double> traces;  // length M+1

    void validate() const;
};

// Sparse next-state distribution: at most two successors.
struct Transition {
    std::array<int, 2> next{};
    std::array<double, 2> prob{};
    int count = 0;
};

// a = 1 -> {0: r_s, min(tau+1, M): 1-r_s}; a = 0 -> {min(tau+1, M): 1}.
Transition transition(int tau, int a, int M, double r_s);

double stage_cost(int tau, int a, double lambda, const std::vector<double>& traces);

// Stacked Q-factors, layout [Q(0,0), Q(0,1), ..., Q(M,0), Q(M,1)], with
// per-pair visit counters and the normalization reference pair.
struct QTable {
    std::vector<double> q;
    std::vector<long> visits;
    int M = 0;
    std::pair<int, int> ref_pair{0, 0};

    explicit QTable(int M_ = 0)
        : q(2 * (M_ + 1), 0.0), visits(2 * (M_ + 1), 0), M(M_) {}

    static int index(int tau, int a) { return 2 * tau + a; }
    double& at(int tau, int a) { return q[index(tau, a)]; }
    double at(int tau, int a) const { return q[index(tau, a)]; }
    double ref() const { return q[index(ref_pair.first, ref_pair.second)]; }
    double value(int tau) const { return std::min(q[2 * tau], q[2 * tau + 1]); }
};

struct SolveResult {
    QTable q;
    double j_star = 0.0;
    std::vector<double> v;   // v[tau] = min_a Q(tau, a)
    long iterations = 0;
    double residual = 0.0;
    bool converged = false;  // false: best iterate returned, flagged
};

// Relative value iteration on Q-factors: each sweep applies the Bellman
// operator and subtracts the reference entry; the subtracted value at
// convergence is the optimal average cost j_star. Does not throw on
// iteration exhaustion -- returns the flagged best iterate instead.
SolveResult relative_value_iteration(const TruncatedMdp& mdp, double tol = 1e-10,
                                     long max_iter = 1000000);

// Exactly `sweeps` reference-subtracted Bellman sweeps applied in place --
// the single-iteration building block of relative_value_iteration, exposed
// for budgeted certainty-equivalent solvers.
void bellman_sweeps(QTable& q, const std::vector<double>& traces, double r_s, double lambda,
                    long sweeps);

// argmin_a Q(tau, a), ties broken toward a = 0 (idle).
std::vector<int> greedy_policy(const QTable& q);
std::vector<int> greedy_policy(const SolveResult& result);

// For a policy of the form [0...0 1...1] returns the index of the first 1;
// all-zeros returns M+1 ("never transmits within range"); any other pattern
// returns kNotThreshold. Not-a-threshold is a value, not an error.
inline constexpr int kNotThreshold = -1;
int extract_threshold(const std::vector<int>& policy);

// Monotone value, monotone Q in tau, and submodularity (adjacent decreasing
// differences). max_violation is the worst signed violation magnitude over
// all constraints: positive means violated, zero/negative is the tightest
// margin of a feasible table.
struct StructureReport {
    bool monotone_v = false;
    bool monotone_q = false;
    bool submodular_q = false;
    double max_violation = 0.0;
};
StructureReport check_structure(const QTable& q, double slack = 1e-9);

// Exact long-run (J_e, J_r) of a randomized threshold policy on the
// *untruncated* chain, from its stationary distribution; the geometric tail
// is summed until the relative increment drops below tail_tol, extending
// traces on demand. Throws DivergentTail when the tail does not contract.
std::pair<double, double> policy_value_analytic(const RandomizedThresholdPolicy& policy,
                                                double r_s, TraceExtender& traces,
                                                double tail_tol = 1e-12);

// Independent oracle: enumerate all 2^(M+1) deterministic stationary
// policies, evaluate each exactly via the stationary distribution of its
// induced chain (policies that can reach the absorbing never-transmit tail
// cost +infinity), return the minimizer of J_e + lambda * J_r.
// Throws TooLarge for M > 14.
std::pair<std::vector<int>, double> brute_force_optimal(const TruncatedMdp& mdp);

// Same result computed with an OpenMP-parallel enumeration (falls back to
// the serial path without OpenMP); kept separate so tests can assert the
// two agree bitwise.
std::pair<std::vector<int>, double> brute_force_optimal_parallel(const TruncatedMdp& mdp);

}  // namespace resched
