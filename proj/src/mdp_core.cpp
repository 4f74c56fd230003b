#include "resched/mdp_core.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "resched/errors.hpp"

namespace resched {

void TruncatedMdp::validate() const {
    if (M < 0) throw std::invalid_argument("M must be nonnegative");
    if (r_s < 0.0 || r_s > 1.0) throw std::invalid_argument("r_s must be in [0,1]");
    if (lambda < 0.0) throw std::invalid_argument("lambda must be nonnegative");
    if (traces.size() != static_cast<std::size_t>(M) + 1)
        throw DimensionMismatch("traces length must be M+1");
}

Transition transition(int tau, int a, int M, double r_s) {
    if (M < 0) throw std::invalid_argument("M must be nonnegative");
    if (tau < 0 || tau > M)
        throw StateOutOfRange("tau " + std::to_string(tau) + " outside {0..," +
                              std::to_string(M) + "}");
    if (a != 0 && a != 1) throw StateOutOfRange("action must be 0 or 1");
    const int up = std::min(tau + 1, M);
    Transition t;
    if (a == 0) {
        t.next[0] = up;
        t.prob[0] = 1.0;
        t.count = 1;
    } else {
        t.next[0] = 0;
        t.prob[0] = r_s;
        t.next[1] = up;
        t.prob[1] = 1.0 - r_s;
        t.count = 2;
    }
    return t;
}

double stage_cost(int tau, int a, double lambda, const std::vector<double>& traces) {
    if (tau < 0 || static_cast<std::size_t>(tau) >= traces.size())
        throw StateOutOfRange("tau outside the trace ladder");
    return traces[tau] + lambda * a;
}

SolveResult relative_value_iteration(const TruncatedMdp& mdp, double tol, long max_iter) {
    mdp.validate();
    if (tol <= 0.0) throw std::invalid_argument("tol must be positive");
    const int M = mdp.M;
    SolveResult result;
    result.q = QTable(M);
    QTable next(M);
    QTable best(M);
    double best_residual = std::numeric_limits<double>::infinity();

    std::vector<double> v(M + 1, 0.0);
    for (long it = 1; it <= max_iter; ++it) {
        for (int tau = 0; tau <= M; ++tau) v[tau] = result.q.value(tau);
        const double ref = result.q.ref();
        double residual = 0.0;
        for (int tau = 0; tau <= M; ++tau) {
            const int up = std::min(tau + 1, M);
            const double c0 = mdp.traces[tau];
            const double n0 = c0 + v[up] - ref;
            const double n1 = c0 + mdp.lambda + mdp.r_s * v[0] + (1.0 - mdp.r_s) * v[up] - ref;
            residual = std::max(residual, std::abs(n0 - result.q.at(tau, 0)));
            residual = std::max(residual, std::abs(n1 - result.q.at(tau, 1)));
            next.at(tau, 0) = n0;
            next.at(tau, 1) = n1;
        }
        std::swap(result.q.q, next.q);
        result.iterations = it;
        result.residual = residual;
        if (residual < best_residual) {
            best_residual = residual;
            best.q = result.q.q;
        }
        if (residual <= tol) {
            result.converged = true;
            break;
        }
    }
    if (!result.converged) {
        result.q.q = best.q;
        result.residual = best_residual;
    }
    result.j_star = result.q.ref();
    result.v.resize(M + 1);
    for (int tau = 0; tau <= M; ++tau) result.v[tau] = result.q.value(tau);
    return result;
}

void bellman_sweeps(QTable& q, const std::vector<double>& traces, double r_s, double lambda,
                    long sweeps) {
    const int M = q.M;
    if (traces.size() != static_cast<std::size_t>(M) + 1)
        throw DimensionMismatch("traces length must be M+1");
    std::vector<double> v(M + 1);
    std::vector<double> next(2 * (M + 1));
    for (long it = 0; it < sweeps; ++it) {
        for (int tau = 0; tau <= M; ++tau) v[tau] = q.value(tau);
        const double ref = q.ref();
        for (int tau = 0; tau <= M; ++tau) {
            const int up = std::min(tau + 1, M);
            next[QTable::index(tau, 0)] = traces[tau] + v[up] - ref;
            next[QTable::index(tau, 1)] =
                traces[tau] + lambda + r_s * v[0] + (1.0 - r_s) * v[up] - ref;
        }
        q.q.swap(next);
    }
}

std::vector<int> greedy_policy(const QTable& q) {
    std::vector<int> policy(q.M + 1);
    for (int tau = 0; tau <= q.M; ++tau)
        policy[tau] = q.at(tau, 1) < q.at(tau, 0) ? 1 : 0;
    return policy;
}

std::vector<int> greedy_policy(const SolveResult& result) { return greedy_policy(result.q); }

int extract_threshold(const std::vector<int>& policy) {
    const int n = static_cast<int>(policy.size());
    int first_one = n;  // all-zeros sentinel: never transmits within range
    for (int tau = 0; tau < n; ++tau) {
        if (policy[tau] != 0 && policy[tau] != 1)
            throw std::invalid_argument("policy entries must be 0 or 1");
        if (policy[tau] == 1) {
            first_one = tau;
            break;
        }
    }
    for (int tau = first_one; tau < n; ++tau)
        if (policy[tau] != 1) return kNotThreshold;
    return first_one;
}

StructureReport check_structure(const QTable& q, double slack) {
    StructureReport report;
    report.monotone_v = true;
    report.monotone_q = true;
    report.submodular_q = true;
    double worst = -std::numeric_limits<double>::infinity();
    for (int tau = 0; tau < q.M; ++tau) {
        const double dv = q.value(tau + 1) - q.value(tau);
        if (dv < -slack) report.monotone_v = false;
        worst = std::max(worst, -dv);
        for (int a = 0; a < 2; ++a) {
            const double dq = q.at(tau + 1, a) - q.at(tau, a);
            if (dq < -slack) report.monotone_q = false;
            worst = std::max(worst, -dq);
        }
        const double dd = (q.at(tau, 1) - q.at(tau, 0)) - (q.at(tau + 1, 1) - q.at(tau + 1, 0));
        if (dd < -slack) report.submodular_q = false;
        worst = std::max(worst, -dd);
    }
    report.max_violation = (q.M == 0) ? 0.0 : worst;
    return report;
}

std::pair<double, double> policy_value_analytic(const RandomizedThresholdPolicy& policy,
                                                double r_s, TraceExtender& traces,
                                                double tail_tol) {
    if (!(r_s > 0.0) || r_s > 1.0) throw std::invalid_argument("r_s must be in (0,1]");
    if (policy.theta < 0 || policy.r_theta < 0.0 || policy.r_theta > 1.0)
        throw std::invalid_argument("malformed threshold policy");
    if (tail_tol <= 0.0) throw std::invalid_argument("tail_tol must be positive");
    const long theta = policy.theta;
    const double q_fail = 1.0 - r_s;
    // Unnormalized stationary weights: 1 on {0..theta}, then
    // (1 - r_s r_theta) * (1-r_s)^j on theta+1+j.
    const double tail_head = 1.0 - r_s * policy.r_theta;
    const double tail_mass = tail_head / r_s;  // exact geometric sum
    const double mass = static_cast<double>(theta + 1) + tail_mass;
    const double j_r = (policy.r_theta + tail_mass) / mass;

    double cost = 0.0;
    for (long tau = 0; tau <= theta; ++tau) cost += traces[static_cast<std::size_t>(tau)];
    double weight = tail_head;
    double prev_term = std::numeric_limits<double>::infinity();
    int nonshrinking = 0;
    for (long j = 0; weight > 0.0; ++j) {
        const double term = weight * traces[static_cast<std::size_t>(theta + 1 + j)];
        cost += term;
        if (j > 0 && term <= tail_tol * cost) break;
        // Persistently non-shrinking terms mean rho^2(A)(1-r_s) >= 1; the
        // first few terms may grow while the trace ladder is in transient.
        if (j >= 8) {
            if (term >= prev_term * (1.0 - 1e-12)) {
                if (++nonshrinking >= 5)
                    throw DivergentTail("stationary cost tail does not contract");
            } else {
                nonshrinking = 0;
            }
        }
        prev_term = term;
        weight *= q_fail;
    }
    return {cost / mass, j_r};
}

namespace {

// Exact average cost of one deterministic policy on the truncated chain;
// +infinity when the chain can fall into the never-transmit absorbing tail.
double evaluate_policy_mask(const TruncatedMdp& mdp, unsigned long mask) {
    const int n = mdp.M + 1;
    // Reachable set from tau = 0 under the policy.
    std::vector<char> seen(n, 0);
    std::vector<int> stack{0};
    seen[0] = 1;
    while (!stack.empty()) {
        const int s = stack.back();
        stack.pop_back();
        const int a = (mask >> s) & 1u;
        const Transition t = transition(s, a, mdp.M, mdp.r_s);
        for (int i = 0; i < t.count; ++i) {
            if (t.prob[i] > 0.0 && !seen[t.next[i]]) {
                seen[t.next[i]] = 1;
                stack.push_back(t.next[i]);
            }
        }
    }
    if (seen[mdp.M] && ((mask >> mdp.M) & 1u) == 0)
        return std::numeric_limits<double>::infinity();

    std::vector<int> states;
    std::vector<int> pos(n, -1);
    for (int s = 0; s < n; ++s)
        if (seen[s]) {
            pos[s] = static_cast<int>(states.size());
            states.push_back(s);
        }
    const int r = static_cast<int>(states.size());
    // Stationary distribution: pi^T P = pi^T, sum pi = 1.
    Eigen::MatrixXd lhs = Eigen::MatrixXd::Zero(r, r);
    for (int i = 0; i < r; ++i) {
        const int s = states[i];
        const int a = (mask >> s) & 1u;
        const Transition t = transition(s, a, mdp.M, mdp.r_s);
        for (int j = 0; j < t.count; ++j)
            if (t.prob[j] > 0.0) lhs(pos[t.next[j]], i) += t.prob[j];
        lhs(i, i) -= 1.0;
    }
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(r);
    lhs.row(r - 1).setOnes();
    rhs(r - 1) = 1.0;
    const Eigen::VectorXd pi = lhs.fullPivLu().solve(rhs);
    double cost = 0.0;
    for (int i = 0; i < r; ++i) {
        const int s = states[i];
        const int a = (mask >> s) & 1u;
        cost += pi(i) * (mdp.traces[s] + mdp.lambda * a);
    }
    return cost;
}

std::pair<std::vector<int>, double> mask_to_result(const TruncatedMdp& mdp, unsigned long mask,
                                                   double cost) {
    std::vector<int> policy(mdp.M + 1);
    for (int s = 0; s <= mdp.M; ++s) policy[s] = (mask >> s) & 1u;
    return {policy, cost};
}

}  // namespace

std::pair<std::vector<int>, double> brute_force_optimal(const TruncatedMdp& mdp) {
    mdp.validate();
    if (mdp.M > 14) throw TooLarge("brute force capped at M <= 14");
    const unsigned long count = 1ul << (mdp.M + 1);
    unsigned long best_mask = 0;
    double best_cost = std::numeric_limits<double>::infinity();
    for (unsigned long mask = 0; mask < count; ++mask) {
        const double cost = evaluate_policy_mask(mdp, mask);
        if (cost < best_cost) {
            best_cost = cost;
            best_mask = mask;
        }
    }
    return mask_to_result(mdp, best_mask, best_cost);
}

std::pair<std::vector<int>, double> brute_force_optimal_parallel(const TruncatedMdp& mdp) {
    mdp.validate();
    if (mdp.M > 14) throw TooLarge("brute force capped at M <= 14");
    const long count = 1l << (mdp.M + 1);
    unsigned long best_mask = 0;
    double best_cost = std::numeric_limits<double>::infinity();
#ifdef RESCHED_HAVE_OPENMP
#pragma omp parallel
    {
        unsigned long local_mask = 0;
        double local_cost = std::numeric_limits<double>::infinity();
#pragma omp for schedule(static)
        for (long mask = 0; mask < count; ++mask) {
            const double cost = evaluate_policy_mask(mdp, static_cast<unsigned long>(mask));
            if (cost < local_cost ||
                (cost == local_cost && static_cast<unsigned long>(mask) < local_mask)) {
                local_cost = cost;
                local_mask = static_cast<unsigned long>(mask);
            }
        }
#pragma omp critical
        {
            if (local_cost < best_cost || (local_cost == best_cost && local_mask < best_mask)) {
                best_cost = local_cost;
                best_mask = local_mask;
            }
        }
    }
#else
    for (long mask = 0; mask < count; ++mask) {
        const double cost = evaluate_policy_mask(mdp, static_cast<unsigned long>(mask));
        if (cost < best_cost) {
            best_cost = cost;
            best_mask = static_cast<unsigned long>(mask);
        }
    }
#endif
    return mask_to_result(mdp, best_mask, best_cost);
}

}  // namespace resched
