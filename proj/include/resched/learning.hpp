#pragma once

#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "resched/channel_sim.hpp"
#include "resched/mdp_core.hpp"
#include "resched/policy.hpp"

namespace resched {

// Robbins-Monro step-size schedules. power: c/(1+n)^a with a in (0.5, 1];
// log_over_n: c*log(n+2)/(n+2); one_over_n_log_n: c/((n+2)*log(n+2)).
struct StepSchedule {
    enum class Kind { power, log_over_n, one_over_n_log_n };
    Kind kind = Kind::power;
    double c = 1.0;
    double a = 0.65;  // exponent, power kind only

    double operator()(long n) const;
};

// Divergence of the partial sums is checked numerically over decade
// milestones; convergence of the squared sums uses the analytic integral
// tail bound (a brute-force sum cannot certify a 1e-6 tail for a = 0.65 --
// that tail only drops below 1e-6 after ~1e21 terms).
struct AdmissibilityReport {
    bool sum_diverges = false;
    bool square_sum_converges = false;
    double square_tail_bound = 0.0;  // bound on the tail beyond the probe point
};
AdmissibilityReport check_admissible(const StepSchedule& s);

// beta(n)/alpha(n) -> 0, required of a two-time-scale pair.
bool ratio_vanishes(const StepSchedule& beta, const StepSchedule& alpha);

// Sparse stencils encoding the structural constraints T q >= 0 on the
// stacked table: rows 0..M-1 are decreasing-differences rows
// [q(t,1)-q(t,0)] - [q(t+1,1)-q(t+1,0)], rows M..3M-1 are monotone rows
// q(t+1,a) - q(t,a) ordered (t,a) -> M + 2t + a.
struct ConstraintMatrices {
    int M = 0;
    std::vector<std::vector<std::pair<int, double>>> rows;

    int n_rows() const { return 3 * M; }
};
ConstraintMatrices build_constraints(int M);

// T q (length 3M).
std::vector<double> apply_constraints(const ConstraintMatrices& T, const std::vector<double>& q);
// (T^T mu) at one stacked index.
double correction_at(const ConstraintMatrices& T, const std::vector<double>& mu, int index);
// q += scale * T^T mu over the whole table.
void add_correction(const ConstraintMatrices& T, const std::vector<double>& mu, double scale,
                    std::vector<double>& q);

struct StructuredOptions {
    // Clamp the dual to mu >= 0 after each step. Off by default: the
    // update equations as given carry no projection.
    bool project_dual = false;
    // Apply the constraint correction T^T mu to the whole table at the
    // dual's clock instead of only at the visited pair. Off by default;
    // the visited-pair form is the literal update rule. The whole-table
    // form is the one whose mean dynamics the convergence argument
    // actually analyzes, and the only one stable at desk horizons when
    // visitation is far from uniform (see README).
    bool vector_correction = false;
};

struct SyncOptions {
    // Also refresh the idle half on transmit steps (its transition is
    // deterministic, so a sample is never needed). Off by default: each
    // step updates only the half matching the taken action.
    bool idle_every_step = false;
};

// Shared mutable state for all learners; single-owner, one per simulation.
struct LearnerState {
    QTable q;
    std::vector<double> mu;  // dual variables, length 3M, structured mode
    double lambda = 0.0;     // communication price (learned in two-time-scale mode)
    long n_s = 0, n_f = 0;   // channel success/failure counts (a = 1 steps only)
    double epsilon = 0.1;
    StepSchedule alpha{};
    StepSchedule beta{StepSchedule::Kind::power, 0.5, 0.9};
    long n_tx = 0, n_idle = 0;  // synchronous update counters

    explicit LearnerState(int M) : q(M), mu(3 * static_cast<std::size_t>(M), 0.0) {}
};

// With probability 1-eps the greedy action (ties toward 0), else uniform.
int epsilon_greedy(const QTable& q, int tau, double epsilon, double u1, double u2);

// One-entry temporal-difference step on the visited pair, stepped by the
// per-pair visit clock.
void async_update(LearnerState& s, const std::vector<double>& traces, double lambda, int tau,
                  int a, int tau_next);

// Primal-dual step: the async update plus a constraint correction, and the
// dual descent mu -= alpha(k) T q at the global clock k.
void structured_update(LearnerState& s, const ConstraintMatrices& T,
                       const std::vector<double>& traces, double lambda, int tau, int a,
                       int tau_next, long k, const StructuredOptions& opt = {});

// Virtual-model update of a whole action half: on a transmit step every
// (tau, 1) entry shares the observed eta; on an idle step every (tau, 0)
// entry advances deterministically. Separate counters n_tx / n_idle clock
// the two halves.
void sync_update(LearnerState& s, const std::vector<double>& traces, double lambda, int a_k,
                 int eta, const SyncOptions& opt = {});

// Synchronous step with the structural correction and dual descent bolted
// on (the constraint pass reads the pre-update table).
void sync_structured_update(LearnerState& s, const ConstraintMatrices& T,
                            const std::vector<double>& traces, double lambda, int a_k, int eta,
                            long k, const StructuredOptions& sopt = {},
                            const SyncOptions& yopt = {});

// Slow-scale price ascent lambda <- max(0, lambda + beta(k) (a_k - b)).
void lambda_update(LearnerState& s, int a_k, double b, long k);

// n_s / (n_s + n_f); throws NoSamples when no transmission was observed.
double mle_estimate(long n_s, long n_f);

// Certainty-equivalent budget policy: the closed form evaluated at the
// current channel estimate.
RandomizedThresholdPolicy parameter_policy_p2(double r_hat, double b);

struct CertaintyEquivalentOptions {
    long x_iters = 1;
    // Restart the sweep table from zero each step (default). Warm start
    // composes sweeps across steps instead -- with it, two steps at
    // x_iters=1 and an unchanged estimate equal one step at x_iters=2.
    bool warm_start = false;
};

// Rebuild the MDP at the current estimate, run exactly x_iters Bellman
// sweeps, act greedily at tau. Requires n_s >= 1 (initialization done).
int certainty_equivalent_p1_step(LearnerState& s, const std::vector<double>& traces,
                                 double lambda, int tau,
                                 const CertaintyEquivalentOptions& opt = {});

enum class Algorithm {
    async,
    structured,
    sync,
    sync_structured,
    two_time_scale,
    param_p2,
    mdp_x,
};

Algorithm algorithm_from_token(const std::string& token, long* x_iters_out = nullptr);
std::string algorithm_token(Algorithm a);

struct LearnerOptions {
    Algorithm algo = Algorithm::async;
    int M = 30;
    std::optional<double> epsilon;  // default 0.1 (async/structured), 0 (sync family)
    StepSchedule alpha{StepSchedule::Kind::power, 1.0, 0.65};
    StepSchedule beta{StepSchedule::Kind::power, 0.5, 0.9};
    StructuredOptions structured;
    SyncOptions sync;
    Algorithm tts_inner = Algorithm::sync;  // inner loop of two_time_scale
    long x_iters = 1;
    bool warm_start = false;
    double lambda = 0.0;  // fixed price (costly) or initial price (two-time-scale)
    double b = 0.0;       // budget (constrained problems)

    double resolved_epsilon() const;
};

// A Controller wrapping the selected learner; owns a copy of the traces.
std::unique_ptr<Controller> make_learning_controller(const LearnerOptions& opt,
                                                     const std::vector<double>& traces);

// A Controller executing a fixed randomized threshold policy.
std::unique_ptr<Controller> make_policy_controller(const RandomizedThresholdPolicy& policy);

// Peek interfaces for summaries: every learning controller also implements
// this (dynamic_cast from Controller).
class LearnerReport {
  public:
    virtual ~LearnerReport() = default;
    virtual const QTable* q_table() const = 0;
    virtual std::optional<long> threshold_estimate() const = 0;
};

}  // namespace resched
