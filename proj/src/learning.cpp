#include "resched/learning.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

#include "resched/errors.hpp"

namespace resched {

double StepSchedule::operator()(long n) const {
    if (n < 0) throw std::invalid_argument("schedule index must be nonnegative");
    const double x = static_cast<double>(n);
    switch (kind) {
        case Kind::power:
            return c / std::pow(1.0 + x, a);
        case Kind::log_over_n:
            return c * std::log(x + 2.0) / (x + 2.0);
        case Kind::one_over_n_log_n:
            return c / ((x + 2.0) * std::log(x + 2.0));
    }
    throw std::logic_error("unreachable schedule kind");
}

AdmissibilityReport check_admissible(const StepSchedule& s) {
    if (s.c <= 0.0) throw std::invalid_argument("schedule scale must be positive");
    AdmissibilityReport report;

    // Divergence of the linear sum: decade partial sums must keep adding
    // mass rather than collapsing geometrically.
    const long probes[3] = {10000, 100000, 1000000};
    double partial[3] = {0.0, 0.0, 0.0};
    double sum = 0.0;
    long next = 0;
    for (int p = 0; p < 3; ++p) {
        for (long n = next; n < probes[p]; ++n) sum += s(n);
        next = probes[p];
        partial[p] = sum;
    }
    const double inc1 = partial[1] - partial[0];
    const double inc2 = partial[2] - partial[1];
    bool shape_ok = true;
    if (s.kind == StepSchedule::Kind::power) shape_ok = s.a > 0.5 && s.a <= 1.0;
    report.sum_diverges = shape_ok && inc2 > 0.3 * inc1 && inc2 > 0.0;

    // Squared-sum tail beyond the last probe, bounded analytically: summing
    // cannot certify it (the power-kind tail reaches 1e-6 only after ~1e21
    // terms at a = 0.65).
    const double N = static_cast<double>(probes[2]);
    double tail = 0.0;
    bool square_ok = false;
    switch (s.kind) {
        case StepSchedule::Kind::power:
            square_ok = s.a > 0.5;
            tail = square_ok ? s.c * s.c * std::pow(N, 1.0 - 2.0 * s.a) / (2.0 * s.a - 1.0)
                             : std::numeric_limits<double>::infinity();
            break;
        case StepSchedule::Kind::log_over_n: {
            const double ln = std::log(N);
            tail = s.c * s.c * (ln * ln + 2.0 * ln + 2.0) / N;
            square_ok = true;
            break;
        }
        case StepSchedule::Kind::one_over_n_log_n:
            tail = s.c * s.c / std::log(N);
            square_ok = true;
            break;
    }
    report.square_sum_converges = square_ok && std::isfinite(tail);
    report.square_tail_bound = tail;
    return report;
}

bool ratio_vanishes(const StepSchedule& beta, const StepSchedule& alpha) {
    // beta(n)/alpha(n) must decrease toward 0; probe across nine decades.
    double prev = beta(1000) / alpha(1000);
    const double first = prev;
    for (long n = 10000; n <= 1000000000000L; n *= 100) {
        const double r = beta(n) / alpha(n);
        if (r >= prev) return false;
        prev = r;
    }
    return prev < 0.01 * first;
}

ConstraintMatrices build_constraints(int M) {
    if (M < 1) throw std::invalid_argument("constraints need M >= 1");
    ConstraintMatrices T;
    T.M = M;
    T.rows.reserve(3 * M);
    for (int tau = 0; tau < M; ++tau) {
        // [q(tau,1) - q(tau,0)] - [q(tau+1,1) - q(tau+1,0)] >= 0
        T.rows.push_back({{QTable::index(tau, 0), -1.0},
                          {QTable::index(tau, 1), 1.0},
                          {QTable::index(tau + 1, 0), 1.0},
                          {QTable::index(tau + 1, 1), -1.0}});
    }
    for (int tau = 0; tau < M; ++tau)
        for (int a = 0; a < 2; ++a)
            // q(tau+1, a) - q(tau, a) >= 0
            T.rows.push_back({{QTable::index(tau, a), -1.0}, {QTable::index(tau + 1, a), 1.0}});
    return T;
}

std::vector<double> apply_constraints(const ConstraintMatrices& T, const std::vector<double>& q) {
    std::vector<double> out(T.rows.size(), 0.0);
    for (std::size_t r = 0; r < T.rows.size(); ++r) {
        double acc = 0.0;
        for (const auto& [col, coef] : T.rows[r]) acc += coef * q[col];
        out[r] = acc;
    }
    return out;
}

double correction_at(const ConstraintMatrices& T, const std::vector<double>& mu, int index) {
    double acc = 0.0;
    for (std::size_t r = 0; r < T.rows.size(); ++r)
        for (const auto& [col, coef] : T.rows[r])
            if (col == index) acc += coef * mu[r];
    return acc;
}

void add_correction(const ConstraintMatrices& T, const std::vector<double>& mu, double scale,
                    std::vector<double>& q) {
    for (std::size_t r = 0; r < T.rows.size(); ++r)
        for (const auto& [col, coef] : T.rows[r]) q[col] += scale * coef * mu[r];
}

int epsilon_greedy(const QTable& q, int tau, double epsilon, double u1, double u2) {
    if (epsilon < 0.0 || epsilon > 1.0) throw std::invalid_argument("epsilon must be in [0,1]");
    if (tau < 0 || tau > q.M) throw StateOutOfRange("tau outside the table");
    if (u1 < epsilon) return u2 < 0.5 ? 0 : 1;
    return q.at(tau, 1) < q.at(tau, 0) ? 1 : 0;
}

namespace {
void check_sample(const LearnerState& s, int tau, int a, int tau_next) {
    if (tau < 0 || tau > s.q.M || tau_next < 0 || tau_next > s.q.M)
        throw StateOutOfRange("sampled holding times outside the table");
    if (a != 0 && a != 1) throw StateOutOfRange("action must be 0 or 1");
}
}  // namespace

void async_update(LearnerState& s, const std::vector<double>& traces, double lambda, int tau,
                  int a, int tau_next) {
    check_sample(s, tau, a, tau_next);
    const int idx = QTable::index(tau, a);
    const double step = s.alpha(s.q.visits[idx]);
    const double bracket = stage_cost(tau, a, lambda, traces) + s.q.value(tau_next) -
                           s.q.q[idx] - s.q.ref();
    s.q.q[idx] += step * bracket;
    s.q.visits[idx] += 1;
}

void structured_update(LearnerState& s, const ConstraintMatrices& T,
                       const std::vector<double>& traces, double lambda, int tau, int a,
                       int tau_next, long k, const StructuredOptions& opt) {
    check_sample(s, tau, a, tau_next);
    const std::vector<double> tq = apply_constraints(T, s.q.q);  // reads the pre-update table

    const int idx = QTable::index(tau, a);
    const double step = s.alpha(s.q.visits[idx]);
    const double corr = opt.vector_correction ? 0.0 : correction_at(T, s.mu, idx);
    const double bracket = stage_cost(tau, a, lambda, traces) + s.q.value(tau_next) -
                           s.q.q[idx] - s.q.ref() + corr;
    s.q.q[idx] += step * bracket;
    s.q.visits[idx] += 1;

    const double dual_step = s.alpha(k);
    if (opt.vector_correction) add_correction(T, s.mu, dual_step, s.q.q);
    for (std::size_t r = 0; r < s.mu.size(); ++r) s.mu[r] -= dual_step * tq[r];
    if (opt.project_dual)
        for (double& m : s.mu) m = std::max(0.0, m);
}

void sync_update(LearnerState& s, const std::vector<double>& traces, double lambda, int a_k,
                 int eta, const SyncOptions& opt) {
    const int M = s.q.M;
    if (a_k != 0 && a_k != 1) throw StateOutOfRange("action must be 0 or 1");
    std::vector<double> v(M + 1);
    for (int tau = 0; tau <= M; ++tau) v[tau] = s.q.value(tau);
    const double ref = s.q.ref();
    const bool update_tx = a_k == 1;
    const bool update_idle = a_k == 0 || opt.idle_every_step;
    if (update_tx) {
        const double step = s.alpha(s.n_tx);
        for (int tau = 0; tau <= M; ++tau) {
            const int nxt = eta ? 0 : std::min(tau + 1, M);
            double& entry = s.q.q[QTable::index(tau, 1)];
            entry += step * (traces[tau] + lambda + v[nxt] - entry - ref);
        }
        ++s.n_tx;
    }
    if (update_idle) {
        const double step = s.alpha(s.n_idle);
        for (int tau = 0; tau <= M; ++tau) {
            double& entry = s.q.q[QTable::index(tau, 0)];
            entry += step * (traces[tau] + v[std::min(tau + 1, M)] - entry - ref);
        }
        ++s.n_idle;
    }
}

void sync_structured_update(LearnerState& s, const ConstraintMatrices& T,
                            const std::vector<double>& traces, double lambda, int a_k, int eta,
                            long k, const StructuredOptions& sopt, const SyncOptions& yopt) {
    const std::vector<double> tq = apply_constraints(T, s.q.q);
    sync_update(s, traces, lambda, a_k, eta, yopt);
    // A synchronous step has no single visited pair, so the constraint
    // correction always applies to the whole table.
    const double dual_step = s.alpha(k);
    add_correction(T, s.mu, dual_step, s.q.q);
    for (std::size_t r = 0; r < s.mu.size(); ++r) s.mu[r] -= dual_step * tq[r];
    if (sopt.project_dual)
        for (double& m : s.mu) m = std::max(0.0, m);
}

void lambda_update(LearnerState& s, int a_k, double b, long k) {
    if (b <= 0.0 || b > 1.0) throw InvalidBudget("budget must lie in (0,1]");
    s.lambda = std::max(0.0, s.lambda + s.beta(k) * (static_cast<double>(a_k) - b));
}

double mle_estimate(long n_s, long n_f) {
    if (n_s < 0 || n_f < 0) throw std::invalid_argument("negative sample counts");
    if (n_s + n_f == 0) throw NoSamples("no transmissions observed yet");
    return static_cast<double>(n_s) / static_cast<double>(n_s + n_f);
}

RandomizedThresholdPolicy parameter_policy_p2(double r_hat, double b) {
    return constrained_optimal_policy(r_hat, b);
}

int certainty_equivalent_p1_step(LearnerState& s, const std::vector<double>& traces,
                                 double lambda, int tau,
                                 const CertaintyEquivalentOptions& opt) {
    if (opt.x_iters < 1) throw std::invalid_argument("x_iters must be >= 1");
    if (s.n_s < 1) throw NoSamples("channel initialization incomplete (no success yet)");
    if (tau < 0 || tau > s.q.M) throw StateOutOfRange("tau outside the table");
    const double r_hat = mle_estimate(s.n_s, s.n_f);
    if (!opt.warm_start) std::fill(s.q.q.begin(), s.q.q.end(), 0.0);
    bellman_sweeps(s.q, traces, r_hat, lambda, opt.x_iters);
    return s.q.at(tau, 1) < s.q.at(tau, 0) ? 1 : 0;
}

Algorithm algorithm_from_token(const std::string& token, long* x_iters_out) {
    if (token == "async") return Algorithm::async;
    if (token == "structured") return Algorithm::structured;
    if (token == "sync") return Algorithm::sync;
    if (token == "sync+structured" || token == "sync_structured")
        return Algorithm::sync_structured;
    if (token == "two_time_scale") return Algorithm::two_time_scale;
    if (token == "param_p2") return Algorithm::param_p2;
    if (token == "mdp_x") return Algorithm::mdp_x;
    if (token.rfind("mdp_", 0) == 0) {
        const std::string digits = token.substr(4);
        if (!digits.empty() &&
            digits.find_first_not_of("0123456789") == std::string::npos) {
            if (x_iters_out) *x_iters_out = std::stol(digits);
            return Algorithm::mdp_x;
        }
    }
    throw std::invalid_argument("unknown algorithm token: " + token);
}

std::string algorithm_token(Algorithm a) {
    switch (a) {
        case Algorithm::async: return "async";
        case Algorithm::structured: return "structured";
        case Algorithm::sync: return "sync";
        case Algorithm::sync_structured: return "sync_structured";
        case Algorithm::two_time_scale: return "two_time_scale";
        case Algorithm::param_p2: return "param_p2";
        case Algorithm::mdp_x: return "mdp_x";
    }
    throw std::logic_error("unreachable algorithm");
}

double LearnerOptions::resolved_epsilon() const {
    if (epsilon) return *epsilon;
    Algorithm effective = algo == Algorithm::two_time_scale ? tts_inner : algo;
    switch (effective) {
        case Algorithm::async:
        case Algorithm::structured:
            return 0.1;
        default:
            return 0.0;  // synchronous halves update without exploration
    }
}

namespace {

// Acting rule for the two-time-scale constrained mode. A policy that is
// greedy on the table alone cannot hold the long-run rate at b — its rate
// is a step function of the price, and b generally falls between steps —
// so once the learned threshold cell can meet the budget exactly, the
// boundary action is randomized with the probability that does so under
// the current channel estimate. Until then (and before the first success,
// when no estimate exists) the rule acts greedily: the over- or
// under-budget transmissions of that phase are exactly what drives the
// price into the correct cell.
int budget_act(const LearnerState& state, double b, int M, int tau, const StepDraws& d) {
    if (state.n_s == 0) return 1;
    int theta = M + 1;
    for (int t = 0; t <= M; ++t) {
        if (state.q.at(t, 1) < state.q.at(t, 0)) {
            theta = t;
            break;
        }
    }
    if (theta <= M) {
        const double r_hat = mle_estimate(state.n_s, state.n_f);
        const double boundary = static_cast<double>(theta) + 1.0 + (b - 1.0) / (b * r_hat);
        if (boundary > 0.0 && boundary <= 1.0)
            return decide(RandomizedThresholdPolicy{theta, boundary}, tau, d.policy);
    }
    return epsilon_greedy(state.q, tau, state.epsilon, d.explore1, d.explore2);
}

class QLearnController : public Controller, public LearnerReport {
  public:
    QLearnController(const LearnerOptions& opt, std::vector<double> traces, bool structured,
                     bool two_scale)
        : opt_(opt),
          traces_(std::move(traces)),
          state_(opt.M),
          constraints_(build_constraints(opt.M)),
          structured_(structured),
          two_scale_(two_scale) {
        state_.alpha = opt.alpha;
        state_.beta = opt.beta;
        state_.epsilon = opt.resolved_epsilon();
        state_.lambda = opt.lambda;
    }

    int act(long, int tau, const StepDraws& d) override {
        if (two_scale_) return budget_act(state_, opt_.b, opt_.M, tau, d);
        return epsilon_greedy(state_.q, tau, state_.epsilon, d.explore1, d.explore2);
    }

    void observe(long k, int tau, int a, int eta, int tau_next) override {
        if (a == 1) {
            state_.n_s += eta;
            state_.n_f += 1 - eta;
        }
        if (structured_)
            structured_update(state_, constraints_, traces_, state_.lambda, tau, a, tau_next, k,
                              opt_.structured);
        else
            async_update(state_, traces_, state_.lambda, tau, a, tau_next);
        if (two_scale_) lambda_update(state_, a, opt_.b, k);
        ++steps_;
    }

    std::optional<double> lambda_value() const override {
        return two_scale_ ? std::optional<double>(state_.lambda) : std::nullopt;
    }
    std::optional<double> channel_estimate() const override {
        if (!two_scale_ || state_.n_s + state_.n_f == 0) return std::nullopt;
        return mle_estimate(state_.n_s, state_.n_f);
    }
    double sweep_equivalents() const override {
        return static_cast<double>(steps_) / (2.0 * (opt_.M + 1));
    }
    const QTable* q_table() const override { return &state_.q; }
    std::optional<long> threshold_estimate() const override {
        const int th = extract_threshold(greedy_policy(state_.q));
        return th == kNotThreshold ? std::nullopt : std::optional<long>(th);
    }

  private:
    LearnerOptions opt_;
    std::vector<double> traces_;
    LearnerState state_;
    ConstraintMatrices constraints_;
    bool structured_;
    bool two_scale_;
    long steps_ = 0;
};

class SyncQController : public Controller, public LearnerReport {
  public:
    SyncQController(const LearnerOptions& opt, std::vector<double> traces, bool structured,
                    bool two_scale)
        : opt_(opt),
          traces_(std::move(traces)),
          state_(opt.M),
          constraints_(build_constraints(opt.M)),
          structured_(structured),
          two_scale_(two_scale) {
        state_.alpha = opt.alpha;
        state_.beta = opt.beta;
        state_.epsilon = opt.resolved_epsilon();
        state_.lambda = opt.lambda;
    }

    int act(long, int tau, const StepDraws& d) override {
        if (two_scale_) return budget_act(state_, opt_.b, opt_.M, tau, d);
        return epsilon_greedy(state_.q, tau, state_.epsilon, d.explore1, d.explore2);
    }

    void observe(long k, int tau, int a, int eta, int) override {
        (void)tau;
        if (a == 1) {
            state_.n_s += eta;
            state_.n_f += 1 - eta;
        }
        if (structured_)
            sync_structured_update(state_, constraints_, traces_, state_.lambda, a, eta, k,
                                   opt_.structured, opt_.sync);
        else
            sync_update(state_, traces_, state_.lambda, a, eta, opt_.sync);
        if (two_scale_) lambda_update(state_, a, opt_.b, k);
        sweeps_ += (a == 1 && opt_.sync.idle_every_step) ? 1.0 : 0.5;
    }

    std::optional<double> lambda_value() const override {
        return two_scale_ ? std::optional<double>(state_.lambda) : std::nullopt;
    }
    std::optional<double> channel_estimate() const override {
        if (!two_scale_ || state_.n_s + state_.n_f == 0) return std::nullopt;
        return mle_estimate(state_.n_s, state_.n_f);
    }
    double sweep_equivalents() const override { return sweeps_; }
    const QTable* q_table() const override { return &state_.q; }
    std::optional<long> threshold_estimate() const override {
        const int th = extract_threshold(greedy_policy(state_.q));
        return th == kNotThreshold ? std::nullopt : std::optional<long>(th);
    }

  private:
    LearnerOptions opt_;
    std::vector<double> traces_;
    LearnerState state_;
    ConstraintMatrices constraints_;
    bool structured_;
    bool two_scale_;
    double sweeps_ = 0.0;
};

class ParamP2Controller : public Controller, public LearnerReport {
  public:
    ParamP2Controller(const LearnerOptions& opt, std::vector<double> traces)
        : opt_(opt), traces_(std::move(traces)), state_(opt.M) {}

    int act(long, int tau, const StepDraws& d) override {
        if (state_.n_s == 0) return 1;  // keep transmitting until the first success
        RandomizedThresholdPolicy p = current_policy();
        return decide(p, tau, d.policy);
    }

    void observe(long, int, int a, int eta, int) override {
        if (a == 1) {
            state_.n_s += eta;
            state_.n_f += 1 - eta;
        }
    }

    std::optional<double> channel_estimate() const override {
        if (state_.n_s + state_.n_f == 0) return std::nullopt;
        return mle_estimate(state_.n_s, state_.n_f);
    }
    const QTable* q_table() const override { return nullptr; }
    std::optional<long> threshold_estimate() const override {
        if (state_.n_s == 0) return std::nullopt;
        return current_policy().theta;
    }

  private:
    RandomizedThresholdPolicy current_policy() const {
        RandomizedThresholdPolicy p =
            parameter_policy_p2(mle_estimate(state_.n_s, state_.n_f), opt_.b);
        if (p.theta > opt_.M) {
            if (!warned_) {
                std::fprintf(stderr,
                             "warning: budget threshold %ld clipped to truncation level %d\n",
                             p.theta, opt_.M);
                warned_ = true;
            }
            p.theta = opt_.M;
        }
        return p;
    }

    LearnerOptions opt_;
    std::vector<double> traces_;
    LearnerState state_;
    mutable bool warned_ = false;
};

class MdpXController : public Controller, public LearnerReport {
  public:
    MdpXController(const LearnerOptions& opt, std::vector<double> traces)
        : opt_(opt), traces_(std::move(traces)), state_(opt.M) {}

    int act(long, int tau, const StepDraws&) override {
        if (state_.n_s == 0) return 1;
        const int a = certainty_equivalent_p1_step(state_, traces_, opt_.lambda, tau,
                                                   {opt_.x_iters, opt_.warm_start});
        sweeps_ += static_cast<double>(opt_.x_iters);
        return a;
    }

    void observe(long, int, int a, int eta, int) override {
        if (a == 1) {
            state_.n_s += eta;
            state_.n_f += 1 - eta;
        }
    }

    std::optional<double> channel_estimate() const override {
        if (state_.n_s + state_.n_f == 0) return std::nullopt;
        return mle_estimate(state_.n_s, state_.n_f);
    }
    double sweep_equivalents() const override { return sweeps_; }
    const QTable* q_table() const override { return &state_.q; }
    std::optional<long> threshold_estimate() const override {
        const int th = extract_threshold(greedy_policy(state_.q));
        return th == kNotThreshold ? std::nullopt : std::optional<long>(th);
    }

  private:
    LearnerOptions opt_;
    std::vector<double> traces_;
    LearnerState state_;
    double sweeps_ = 0.0;
};

class FixedPolicyController : public Controller {
  public:
    explicit FixedPolicyController(const RandomizedThresholdPolicy& policy) : policy_(policy) {}
    int act(long, int tau, const StepDraws& d) override { return decide(policy_, tau, d.policy); }

  private:
    RandomizedThresholdPolicy policy_;
};

}  // namespace

std::unique_ptr<Controller> make_learning_controller(const LearnerOptions& opt,
                                                     const std::vector<double>& traces) {
    if (traces.size() != static_cast<std::size_t>(opt.M) + 1)
        throw DimensionMismatch("traces length must be M+1");
    switch (opt.algo) {
        case Algorithm::async:
            return std::make_unique<QLearnController>(opt, traces, false, false);
        case Algorithm::structured:
            return std::make_unique<QLearnController>(opt, traces, true, false);
        case Algorithm::sync:
            return std::make_unique<SyncQController>(opt, traces, false, false);
        case Algorithm::sync_structured:
            return std::make_unique<SyncQController>(opt, traces, true, false);
        case Algorithm::two_time_scale:
            switch (opt.tts_inner) {
                case Algorithm::async:
                    return std::make_unique<QLearnController>(opt, traces, false, true);
                case Algorithm::structured:
                    return std::make_unique<QLearnController>(opt, traces, true, true);
                case Algorithm::sync:
                    return std::make_unique<SyncQController>(opt, traces, false, true);
                case Algorithm::sync_structured:
                    return std::make_unique<SyncQController>(opt, traces, true, true);
                default:
                    throw std::invalid_argument("two_time_scale inner loop must be a Q-learner");
            }
        case Algorithm::param_p2:
            return std::make_unique<ParamP2Controller>(opt, traces);
        case Algorithm::mdp_x:
            return std::make_unique<MdpXController>(opt, traces);
    }
    throw std::logic_error("unreachable algorithm");
}

std::unique_ptr<Controller> make_policy_controller(const RandomizedThresholdPolicy& policy) {
    return std::make_unique<FixedPolicyController>(policy);
}

}  // namespace resched
