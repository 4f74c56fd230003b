#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "resched/rng.hpp"

namespace resched {

// Piecewise-constant success probability: ordered segments, first start 0.
struct ChannelSegment {
    long start = 0;
    double r_s = 1.0;
};

struct ChannelSchedule {
    std::vector<ChannelSegment> segments;

    void validate() const;
    double at(long k) const;

    static ChannelSchedule constant(double r_s) { return ChannelSchedule{{{0, r_s}}}; }
};

// a = 0 never delivers; a = 1 delivers iff u < r_s(k).
int channel_draw(const ChannelSchedule& schedule, long k, int a, double u);

// Uniform draws handed to a controller each step, one per named stream, so
// adding or ignoring draws in one place never shifts another stream.
struct StepDraws {
    double explore1 = 0.0;
    double explore2 = 0.0;
    double policy = 0.0;
};

// A scheduler in the loop: fixed policy or learner. act() sees the holding
// time before the decision; observe() sees the full sampled transition and
// is where learners update.
class Controller {
  public:
    virtual ~Controller() = default;
    virtual int act(long k, int tau, const StepDraws& draws) = 0;
    virtual void observe(long k, int tau, int a, int eta, int tau_next) {}

    // Optional per-step report fields for the trace.
    virtual std::optional<double> lambda_value() const { return std::nullopt; }
    virtual std::optional<double> channel_estimate() const { return std::nullopt; }
    // Cumulative compute in Bellman-sweep equivalents (one sweep = one
    // update of every (tau, a) entry).
    virtual double sweep_equivalents() const { return 0.0; }
};

struct StepRecord {
    long k = 0;
    int tau = 0;  // holding time before the decision
    int a = 0;
    int eta = 0;
    double cost_e = 0.0;
    std::optional<double> lambda_k;
    std::optional<double> r_hat;
};

struct Trace {
    std::vector<StepRecord> steps;
    std::uint64_t seed = 0;
    std::string config_digest;
    int M = 0;
    long window = 1;  // T_w used for the windowed CSV columns
    // Prefix sums over cost_e and a, length steps+1, for O(1) metrics.
    std::vector<double> cum_cost;
    std::vector<double> cum_act;
};

// Run the closed loop for T steps from tau(0) = 0. Per step: present tau(k),
// obtain a(k), draw eta from the channel stream, record cost traces[tau(k)],
// advance tau. Bit-reproducible given (seed, schedule, controller).
Trace run(Controller& controller, const ChannelSchedule& schedule, long T, std::uint64_t seed,
          int M, const std::vector<double>& traces, long window = 1,
          const std::string& config_digest = "");

// Prefix averages (J_e, J_r) at step k.
std::pair<double, double> empirical_metrics(const Trace& trace, long k);

// Sliding-window averages: full prefix for k < T_w, else the last T_w steps.
std::pair<double, double> sliding_metrics(const Trace& trace, long k, long T_w);

// CSV with header k,tau,a,eta,cost_e,J_e_emp,J_r_emp,J_e_win,J_r_win,lambda,r_hat
// (12 significant digits, absent fields empty), preceded by a comment line
// stamping the config digest and seed.
void write_trace_csv(const Trace& trace, const std::string& path);

}  // namespace resched
