#include "resched/channel_sim.hpp"

#include <algorithm>
#include <cstdio>
#include <stdexcept>

#include "resched/errors.hpp"

namespace resched {

void ChannelSchedule::validate() const {
    if (segments.empty()) throw std::invalid_argument("channel schedule needs >= 1 segment");
    if (segments.front().start != 0)
        throw std::invalid_argument("first channel segment must start at step 0");
    for (std::size_t i = 0; i < segments.size(); ++i) {
        if (segments[i].r_s < 0.0 || segments[i].r_s > 1.0)
            throw std::invalid_argument("segment r_s must be in [0,1]");
        if (i > 0 && segments[i].start <= segments[i - 1].start)
            throw std::invalid_argument("segment starts must be strictly increasing");
    }
}

double ChannelSchedule::at(long k) const {
    double r = segments.front().r_s;
    for (const auto& seg : segments) {
        if (seg.start > k) break;
        r = seg.r_s;
    }
    return r;
}

int channel_draw(const ChannelSchedule& schedule, long k, int a, double u) {
    if (a == 0) return 0;
    return u < schedule.at(k) ? 1 : 0;
}

Trace run(Controller& controller, const ChannelSchedule& schedule, long T, std::uint64_t seed,
          int M, const std::vector<double>& traces, long window,
          const std::string& config_digest) {
    if (T < 1) throw std::invalid_argument("T must be >= 1");
    if (window < 1) throw std::invalid_argument("window must be >= 1");
    if (traces.size() < static_cast<std::size_t>(M) + 1)
        throw DimensionMismatch("traces shorter than M+1");
    schedule.validate();

    const CounterRng channel_rng(seed, RngStream::channel);
    const CounterRng explore_rng(seed, RngStream::exploration);
    const CounterRng policy_rng(seed, RngStream::policy_randomization);

    Trace trace;
    trace.seed = seed;
    trace.config_digest = config_digest;
    trace.M = M;
    trace.window = window;
    trace.steps.reserve(T);
    trace.cum_cost.reserve(T + 1);
    trace.cum_act.reserve(T + 1);
    trace.cum_cost.push_back(0.0);
    trace.cum_act.push_back(0.0);

    int tau = 0;
    for (long k = 0; k < T; ++k) {
        StepDraws draws;
        draws.explore1 = explore_rng.uniform(2 * static_cast<std::uint64_t>(k));
        draws.explore2 = explore_rng.uniform(2 * static_cast<std::uint64_t>(k) + 1);
        draws.policy = policy_rng.uniform(static_cast<std::uint64_t>(k));

        const int a = controller.act(k, tau, draws);
        if (a != 0 && a != 1) throw std::invalid_argument("controller returned a non-action");
        const int eta = channel_draw(schedule, k, a, channel_rng.uniform(k));
        const int tau_next = (a == 1 && eta == 1) ? 0 : std::min(tau + 1, M);
        controller.observe(k, tau, a, eta, tau_next);

        StepRecord rec;
        rec.k = k;
        rec.tau = tau;
        rec.a = a;
        rec.eta = eta;
        rec.cost_e = traces[tau];
        rec.lambda_k = controller.lambda_value();
        rec.r_hat = controller.channel_estimate();
        trace.steps.push_back(rec);
        trace.cum_cost.push_back(trace.cum_cost.back() + rec.cost_e);
        trace.cum_act.push_back(trace.cum_act.back() + a);

        tau = tau_next;
    }
    return trace;
}

std::pair<double, double> empirical_metrics(const Trace& trace, long k) {
    if (k < 0 || static_cast<std::size_t>(k) >= trace.steps.size())
        throw std::out_of_range("step index outside trace");
    const double n = static_cast<double>(k + 1);
    return {trace.cum_cost[k + 1] / n, trace.cum_act[k + 1] / n};
}

std::pair<double, double> sliding_metrics(const Trace& trace, long k, long T_w) {
    if (T_w < 1) throw std::invalid_argument("window must be >= 1");
    if (k < 0 || static_cast<std::size_t>(k) >= trace.steps.size())
        throw std::out_of_range("step index outside trace");
    if (k < T_w) return empirical_metrics(trace, k);
    const double n = static_cast<double>(T_w);
    const long lo = k - T_w + 1;
    return {(trace.cum_cost[k + 1] - trace.cum_cost[lo]) / n,
            (trace.cum_act[k + 1] - trace.cum_act[lo]) / n};
}

void write_trace_csv(const Trace& trace, const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw std::runtime_error("cannot open " + path + " for writing");
    std::fprintf(f, "# config %s seed %llu\n", trace.config_digest.c_str(),
                 static_cast<unsigned long long>(trace.seed));
    std::fprintf(f, "k,tau,a,eta,cost_e,J_e_emp,J_r_emp,J_e_win,J_r_win,lambda,r_hat\n");
    for (const auto& rec : trace.steps) {
        const auto emp = empirical_metrics(trace, rec.k);
        const auto win = sliding_metrics(trace, rec.k, trace.window);
        std::fprintf(f, "%ld,%d,%d,%d,%.12g,%.12g,%.12g,%.12g,%.12g,", rec.k, rec.tau, rec.a,
                     rec.eta, rec.cost_e, emp.first, emp.second, win.first, win.second);
        if (rec.lambda_k) std::fprintf(f, "%.12g", *rec.lambda_k);
        std::fputc(',', f);
        if (rec.r_hat) std::fprintf(f, "%.12g", *rec.r_hat);
        std::fputc('\n', f);
    }
    if (std::fclose(f) != 0) throw std::runtime_error("write failed for " + path);
}

}  // namespace resched
