#include "resched/harness.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "resched/errors.hpp"
#include "resched/mdp_core.hpp"

namespace fs = std::filesystem;

namespace resched {

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw std::runtime_error("cannot create output directory " + dir + ": " + ec.message());
}

}  // namespace

int cmd_solve(const ExperimentConfig& cfg, const std::string& out_override) {
    cfg.validate();
    const Eigen::MatrixXd p_bar = steady_state_covariance(cfg.system);
    const CovarianceLadder ladder = cost_ladder(cfg.system, p_bar, cfg.M);
    const double r0 = cfg.channel.at(0);

    std::printf("plant: n=%d, steady-state trace %s\n", static_cast<int>(cfg.system.A.rows()),
                fmt(ladder.traces[0]).c_str());
    if (cfg.channel.segments.size() > 1)
        std::printf("note: time-varying channel; solving at the initial rate %.6g\n", r0);
    std::printf("channel success rate: %.6g\n", r0);
    const double margin = stability_margin(cfg.system, r0);
    std::printf("stability margin rho(A)^2*(1-r_s) = %.6g%s\n", margin,
                margin >= 1.0 ? "  ** >= 1: average cost may be unbounded **" : "");

    std::string out_path = out_override;
    if (out_path.empty()) {
        ensure_dir(cfg.out_dir);
        out_path = cfg.out_dir + "/solve.csv";
    } else if (out_path.find('/') != std::string::npos) {
        ensure_dir(fs::path(out_path).parent_path().string());
    }

    if (cfg.kind == ProblemKind::costly) {
        TruncatedMdp mdp{cfg.M, r0, cfg.lambda, ladder.traces};
        const SolveResult sol = relative_value_iteration(mdp, cfg.solver_tol);
        if (!sol.converged)
            std::printf("** solver did not reach tol %.3g (residual %.3g after %ld sweeps); "
                        "best iterate shown **\n",
                        cfg.solver_tol, sol.residual, sol.iterations);
        const std::vector<int> policy = greedy_policy(sol);
        const int theta = extract_threshold(policy);
        const StructureReport rep = check_structure(sol.q);

        std::printf("optimal average cost: %s\n", fmt(sol.j_star).c_str());
        if (theta == kNotThreshold)
            std::printf("greedy policy is not a threshold rule\n");
        else if (theta == cfg.M + 1)
            std::printf("greedy policy never transmits (threshold beyond truncation)\n");
        else
            std::printf("optimal threshold: %d\n", theta);
        std::printf("structure: value monotone %s, Q monotone %s, submodular %s "
                    "(worst violation %s)\n",
                    rep.monotone_v ? "yes" : "NO", rep.monotone_q ? "yes" : "NO",
                    rep.submodular_q ? "yes" : "NO", fmt(rep.max_violation + 0.0).c_str());
        std::printf("sweeps: %ld, residual %s\n", sol.iterations, fmt(sol.residual).c_str());

        std::ofstream out(out_path);
        if (!out) throw std::runtime_error("cannot write " + out_path);
        out << "tau,Q0,Q1,V,policy\n";
        for (int tau = 0; tau <= cfg.M; ++tau)
            out << tau << ',' << fmt(sol.q.at(tau, 0)) << ',' << fmt(sol.q.at(tau, 1)) << ','
                << fmt(sol.v[tau]) << ',' << policy[tau] << '\n';
        std::printf("wrote %s\n", out_path.c_str());
    } else {
        const RandomizedThresholdPolicy policy = constrained_optimal_policy(r0, cfg.b);
        TraceExtender ext(cfg.system, p_bar);
        const auto [j_e, j_r] = policy_value_analytic(policy, r0, ext);
        std::printf("budget b = %.6g\n", cfg.b);
        std::printf("optimal randomized threshold: theta = %ld, transmit prob at theta = %s\n",
                    policy.theta, fmt(policy.r_theta).c_str());
        std::printf("exact long-run averages: J_e = %s, J_r = %s\n", fmt(j_e).c_str(),
                    fmt(j_r).c_str());
        if (policy.theta > cfg.M)
            std::printf("** threshold exceeds truncation level %d; simulated runs clip it **\n",
                        cfg.M);

        std::ofstream out(out_path);
        if (!out) throw std::runtime_error("cannot write " + out_path);
        out << "tau,transmit_prob\n";
        for (int tau = 0; tau <= cfg.M; ++tau) {
            double p = 0.0;
            if (tau > policy.theta)
                p = 1.0;
            else if (tau == policy.theta)
                p = policy.r_theta;
            out << tau << ',' << fmt(p) << '\n';
        }
        std::printf("wrote %s\n", out_path.c_str());
    }
    return 0;
}

namespace {

struct RunRow {
    std::string label;
    long seed = 0;
    double j_e = 0.0, j_r = 0.0;
    double j_e_win = 0.0, j_r_win = 0.0;
    std::optional<long> threshold;
    std::optional<double> max_violation;
    std::optional<double> lambda_final;
    std::optional<double> r_hat;
    double sweeps = 0.0;
    double wall_ms = 0.0;
    std::string file;
};

std::string opt_num(const std::optional<double>& v) { return v ? fmt(*v) : std::string(); }

}  // namespace

int cmd_learn(const ExperimentConfig& cfg, const std::string& out_override, int workers) {
    cfg.validate();
    if (cfg.algorithms.empty()) throw ConfigError("no [algorithm ...] sections configured");
    const Eigen::MatrixXd p_bar = steady_state_covariance(cfg.system);
    const CovarianceLadder ladder = cost_ladder(cfg.system, p_bar, cfg.M);
    const std::string dir = out_override.empty() ? cfg.out_dir : out_override;
    ensure_dir(dir);
    const std::string digest = config_digest(cfg);

#ifdef _OPENMP
    if (workers > 0) omp_set_num_threads(workers);
#else
    (void)workers;
#endif

    const long n_seeds = static_cast<long>(cfg.seeds.size());
    const long n_runs = static_cast<long>(cfg.algorithms.size()) * n_seeds;
    std::vector<RunRow> rows(n_runs);
    std::vector<std::string> errors(n_runs);

#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
    for (long i = 0; i < n_runs; ++i) {
        const AlgorithmSpec& spec = cfg.algorithms[i / n_seeds];
        const long seed = cfg.seeds[i % n_seeds];
        RunRow& row = rows[i];
        row.label = spec.label;
        row.seed = seed;
        try {
            const auto t0 = std::chrono::steady_clock::now();
            auto controller = make_learning_controller(spec.options, ladder.traces);
            Trace trace = run(*controller, cfg.channel, cfg.T, static_cast<std::uint64_t>(seed),
                              cfg.M, ladder.traces, cfg.window, digest);
            row.wall_ms = std::chrono::duration<double, std::milli>(
                              std::chrono::steady_clock::now() - t0)
                              .count();

            std::tie(row.j_e, row.j_r) = empirical_metrics(trace, cfg.T - 1);
            std::tie(row.j_e_win, row.j_r_win) = sliding_metrics(trace, cfg.T - 1, cfg.window);
            row.sweeps = controller->sweep_equivalents();
            row.lambda_final = controller->lambda_value();
            row.r_hat = controller->channel_estimate();
            if (const auto* rep = dynamic_cast<const LearnerReport*>(controller.get())) {
                row.threshold = rep->threshold_estimate();
                if (const QTable* q = rep->q_table())
                    row.max_violation = check_structure(*q).max_violation;
            }

            row.file = dir + "/" + spec.label + "_seed" + std::to_string(seed) + ".csv";
            const std::string tmp = row.file + ".tmp";
            write_trace_csv(trace, tmp);
            fs::rename(tmp, row.file);
        } catch (const std::exception& e) {
            errors[i] = e.what();
        }
    }

    for (long i = 0; i < n_runs; ++i)
        if (!errors[i].empty())
            throw std::runtime_error("run " + rows[i].label + " seed " +
                                     std::to_string(rows[i].seed) + " failed: " + errors[i]);

    const std::string summary_path = dir + "/summary.csv";
    std::ofstream out(summary_path);
    if (!out) throw std::runtime_error("cannot write " + summary_path);
    out << "algorithm,seed,J_e,J_r,J_e_win,J_r_win,threshold,max_violation,lambda,r_hat,"
           "sweep_equivalents,wall_ms\n";
    for (const RunRow& row : rows) {
        out << row.label << ',' << row.seed << ',' << fmt(row.j_e) << ',' << fmt(row.j_r) << ','
            << fmt(row.j_e_win) << ',' << fmt(row.j_r_win) << ','
            << (row.threshold ? std::to_string(*row.threshold) : std::string()) << ','
            << opt_num(row.max_violation) << ',' << opt_num(row.lambda_final) << ','
            << opt_num(row.r_hat) << ',' << fmt(row.sweeps) << ','
            << fmt(row.wall_ms) << '\n';
    }

    std::printf("%-18s %6s %14s %10s %10s %10s\n", "algorithm", "seed", "J_e", "J_r", "thresh",
                "sweeps");
    for (const RunRow& row : rows)
        std::printf("%-18s %6ld %14s %10s %10s %10s\n", row.label.c_str(), row.seed,
                    fmt(row.j_e).c_str(), fmt(row.j_r).c_str(),
                    row.threshold ? std::to_string(*row.threshold).c_str() : "-",
                    fmt(row.sweeps).c_str());
    std::printf("wrote %ld trace files and %s\n", n_runs, summary_path.c_str());
    return 0;
}

namespace {

// Long-run transmission rate of a randomized threshold policy, from the
// renewal structure of its holding-time chain (independent restatement used
// only by the verifier).
double renewal_comm_rate(const RandomizedThresholdPolicy& p, double r_s) {
    const double residual = (1.0 - r_s * p.r_theta) / r_s;  // expected visits past theta
    const double mass = static_cast<double>(p.theta) + 1.0 + residual;
    return (p.r_theta + residual) / mass;
}

struct Verifier {
    int fails = 0;
    void check(const std::string& name, const std::function<std::pair<bool, std::string>()>& body) {
        bool ok = false;
        std::string detail;
        try {
            std::tie(ok, detail) = body();
        } catch (const std::exception& e) {
            ok = false;
            detail = std::string("exception: ") + e.what();
        }
        std::printf("%-26s %s%s%s\n", name.c_str(), ok ? "ok" : "FAIL",
                    detail.empty() ? "" : "  ", detail.c_str());
        if (!ok) ++fails;
    }
};

}  // namespace

int cmd_verify(bool inject_fault) {
    Verifier v;
    const ExperimentConfig base = default_config();
    const Eigen::MatrixXd p_bar = steady_state_covariance(base.system);
    const CovarianceLadder ladder = cost_ladder(base.system, p_bar, 30);

    v.check("riccati-plugback", [&] {
        const Eigen::MatrixXd& A = base.system.A;
        const Eigen::MatrixXd& C = base.system.C;
        const Eigen::MatrixXd pred = A * p_bar * A.transpose() + base.system.Sigma_w;
        const Eigen::MatrixXd S = C * pred * C.transpose() + base.system.Sigma_v;
        const Eigen::MatrixXd K = pred * C.transpose() * S.inverse();
        const Eigen::MatrixXd post = pred - K * C * pred;
        const double resid = (post - p_bar).cwiseAbs().maxCoeff();
        return std::make_pair(resid < 1e-9, "residual " + fmt(resid));
    });

    v.check("ladder-monotone", [&] {
        for (std::size_t i = 1; i < ladder.traces.size(); ++i)
            if (ladder.traces[i] <= ladder.traces[i - 1])
                return std::make_pair(false, "not increasing at " + std::to_string(i));
        const double d0 = std::abs(ladder.traces[0] - p_bar.trace());
        return std::make_pair(d0 < 1e-12, std::string("rung 0 matches steady state"));
    });

    const double grid_rs[4] = {0.3, 0.5, 0.7, 0.9};
    const double grid_lam[4] = {0.0, 5.0, 20.0, 100.0};
    const CovarianceLadder ladder10 = cost_ladder(base.system, p_bar, 10);

    v.check("solver-structure-grid", [&] {
        double worst = -1e300;
        for (double rs : grid_rs)
            for (double lam : grid_lam) {
                TruncatedMdp mdp{10, rs, lam, ladder10.traces};
                const SolveResult sol = relative_value_iteration(mdp, 1e-12);
                if (!sol.converged) return std::make_pair(false, std::string("solver did not converge"));
                const StructureReport rep = check_structure(sol.q);
                worst = std::max(worst, rep.max_violation);
                if (extract_threshold(greedy_policy(sol)) == kNotThreshold)
                    return std::make_pair(false, std::string("non-threshold optimum"));
            }
        return std::make_pair(worst <= 1e-9, "worst structure violation " + fmt(worst));
    });

    v.check("enumeration-agreement", [&] {
        double worst = 0.0;
        for (double rs : grid_rs)
            for (double lam : grid_lam) {
                TruncatedMdp mdp{10, rs, lam, ladder10.traces};
                const SolveResult sol = relative_value_iteration(mdp, 1e-12);
                const auto [bf_policy, bf_cost] = brute_force_optimal(mdp);
                const auto [par_policy, par_cost] = brute_force_optimal_parallel(mdp);
                if (bf_policy != par_policy || bf_cost != par_cost)
                    return std::make_pair(false, std::string("serial/parallel enumeration disagree"));
                worst = std::max(worst, std::abs(bf_cost - sol.j_star) / bf_cost);
            }
        return std::make_pair(worst <= 1e-6, "worst relative gap " + fmt(worst));
    });

    v.check("budget-grid", [&] {
        double worst = 0.0;
        for (int i = 1; i <= 50; ++i)
            for (int j = 1; j <= 50; ++j) {
                const double rs = i / 50.0;
                const double b = j / 50.0;
                const RandomizedThresholdPolicy p = constrained_optimal_policy(rs, b);
                if (!(p.r_theta > 0.0 && p.r_theta <= 1.0) || p.theta < 0)
                    return std::make_pair(false, "malformed policy at rs=" + fmt(rs) +
                                                     " b=" + fmt(b));
                worst = std::max(worst, std::abs(renewal_comm_rate(p, rs) - b));
            }
        return std::make_pair(worst <= 1e-10, "worst |rate - b| " + fmt(worst));
    });

    v.check("schedule-admissibility", [&] {
        const StepSchedule alpha{StepSchedule::Kind::power, 1.0, 0.65};
        const StepSchedule beta{StepSchedule::Kind::power, 0.5, 0.9};
        const AdmissibilityReport ra = check_admissible(alpha);
        const AdmissibilityReport rb = check_admissible(beta);
        if (!ra.sum_diverges || !ra.square_sum_converges)
            return std::make_pair(false, std::string("default alpha rejected"));
        if (!rb.sum_diverges || !rb.square_sum_converges)
            return std::make_pair(false, std::string("default beta rejected"));
        if (!ratio_vanishes(beta, alpha))
            return std::make_pair(false, std::string("beta/alpha does not vanish"));
        const AdmissibilityReport bad = check_admissible({StepSchedule::Kind::power, 1.0, 0.4});
        if (bad.square_sum_converges)
            return std::make_pair(false, std::string("exponent 0.4 not rejected"));
        if (ratio_vanishes(alpha, alpha))
            return std::make_pair(false, std::string("constant ratio reported as vanishing"));
        return std::make_pair(true, "tail bound " + fmt(ra.square_tail_bound));
    });

    v.check("constraint-stencil", [&] {
        const ConstraintMatrices T = build_constraints(1);
        if (T.rows.size() != 3) return std::make_pair(false, std::string("expected 3 rows"));
        std::vector<double> dense(3 * 4, 0.0);
        for (std::size_t r = 0; r < 3; ++r)
            for (const auto& [col, coef] : T.rows[r]) dense[r * 4 + col] = coef;
        const std::vector<double> want = {-1, 1, 1, -1, -1, 0, 1, 0, 0, -1, 0, 1};
        return std::make_pair(dense == want, std::string("M=1 stencil"));
    });

    TruncatedMdp bench{30, 0.7, 20.0, ladder.traces};
    const SolveResult bench_sol = relative_value_iteration(bench, 1e-12);

    v.check("bellman-fixed-point", [&] {
        double worst = 0.0;
        for (int tau = 0; tau <= bench.M; ++tau)
            for (int a = 0; a < 2; ++a) {
                const Transition tr = transition(tau, a, bench.M, bench.r_s);
                double rhs = stage_cost(tau, a, bench.lambda, bench.traces);
                for (int s = 0; s < tr.count; ++s)
                    rhs += tr.prob[s] * bench_sol.q.value(tr.next[s]);
                worst = std::max(worst,
                                 std::abs(rhs - bench_sol.q.at(tau, a) - bench_sol.j_star));
            }
        return std::make_pair(worst <= 1e-6, "worst residual " + fmt(worst));
    });

    v.check("constraint-plugback", [&] {
        ConstraintMatrices T = build_constraints(bench.M);
        if (inject_fault)
            for (auto& [col, coef] : T.rows[bench.M]) coef = -coef;
        const std::vector<double> tq = apply_constraints(T, bench_sol.q.q);
        double worst = 1e300;
        for (double x : tq) worst = std::min(worst, x);
        return std::make_pair(worst >= -1e-9,
                              "min constraint value " + fmt(worst) +
                                  (inject_fault ? " (fault injected)" : ""));
    });

    v.check("analytic-vs-empirical", [&] {
        const RandomizedThresholdPolicy p{2, 6.0 / 7.0};
        TraceExtender ext(base.system, p_bar);
        const auto [je, jr] = policy_value_analytic(p, 0.7, ext);
        auto controller = make_policy_controller(p);
        const Trace trace =
            run(*controller, ChannelSchedule::constant(0.7), 1000000, 1, 30, ladder.traces);
        const auto [je_emp, jr_emp] = empirical_metrics(trace, 999999);
        const double de = std::abs(je_emp - je) / je;
        const double dr = std::abs(jr_emp - jr);
        return std::make_pair(de <= 0.03 && dr <= 0.003,
                              "rel J_e gap " + fmt(de) + ", abs J_r gap " + fmt(dr));
    });

    v.check("reproducibility", [&] {
        LearnerOptions opt;
        opt.algo = Algorithm::async;
        opt.M = 30;
        opt.lambda = 20.0;
        auto c1 = make_learning_controller(opt, ladder.traces);
        auto c2 = make_learning_controller(opt, ladder.traces);
        auto c3 = make_learning_controller(opt, ladder.traces);
        const ChannelSchedule ch = ChannelSchedule::constant(0.7);
        const Trace t1 = run(*c1, ch, 5000, 7, 30, ladder.traces);
        const Trace t2 = run(*c2, ch, 5000, 7, 30, ladder.traces);
        const Trace t3 = run(*c3, ch, 5000, 8, 30, ladder.traces);
        if (t1.cum_cost.back() != t2.cum_cost.back() || t1.cum_act.back() != t2.cum_act.back())
            return std::make_pair(false, std::string("same seed differs"));
        for (long k = 0; k < 5000; ++k)
            if (t1.steps[k].a != t2.steps[k].a)
                return std::make_pair(false, std::string("same seed differs"));
        if (t1.cum_cost.back() == t3.cum_cost.back())
            return std::make_pair(false, std::string("different seeds identical"));
        return std::make_pair(true, std::string("bitwise stable across reruns"));
    });

    v.check("config-digest", [&] {
        const std::string d1 = config_digest(preset_config("costly20"));
        const std::string d2 = config_digest(preset_config("costly20"));
        const std::string d3 = config_digest(preset_config("constrained04"));
        if (d1 != d2) return std::make_pair(false, std::string("digest unstable"));
        if (d1 == d3) return std::make_pair(false, std::string("digest collision"));
        return std::make_pair(true, "costly20 " + d1);
    });

    std::printf("%d check(s) failed\n", v.fails);
    return v.fails == 0 ? 0 : 2;
}

}  // namespace resched
