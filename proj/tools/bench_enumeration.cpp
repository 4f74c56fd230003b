// Timing comparison of the serial and OpenMP policy-enumeration kernels,
// plus a multi-seed learning batch run serially and in parallel.

#include <chrono>
#include <cstdio>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "resched/config.hpp"
#include "resched/harness.hpp"
#include "resched/mdp_core.hpp"

using Clock = std::chrono::steady_clock;

static double ms_since(Clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

int main() {
    using namespace resched;
    const ExperimentConfig base = default_config();
    const Eigen::MatrixXd p_bar = steady_state_covariance(base.system);

#ifdef _OPENMP
    std::printf("OpenMP enabled, max threads %d\n", omp_get_max_threads());
#else
    std::printf("OpenMP disabled; parallel paths fall back to serial\n");
#endif

    for (int M : {10, 12, 14}) {
        const CovarianceLadder ladder = cost_ladder(base.system, p_bar, M);
        TruncatedMdp mdp{M, 0.7, 20.0, ladder.traces};

        auto t0 = Clock::now();
        const auto serial = brute_force_optimal(mdp);
        const double serial_ms = ms_since(t0);

        t0 = Clock::now();
        const auto parallel = brute_force_optimal_parallel(mdp);
        const double parallel_ms = ms_since(t0);

        const bool agree = serial.first == parallel.first && serial.second == parallel.second;
        std::printf("enumeration M=%2d (%6ld policies): serial %8.1f ms, parallel %8.1f ms, "
                    "speedup %4.1fx, agree %s\n",
                    M, 2L << M, serial_ms, parallel_ms, serial_ms / parallel_ms,
                    agree ? "yes" : "NO");
        if (!agree) return 1;
    }

    // Multi-seed batch: the learn harness parallelizes across (algorithm,
    // seed) pairs; compare one worker against all cores.
    ExperimentConfig cfg = preset_config("costly20");
    cfg.T = 5000;
    std::printf("\nlearning batch: %zu algorithms x %zu seeds, T=%ld\n", cfg.algorithms.size(),
                cfg.seeds.size(), cfg.T);

    cfg.out_dir = "bench_out_serial";
    auto t0 = Clock::now();
    cmd_learn(cfg, "", 1);
    const double batch_serial = ms_since(t0);

    cfg.out_dir = "bench_out_parallel";
    t0 = Clock::now();
    cmd_learn(cfg, "", 0);
    const double batch_parallel = ms_since(t0);

    std::printf("batch: 1 worker %8.1f ms, all cores %8.1f ms, speedup %4.1fx\n", batch_serial,
                batch_parallel, batch_serial / batch_parallel);
    return 0;
}
