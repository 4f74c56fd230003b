#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "resched/config.hpp"
#include "resched/errors.hpp"
#include "resched/harness.hpp"

namespace {

struct CommonOpts {
    std::string config_path;
    std::string preset;
};

void add_config_options(CLI::App* cmd, CommonOpts& opts) {
    auto* cfg = cmd->add_option("--config", opts.config_path, "experiment config file");
    auto* pre = cmd->add_option("--preset", opts.preset,
                                "built-in experiment (costly20, constrained04, timevarying, mdpx)");
    cfg->excludes(pre);
}

resched::ExperimentConfig resolve_config(const CommonOpts& opts) {
    if (!opts.preset.empty()) return resched::preset_config(opts.preset);
    if (!opts.config_path.empty()) return resched::load_config_file(opts.config_path);
    return resched::default_config();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"optimal and learned transmission scheduling for remote state estimation"};
    app.require_subcommand(1);

    CommonOpts solve_opts, learn_opts;
    std::string solve_out, learn_out;
    std::vector<long> seeds;
    int workers = 0;
    bool inject_fault = false;

    CLI::App* solve = app.add_subcommand("solve", "exact solution of the configured problem");
    add_config_options(solve, solve_opts);
    solve->add_option("--out", solve_out, "per-state CSV path (default <out_dir>/solve.csv)");

    CLI::App* learn = app.add_subcommand("learn", "simulate the configured learners");
    add_config_options(learn, learn_opts);
    learn->add_option("--seed", seeds, "override the config's seed list (repeatable)");
    learn->add_option("--out", learn_out, "output directory (default from config)");
    learn->add_option("--workers", workers, "worker threads (default: all cores)");

    CLI::App* verify = app.add_subcommand("verify", "run the self-check battery");
    verify->add_flag("--inject-fault", inject_fault,
                     "corrupt one structure constraint to demonstrate failure reporting");

    try {
        app.parse(argc, argv);
        if (solve->parsed()) return resched::cmd_solve(resolve_config(solve_opts), solve_out);
        if (learn->parsed()) {
            resched::ExperimentConfig cfg = resolve_config(learn_opts);
            if (!seeds.empty()) cfg.seeds = seeds;
            return resched::cmd_learn(cfg, learn_out, workers);
        }
        return resched::cmd_verify(inject_fault);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const resched::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 1;
    } catch (const resched::NonConvergence& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return 3;
    } catch (const resched::UnstableLadder& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return 3;
    } catch (const resched::DivergentTail& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return 3;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "invalid input: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
}
