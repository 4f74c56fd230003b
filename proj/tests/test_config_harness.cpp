#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "resched/config.hpp"
#include "resched/errors.hpp"
#include "resched/harness.hpp"

using namespace resched;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    REQUIRE(in.good());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

// Summary lines with the wall-clock column stripped, for determinism checks.
std::string strip_timing(const std::string& csv) {
    std::istringstream in(csv);
    std::ostringstream out;
    std::string line;
    while (std::getline(in, line)) {
        const std::size_t comma = line.rfind(',');
        out << line.substr(0, comma) << '\n';
    }
    return out.str();
}

}  // namespace

TEST_CASE("defaults describe the benchmark problem") {
    const ExperimentConfig cfg = default_config();
    CHECK(cfg.system.A(0, 0) == doctest::Approx(1.2));
    CHECK(cfg.M == 30);
    CHECK(cfg.T == 20000);
    CHECK(cfg.window == 1000);
    REQUIRE(cfg.seeds.size() == 10);
    CHECK(cfg.seeds.front() == 1);
    CHECK(cfg.seeds.back() == 10);
    CHECK(cfg.channel.at(0) == doctest::Approx(0.7));
    cfg.validate();
}

TEST_CASE("full config text parses and resolves") {
    const ExperimentConfig cfg = parse_config_text(
        "# comment\n"
        "[system]\n"
        "A = 0.5\n"
        "C = 1\n"
        "Sigma_w = 1\n"
        "Sigma_v = 1\n"
        "[channel]\n"
        "segments = 0:0.9 2500:0.6\n"
        "[problem]\n"
        "kind = costly\n"
        "lambda = 10\n"
        "M = 12\n"
        "[run]\n"
        "T = 5000\n"
        "seeds = 2 4 7..9\n"
        "window = 250\n"
        "out_dir = runs\n"
        "[algorithm sync_structured]\n"
        "project_dual = true\n"
        "alpha = power 1.0 0.8\n"
        "[algorithm mdp_50]\n");
    CHECK(cfg.system.A.rows() == 1);
    CHECK(cfg.channel.segments.size() == 2);
    CHECK(cfg.channel.at(3000) == doctest::Approx(0.6));
    CHECK(cfg.lambda == doctest::Approx(10.0));
    CHECK(cfg.M == 12);
    CHECK(cfg.T == 5000);
    CHECK(cfg.seeds == std::vector<long>{2, 4, 7, 8, 9});
    CHECK(cfg.window == 250);
    CHECK(cfg.out_dir == "runs");
    REQUIRE(cfg.algorithms.size() == 2);
    CHECK(cfg.algorithms[0].options.algo == Algorithm::sync_structured);
    CHECK(cfg.algorithms[0].options.structured.project_dual);
    CHECK(cfg.algorithms[0].options.alpha.a == doctest::Approx(0.8));
    CHECK(cfg.algorithms[0].options.lambda == doctest::Approx(10.0));
    CHECK(cfg.algorithms[0].options.M == 12);
    CHECK(cfg.algorithms[1].options.algo == Algorithm::mdp_x);
    CHECK(cfg.algorithms[1].options.x_iters == 50);
}

TEST_CASE("config errors carry the field path") {
    auto expect_error = [](const std::string& text, const std::string& needle) {
        try {
            parse_config_text(text);
            FAIL_CHECK("expected ConfigError for: " << text);
        } catch (const ConfigError& e) {
            CHECK(std::string(e.what()).find(needle) != std::string::npos);
        }
    };
    expect_error("[problem]\nlambda = abc\n", "[problem].lambda");
    expect_error("[problem]\nunknown = 1\n", "unknown key");
    expect_error("[bogus]\nx = 1\n", "unknown section");
    expect_error("x = 1\n", "outside any section");
    expect_error("[problem\n", "unterminated");
    expect_error("[system]\nA = 1 2 3\n", "square");
    expect_error("[channel]\nsegments = 5:0.9\n", "segments");
    expect_error("[run]\nseeds = 9..2\n", "empty range");
    expect_error("[problem]\nb = 0.4\n", "[problem].b");  // costly kind
    expect_error("[problem]\nkind = constrained\nb = 0.4\nlambda = 3\n", "[problem].lambda");
    expect_error("[algorithm warp]\n", "warp");
    expect_error("[algorithm async]\nalpha = cubic 1.0\n", "schedule kind");
    expect_error("[algorithm async]\ntts_inner = sync\n", "two_time_scale");
    expect_error("[algorithm async]\nx_iters = 5\n", "mdp_<x>");
    expect_error("[algorithm sync]\nvector_correction = true\n", "structured");
    expect_error("[algorithm async]\nidle_every_step = true\n", "synchronous");
    expect_error("[algorithm mdp_3]\nepsilon = 0.1\n", "explore");
    expect_error("[algorithm mdp_0]\n", "x_iters");
    expect_error("[run]\nT = 100\nwindow = 500\n", "window");
    expect_error("[problem]\nkind = constrained\nb = 0.4\n[algorithm async]\n",
                 "costly");
    expect_error("[algorithm two_time_scale]\n", "constrained");
}

TEST_CASE("presets parse, validate, and differ") {
    for (const std::string& name : preset_names()) {
        const ExperimentConfig cfg = preset_config(name);
        cfg.validate();
        CHECK_FALSE(cfg.algorithms.empty());
    }
    const ExperimentConfig costly = preset_config("costly20");
    REQUIRE(costly.algorithms.size() == 3);
    CHECK(costly.algorithms[0].label == "sync");
    CHECK(costly.algorithms[0].options.alpha.a == doctest::Approx(0.8));
    CHECK(costly.algorithms[2].options.structured.vector_correction);
    CHECK(costly.algorithms[2].options.structured.project_dual);

    const ExperimentConfig con = preset_config("constrained04");
    CHECK(con.kind == ProblemKind::constrained);
    CHECK(con.b == doctest::Approx(0.4));
    CHECK(con.algorithms[0].options.tts_inner == Algorithm::sync);
    CHECK(con.algorithms[0].options.beta.c == doctest::Approx(8.0));

    const ExperimentConfig tv = preset_config("timevarying");
    CHECK(tv.channel.segments.size() == 2);
    CHECK(tv.channel.segments[1].start == 2500);

    const ExperimentConfig mdpx = preset_config("mdpx");
    REQUIRE(mdpx.algorithms.size() == 3);
    CHECK(mdpx.algorithms[1].options.x_iters == 1);
    CHECK(mdpx.algorithms[2].options.x_iters == 50);

    CHECK_THROWS_AS(preset_config("nope"), ConfigError);
}

TEST_CASE("digest is stable, sensitive, and well-formed") {
    const ExperimentConfig a = preset_config("costly20");
    ExperimentConfig b = preset_config("costly20");
    CHECK(config_digest(a) == config_digest(b));
    CHECK(config_digest(a).size() == 16);
    b.lambda = 21.0;
    for (auto& spec : b.algorithms) spec.options.lambda = 21.0;
    CHECK(config_digest(a) != config_digest(b));
    CHECK(canonical_text(a).find("kind costly") != std::string::npos);
}

TEST_CASE("solve writes the per-state table") {
    ExperimentConfig cfg = default_config();
    cfg.out_dir = "test_out_solve";
    REQUIRE(cmd_solve(cfg, "test_out_solve/solve.csv") == 0);
    std::istringstream csv(slurp("test_out_solve/solve.csv"));
    std::string line;
    std::getline(csv, line);
    CHECK(line == "tau,Q0,Q1,V,policy");
    int rows = 0, policy_sum = 0;
    std::vector<int> policy;
    while (std::getline(csv, line)) {
        ++rows;
        policy.push_back(line.back() - '0');
        policy_sum += policy.back();
    }
    CHECK(rows == 31);
    CHECK(policy[0] == 0);
    CHECK(policy[1] == 0);
    CHECK(policy[2] == 1);  // frozen optimal threshold
    CHECK(policy_sum == 29);
}

TEST_CASE("solve reports the closed-form policy for budget problems") {
    ExperimentConfig cfg = preset_config("constrained04");
    REQUIRE(cmd_solve(cfg, "test_out_solve/budget.csv") == 0);
    std::istringstream csv(slurp("test_out_solve/budget.csv"));
    std::string line;
    std::getline(csv, line);
    CHECK(line == "tau,transmit_prob");
    std::vector<std::string> rows;
    while (std::getline(csv, line)) rows.push_back(line);
    REQUIRE(rows.size() == 31);
    CHECK(rows[0] == "0,0");
    CHECK(rows[1] == "1,0");
    CHECK(rows[2].substr(0, 8) == "2,0.8571");  // 6/7 at the threshold
    CHECK(rows[3] == "3,1");
}

TEST_CASE("learn produces traces and a deterministic summary") {
    const std::string text =
        "[problem]\nkind = costly\nlambda = 20\nM = 10\n"
        "[run]\nT = 600\nseeds = 1 2\nwindow = 100\n"
        "[algorithm async]\n"
        "[algorithm sync]\n";
    const ExperimentConfig cfg = parse_config_text(text);

    REQUIRE(cmd_learn(cfg, "test_out_learn_a", 2) == 0);
    REQUIRE(cmd_learn(cfg, "test_out_learn_b", 1) == 0);

    const std::string summary_a = slurp("test_out_learn_a/summary.csv");
    CHECK(strip_timing(summary_a) == strip_timing(slurp("test_out_learn_b/summary.csv")));

    std::istringstream in(summary_a);
    std::string line;
    std::getline(in, line);
    CHECK(line ==
          "algorithm,seed,J_e,J_r,J_e_win,J_r_win,threshold,max_violation,lambda,r_hat,"
          "sweep_equivalents,wall_ms");
    int rows = 0;
    while (std::getline(in, line)) ++rows;
    CHECK(rows == 4);

    for (const char* f : {"async_seed1.csv", "async_seed2.csv", "sync_seed1.csv",
                          "sync_seed2.csv"}) {
        const std::string t1 = slurp(std::string("test_out_learn_a/") + f);
        CHECK(t1 == slurp(std::string("test_out_learn_b/") + f));
        CHECK(t1.substr(0, 9) == "# config ");
        CHECK(t1.find(config_digest(cfg)) != std::string::npos);
    }
}

TEST_CASE("learn refuses configs without algorithms") {
    ExperimentConfig cfg = default_config();
    cfg.out_dir = "test_out_learn_none";
    CHECK_THROWS_AS(cmd_learn(cfg, "", 1), ConfigError);
}

TEST_CASE("verification battery passes clean and catches the planted fault") {
    CHECK(cmd_verify(false) == 0);
    CHECK(cmd_verify(true) == 2);
}
