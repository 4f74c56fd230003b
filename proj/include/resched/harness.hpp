#pragma once

#include <string>

#include "resched/config.hpp"

namespace resched {

// Exact solution of the configured problem: prints the optimal average cost,
// policy shape and structure report, and writes a per-state CSV
// (tau,Q0,Q1,V,policy) to out_path (default: <out_dir>/solve.csv).
// Constrained problems print the closed-form budget policy and its exact
// long-run averages instead of a Q table.
int cmd_solve(const ExperimentConfig& cfg, const std::string& out_path = "");

// Simulate every configured learner over every seed (runs dispatched across
// OpenMP workers), writing one trace CSV per run plus a deterministic
// summary.csv into out_dir (default: the config's out_dir). workers <= 0
// keeps the OpenMP default.
int cmd_learn(const ExperimentConfig& cfg, const std::string& out_dir = "", int workers = 0);

// Self-check battery over the exact solvers, structure machinery, schedules
// and the simulator. Prints one line per check; returns 0 when all pass,
// 2 otherwise. inject_fault corrupts one constraint row on purpose so the
// battery's failure path can be demonstrated end to end.
int cmd_verify(bool inject_fault = false);

}  // namespace resched
