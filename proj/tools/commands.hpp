#pragma once
// Subcommand entry points. Each validates its config, runs, writes its
// report, and returns a process exit code.

#include "config.hpp"

namespace flashlab::cli {

int cmd_check(const ExperimentConfig& cfg);
int cmd_gradcheck(const ExperimentConfig& cfg);
int cmd_rmse(const ExperimentConfig& cfg);
int cmd_bench(const ExperimentConfig& cfg);
int cmd_simulate(const ExperimentConfig& cfg);

}  // namespace flashlab::cli
