#pragma once

#include <string>
#include <vector>

#include "aigc_alloc/config.hpp"

namespace aigc::cli {

// Deterministic decimal formatting used for every CSV artifact.
std::string format_double(double value);

int cmd_train(const ExperimentConfig& config);
int cmd_sweep_users(const ExperimentConfig& config);
int cmd_oracle(const ExperimentConfig& config);
int cmd_evaluate(const ExperimentConfig& config);
int cmd_gradcheck();

// Full argument parsing + dispatch; returns the process exit status.
// Exit codes: 0 success, 2 unreadable or invalid config, 1 any other failure.
int run_cli(int argc, char** argv);

}  // namespace aigc::cli
