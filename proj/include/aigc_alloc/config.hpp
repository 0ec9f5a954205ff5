#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "aigc_alloc/critic.hpp"
#include "aigc_alloc/scenario.hpp"

namespace aigc {

inline constexpr const char* kToolVersion = "0.1.0";

struct SweepConfig {
    std::vector<int> user_counts{2, 4, 6};
    std::vector<std::string> solvers{"codi", "sac", "ppo", "greedy", "random", "oracle"};
};

// Everything a CLI run needs; the JSON snapshot of this struct goes into the
// run manifest and is sufficient to reproduce the run.
struct ExperimentConfig {
    std::string solver = "codi";
    std::string out_dir = "out";
    std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
    TrainConfig train;                 // includes the scenario sampler
    std::optional<Scenario> scenario;  // fixed instance for oracle/evaluate
    SweepConfig sweep;
    int oracle_r_levels = 10;
    std::string checkpoint;  // actor/policy checkpoint consumed by `evaluate`
};

// Strict parsing: unknown keys anywhere in the tree are errors.
ExperimentConfig config_from_json(const nlohmann::json& root);
nlohmann::json config_to_json(const ExperimentConfig& config);

// Reads the file, applies dotted-path overrides ("train.total_steps=100"),
// then parses. Values are parsed as JSON when possible, else as strings.
ExperimentConfig load_config_file(const std::string& path, const std::vector<std::string>& overrides);

// Rescales a sampler's budget ranges to a different user count, keeping the
// per-user budget fractions and all model constants.
SamplerConfig scale_sampler_to_users(const SamplerConfig& sampler, int num_users);

}  // namespace aigc
