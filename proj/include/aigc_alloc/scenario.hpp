#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "aigc_alloc/rng.hpp"

namespace aigc {

// Lower bound for every user's resolution ratio; allocations never drop a
// user to zero bitrate.
inline constexpr double kMinResolutionRatio = 0.1;

// Tolerance used for resource-feasibility checks and threshold satisfaction,
// so that allocations projected exactly onto a budget do not flip infeasible
// from rounding dust.
inline constexpr double kFeasEps = 1e-9;

struct PresetMeta {
    double latency_budget_ms = 0.0;
    double reliability_target = 0.0;
};

// One allocation problem instance: all budgets, weights, thresholds and QoE
// model constants.
struct Scenario {
    int num_users = 0;
    double bandwidth_budget = 0.0;  // Mbps shared by all users
    double compute_budget = 0.0;    // denoise-step units per decision round
    std::vector<double> qoe_threshold;
    double weight_bitrate = 0.5;
    double weight_similarity = 0.5;
    double max_bitrate = 10.0;  // Mbps at resolution ratio 1
    double ref_bitrate = 8.0;   // Mbps normalizer for the QoE bitrate term
    double similarity_floor = 0.2;
    double similarity_ceiling = 1.0;
    int max_diffusion_step = 10;
    double step_compute_cost = 1.0;
    double penalty_coeff = 10.0;
    std::optional<PresetMeta> preset_meta;

    void validate() const;  // throws ConfigError when an invariant is broken
};

// Per-user (resolution ratio, diffusion step) allocation.
struct Decision {
    std::vector<double> resolution_ratio;  // each in [kMinResolutionRatio, 1]
    std::vector<int> diffusion_step;       // each in {1, ..., max_diffusion_step}
};

struct QoEReport {
    std::vector<double> per_user_bitrate;
    std::vector<double> per_user_similarity;
    std::vector<double> per_user_qoe;
    std::vector<bool> threshold_met;
    double bandwidth_used = 0.0;
    bool bandwidth_feasible = false;
    double compute_used = 0.0;
    bool compute_feasible = false;
    double total_qoe = 0.0;
    double penalty = 0.0;
    double reward = 0.0;
};

// Delivered bitrate for one user: max_bitrate * r.
double bitrate(double resolution_ratio, const Scenario& scenario);

// Similarity of the generated stream after d denoising passes:
// floor + (ceiling - floor) * d / max_diffusion_step.
double similarity(int diffusion_step, const Scenario& scenario);

// Weighted QoE in [0, 1]: w_b * min(bitrate/ref_bitrate, 1) + w_s * similarity.
double user_qoe(double resolution_ratio, int diffusion_step, const Scenario& scenario);

QoEReport evaluate(const Scenario& scenario, const Decision& decision);

// Repairs a decision so both resource budgets hold: over-used bandwidth is
// fixed by proportional down-scaling of the resolution ratios (re-applied when
// the r_min clamp pushes usage back up), over-used compute by round-robin
// single-step reductions starting from the user with the largest diffusion
// step (ties broken toward the largest index). QoE thresholds are soft and
// not projected. Throws InfeasibleError when even the minimum decision
// violates a budget.
Decision project_feasible(const Scenario& scenario, const Decision& decision);

// Normalizers for encode_state; taken from the sampler's upper range bounds.
struct StateNormalizer {
    double bandwidth_norm = 1.0;
    double compute_norm = 1.0;
};

// Fixed layout, length 2 + N: [B/B_norm, C/C_norm, theta_1, ..., theta_N].
std::vector<double> encode_state(const Scenario& scenario, const StateNormalizer& norm);

// Uniform sampling ranges plus the fixed model constants shared by every
// sampled scenario.
struct SamplerConfig {
    int num_users = 4;
    std::pair<double, double> bandwidth_range{24.0, 36.0};
    std::pair<double, double> compute_range{24.0, 36.0};
    std::pair<double, double> threshold_range{0.3, 0.55};
    double weight_bitrate = 0.5;
    double weight_similarity = 0.5;
    double max_bitrate = 10.0;
    double ref_bitrate = 8.0;
    double similarity_floor = 0.2;
    double similarity_ceiling = 1.0;
    int max_diffusion_step = 10;
    double step_compute_cost = 1.0;
    double penalty_coeff = 10.0;

    void validate() const;
    StateNormalizer normalizer() const { return {bandwidth_range.second, compute_range.second}; }
    std::size_t state_dim() const { return 2 + static_cast<std::size_t>(num_users); }
};

// Budgets and thresholds drawn independently and uniformly from the ranges.
Scenario sample_scenario(Rng& rng, const SamplerConfig& config);

// Default per-N scenario family: budgets span 60-90% of full demand and
// thresholds stay below what a balanced allocation delivers at the low end.
SamplerConfig default_sampler(int num_users);

// Named presets: "surgery", "outpatient", "default". The surgery and
// outpatient presets carry the latency/reliability figures of their service
// class as descriptive metadata.
Scenario preset_scenario(const std::string& name);

}  // namespace aigc
