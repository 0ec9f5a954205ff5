#include "aigc_alloc/scenario.hpp"

#include <algorithm>
#include <cmath>

#include "aigc_alloc/errors.hpp"

namespace aigc {

namespace {

void require(bool ok, const std::string& message) {
    if (!ok) throw ConfigError(message);
}

}  // namespace

void Scenario::validate() const {
    require(num_users >= 1, "scenario: num_users must be positive");
    require(bandwidth_budget > 0.0, "scenario: bandwidth_budget must be positive");
    require(compute_budget > 0.0, "scenario: compute_budget must be positive");
    require(static_cast<int>(qoe_threshold.size()) == num_users,
            "scenario: qoe_threshold length must equal num_users");
    for (double t : qoe_threshold)
        require(t >= 0.0 && t <= 1.0, "scenario: thresholds must lie in [0, 1]");
    require(std::abs(weight_bitrate + weight_similarity - 1.0) <= 1e-9,
            "scenario: weight_bitrate + weight_similarity must equal 1");
    require(weight_bitrate >= 0.0 && weight_bitrate <= 1.0, "scenario: weight_bitrate must lie in [0, 1]");
    require(max_bitrate > 0.0, "scenario: max_bitrate must be positive");
    require(ref_bitrate > 0.0, "scenario: ref_bitrate must be positive");
    require(similarity_floor >= 0.0 && similarity_floor < 1.0, "scenario: similarity_floor must lie in [0, 1)");
    require(similarity_ceiling > similarity_floor && similarity_ceiling <= 1.0,
            "scenario: similarity_ceiling must lie in (floor, 1]");
    require(max_diffusion_step >= 1, "scenario: max_diffusion_step must be positive");
    require(step_compute_cost > 0.0, "scenario: step_compute_cost must be positive");
    require(penalty_coeff >= 0.0, "scenario: penalty_coeff must be non-negative");
}

double bitrate(double resolution_ratio, const Scenario& scenario) {
    if (resolution_ratio < kMinResolutionRatio - 1e-12 || resolution_ratio > 1.0 + 1e-12)
        throw DomainError("bitrate: resolution ratio outside [0.1, 1]");
    return scenario.max_bitrate * resolution_ratio;
}

double similarity(int diffusion_step, const Scenario& scenario) {
    if (diffusion_step < 1 || diffusion_step > scenario.max_diffusion_step)
        throw DomainError("similarity: diffusion step outside {1..max_diffusion_step}");
    return scenario.similarity_floor +
           (scenario.similarity_ceiling - scenario.similarity_floor) *
               (static_cast<double>(diffusion_step) / static_cast<double>(scenario.max_diffusion_step));
}

double user_qoe(double resolution_ratio, int diffusion_step, const Scenario& scenario) {
    const double rate_term = std::min(bitrate(resolution_ratio, scenario) / scenario.ref_bitrate, 1.0);
    return scenario.weight_bitrate * rate_term +
           scenario.weight_similarity * similarity(diffusion_step, scenario);
}

QoEReport evaluate(const Scenario& scenario, const Decision& decision) {
    const std::size_t n = static_cast<std::size_t>(scenario.num_users);
    if (decision.resolution_ratio.size() != n || decision.diffusion_step.size() != n)
        throw ContractError("evaluate: decision dimensions do not match scenario");

    QoEReport report;
    report.per_user_bitrate.reserve(n);
    report.per_user_similarity.reserve(n);
    report.per_user_qoe.reserve(n);
    report.threshold_met.reserve(n);

    double threshold_violation = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double rate = bitrate(decision.resolution_ratio[i], scenario);
        const double sim = similarity(decision.diffusion_step[i], scenario);
        const double qoe = scenario.weight_bitrate * std::min(rate / scenario.ref_bitrate, 1.0) +
                           scenario.weight_similarity * sim;
        report.per_user_bitrate.push_back(rate);
        report.per_user_similarity.push_back(sim);
        report.per_user_qoe.push_back(qoe);
        report.bandwidth_used += rate;
        report.compute_used += scenario.step_compute_cost * decision.diffusion_step[i];
        report.total_qoe += qoe;
        double deficit = scenario.qoe_threshold[i] - qoe;
        if (deficit <= kFeasEps) deficit = 0.0;
        report.threshold_met.push_back(deficit == 0.0);
        threshold_violation += deficit;
    }

    double bandwidth_over = report.bandwidth_used - scenario.bandwidth_budget;
    if (bandwidth_over <= kFeasEps * std::max(1.0, scenario.bandwidth_budget)) bandwidth_over = 0.0;
    double compute_over = report.compute_used - scenario.compute_budget;
    if (compute_over <= kFeasEps * std::max(1.0, scenario.compute_budget)) compute_over = 0.0;
    report.bandwidth_feasible = bandwidth_over == 0.0;
    report.compute_feasible = compute_over == 0.0;

    report.penalty = scenario.penalty_coeff * (bandwidth_over / scenario.bandwidth_budget +
                                               compute_over / scenario.compute_budget + threshold_violation);
    report.reward = report.total_qoe - report.penalty;
    return report;
}

Decision project_feasible(const Scenario& scenario, const Decision& decision) {
    const std::size_t n = static_cast<std::size_t>(scenario.num_users);
    if (decision.resolution_ratio.size() != n || decision.diffusion_step.size() != n)
        throw ContractError("project_feasible: decision dimensions do not match scenario");

    const double bw_floor = static_cast<double>(n) * scenario.max_bitrate * kMinResolutionRatio;
    if (bw_floor > scenario.bandwidth_budget + kFeasEps * std::max(1.0, scenario.bandwidth_budget))
        throw InfeasibleError("project_feasible: bandwidth budget infeasible even at minimum resolution");
    const double compute_floor = static_cast<double>(n) * scenario.step_compute_cost;
    if (compute_floor > scenario.compute_budget + kFeasEps * std::max(1.0, scenario.compute_budget))
        throw InfeasibleError("project_feasible: compute budget infeasible even at one diffusion step");

    Decision out = decision;
    for (auto& r : out.resolution_ratio) r = std::clamp(r, kMinResolutionRatio, 1.0);
    for (auto& d : out.diffusion_step) d = std::clamp(d, 1, scenario.max_diffusion_step);

    // Bandwidth: proportional down-scaling; entries pinned at r_min are taken
    // out of the pool and the remaining ones rescaled so usage lands exactly
    // on the budget.
    double used = 0.0;
    for (double r : out.resolution_ratio) used += scenario.max_bitrate * r;
    if (used > scenario.bandwidth_budget + kFeasEps * std::max(1.0, scenario.bandwidth_budget)) {
        std::vector<bool> pinned(n, false);
        for (std::size_t pass = 0; pass <= n; ++pass) {
            double pinned_use = 0.0, free_use = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double r_use = scenario.max_bitrate * out.resolution_ratio[i];
                (pinned[i] ? pinned_use : free_use) += r_use;
            }
            if (free_use <= 0.0) break;
            const double factor = (scenario.bandwidth_budget - pinned_use) / free_use;
            if (factor >= 1.0) break;
            bool newly_pinned = false;
            for (std::size_t i = 0; i < n; ++i) {
                if (pinned[i]) continue;
                if (out.resolution_ratio[i] * factor < kMinResolutionRatio) {
                    out.resolution_ratio[i] = kMinResolutionRatio;
                    pinned[i] = true;
                    newly_pinned = true;
                }
            }
            if (newly_pinned) continue;
            for (std::size_t i = 0; i < n; ++i)
                if (!pinned[i]) out.resolution_ratio[i] *= factor;
            break;
        }
    }

    // Compute: single-step round-robin reductions, starting from the user
    // with the largest diffusion step (largest index on ties).
    double compute_used = 0.0;
    for (int d : out.diffusion_step) compute_used += scenario.step_compute_cost * d;
    if (compute_used > scenario.compute_budget + kFeasEps * std::max(1.0, scenario.compute_budget)) {
        std::size_t cursor = 0;
        for (std::size_t i = 0; i < n; ++i)
            if (out.diffusion_step[i] >= out.diffusion_step[cursor]) cursor = i;
        while (compute_used > scenario.compute_budget + kFeasEps * std::max(1.0, scenario.compute_budget)) {
            if (out.diffusion_step[cursor] > 1) {
                out.diffusion_step[cursor] -= 1;
                compute_used -= scenario.step_compute_cost;
            }
            cursor = (cursor + 1) % n;
        }
    }
    return out;
}

std::vector<double> encode_state(const Scenario& scenario, const StateNormalizer& norm) {
    std::vector<double> state;
    state.reserve(2 + scenario.qoe_threshold.size());
    state.push_back(scenario.bandwidth_budget / norm.bandwidth_norm);
    state.push_back(scenario.compute_budget / norm.compute_norm);
    state.insert(state.end(), scenario.qoe_threshold.begin(), scenario.qoe_threshold.end());
    return state;
}

void SamplerConfig::validate() const {
    require(num_users >= 1, "sampler: num_users must be positive");
    for (const auto& [name, range] : {std::pair{"bandwidth_range", bandwidth_range},
                                      std::pair{"compute_range", compute_range},
                                      std::pair{"threshold_range", threshold_range}})
        require(range.first <= range.second, std::string("sampler: ") + name + " is inverted");
    require(bandwidth_range.first > 0.0, "sampler: bandwidth_range must be positive");
    require(compute_range.first > 0.0, "sampler: compute_range must be positive");
    require(threshold_range.first >= 0.0 && threshold_range.second <= 1.0,
            "sampler: threshold_range must lie in [0, 1]");
    // model constants share the Scenario invariants
    Scenario probe;
    probe.num_users = num_users;
    probe.bandwidth_budget = bandwidth_range.second;
    probe.compute_budget = compute_range.second;
    probe.qoe_threshold.assign(static_cast<std::size_t>(num_users), threshold_range.first);
    probe.weight_bitrate = weight_bitrate;
    probe.weight_similarity = weight_similarity;
    probe.max_bitrate = max_bitrate;
    probe.ref_bitrate = ref_bitrate;
    probe.similarity_floor = similarity_floor;
    probe.similarity_ceiling = similarity_ceiling;
    probe.max_diffusion_step = max_diffusion_step;
    probe.step_compute_cost = step_compute_cost;
    probe.penalty_coeff = penalty_coeff;
    probe.validate();
}

Scenario sample_scenario(Rng& rng, const SamplerConfig& config) {
    config.validate();
    Scenario s;
    s.num_users = config.num_users;
    s.bandwidth_budget = rng.uniform(config.bandwidth_range.first, config.bandwidth_range.second);
    s.compute_budget = rng.uniform(config.compute_range.first, config.compute_range.second);
    s.qoe_threshold.resize(static_cast<std::size_t>(config.num_users));
    for (auto& t : s.qoe_threshold) t = rng.uniform(config.threshold_range.first, config.threshold_range.second);
    s.weight_bitrate = config.weight_bitrate;
    s.weight_similarity = config.weight_similarity;
    s.max_bitrate = config.max_bitrate;
    s.ref_bitrate = config.ref_bitrate;
    s.similarity_floor = config.similarity_floor;
    s.similarity_ceiling = config.similarity_ceiling;
    s.max_diffusion_step = config.max_diffusion_step;
    s.step_compute_cost = config.step_compute_cost;
    s.penalty_coeff = config.penalty_coeff;
    s.validate();
    return s;
}

SamplerConfig default_sampler(int num_users) {
    SamplerConfig config;
    config.num_users = num_users;
    const double full_bandwidth = config.max_bitrate * num_users;
    const double full_compute = config.step_compute_cost * config.max_diffusion_step * num_users;
    config.bandwidth_range = {0.6 * full_bandwidth, 0.9 * full_bandwidth};
    config.compute_range = {0.6 * full_compute, 0.9 * full_compute};
    config.threshold_range = {0.3, 0.55};
    config.validate();
    return config;
}

Scenario preset_scenario(const std::string& name) {
    Scenario s;  // field initializers carry the shared model constants
    if (name == "default") {
        s.num_users = 4;
        s.bandwidth_budget = 40.0;
        s.compute_budget = 40.0;
        s.qoe_threshold.assign(4, 0.5);
    } else if (name == "surgery") {
        // surgery-grade interaction: sub-millisecond loop, eight-nines reliability
        s.num_users = 2;
        s.bandwidth_budget = 14.0;
        s.compute_budget = 14.0;
        s.qoe_threshold.assign(2, 0.7);
        s.preset_meta = PresetMeta{1.0, 0.99999999};
    } else if (name == "outpatient") {
        // immersive outpatient video: relaxed latency, five-nines reliability
        s.num_users = 6;
        s.bandwidth_budget = 42.0;
        s.compute_budget = 42.0;
        s.qoe_threshold.assign(6, 0.45);
        s.preset_meta = PresetMeta{2.0, 0.99999};
    } else {
        throw ConfigError("unknown scenario preset: " + name);
    }
    s.validate();
    return s;
}

}  // namespace aigc
