#pragma once

#include <string>
#include <vector>

#include "aigc_alloc/critic.hpp"
#include "aigc_alloc/scenario.hpp"

namespace aigc {

// Exhaustive search keeps its nominal grid size below this bound.
inline constexpr long long kOracleCapacity = 10'000'000;

struct OracleResult {
    Decision best;
    double total_qoe = 0.0;
    double reward = 0.0;
    long long points_evaluated = 0;
    long long tie_count = 0;
};

// Enumerates every decision on the grid {r_min..1 in r_levels steps} x
// {1..max_diffusion_step} per user, skips resource-infeasible ones, and
// maximizes reward. Reward ties (within 1e-9) are broken toward the
// lexicographically smallest (r, d) sequence, so the result is independent
// of enumeration partitioning. Throws CapacityError when
// (r_levels * max_diffusion_step)^N exceeds kOracleCapacity.
OracleResult oracle_grid_search(const Scenario& scenario, int r_levels = 10);

// Largest r grid that keeps the scenario inside the oracle capacity bound,
// at most `preferred`. Returns 0 when even a single r level is intractable.
int tractable_r_levels(const Scenario& scenario, int preferred = 10);

// All-max decision repaired by project_feasible.
Decision greedy_allocate(const Scenario& scenario);

// Uniform in-bounds decision repaired by project_feasible.
Decision random_policy(const Scenario& scenario, Rng& rng);

// Tanh-squashed Gaussian policy head shared by the SAC-lite and PPO-lite
// baselines: the net maps a state to per-dimension mean and log-std, and
// actions are kRawActionBound * tanh(u) with u ~ N(mean, std).
struct GaussianPolicy {
    nn::Mlp net;  // outputs [mean(2N), log_std(2N)]
    int num_users = 0;
    int state_dim = 0;

    int action_dim() const { return 2 * num_users; }
};

inline constexpr double kLogStdMin = -5.0;
inline constexpr double kLogStdMax = 2.0;
inline constexpr double kSacTemperature = 0.2;  // fixed entropy temperature
inline constexpr double kPpoClip = 0.2;
inline constexpr int kPpoEpochs = 4;

GaussianPolicy gaussian_policy_new(int num_users, int state_dim, const std::vector<std::size_t>& hidden,
                                   Rng& rng);

// Deterministic head: mean action only, squashed.
std::vector<double> policy_mean_action(const GaussianPolicy& policy, const std::vector<double>& state);

// Reparameterized sample; fills the squashed log-density of the drawn action.
std::vector<double> policy_sample(const GaussianPolicy& policy, const std::vector<double>& state, Rng& rng,
                                  double* log_prob);

struct SacResult {
    GaussianPolicy policy;
    CriticPair critics;
    LearningCurve curve;
};

// Off-policy entropy-regularized actor-critic on the same bandit problem,
// replay protocol and evaluation cadence as the diffusion trainer.
SacResult train_sac_lite(const TrainConfig& config);

struct PpoResult {
    GaussianPolicy policy;
    nn::Mlp value_net;
    LearningCurve curve;
};

// On-policy clipped-ratio training over freshly collected single-step
// episodes; the curve's x axis counts environment steps so curves are
// comparable across solvers.
PpoResult train_ppo_lite(const TrainConfig& config);

// Solver registry addressable from the CLI.
enum class SolverKind { Codi, Sac, Ppo, Greedy, Random, Oracle };
SolverKind solver_from_name(const std::string& name);
const std::vector<std::string>& solver_names();

}  // namespace aigc
