#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "aigc_alloc/diffusion.hpp"
#include "aigc_alloc/mlp.hpp"
#include "aigc_alloc/rng.hpp"
#include "aigc_alloc/scenario.hpp"

namespace aigc {

// Online double-Q critics plus their soft-updated target copies. Each net
// maps state | raw action to a scalar value.
struct CriticPair {
    nn::Mlp q1, q2;
    nn::Mlp q1_target, q2_target;
    double tau = 0.005;
};

CriticPair critics_new(int state_dim, int action_dim, const std::vector<std::size_t>& hidden, double tau,
                       Rng& rng);

// target <- (1 - tau) * target + tau * online, per parameter.
void soft_update(CriticPair& pair);

// Single-step transition; the bandit formulation has no next state.
struct Transition {
    std::vector<double> state;
    std::vector<double> action;
    double reward = 0.0;
};

struct TransitionBatch {
    nn::Tensor states;   // [B, state_dim]
    nn::Tensor actions;  // [B, action_dim]
    std::vector<double> rewards;
    std::size_t size() const { return rewards.size(); }
};

class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity);
    void push(Transition t);
    std::size_t size() const { return storage_.size(); }
    std::size_t capacity() const { return capacity_; }
    const Transition& at(std::size_t logical_index) const;  // 0 = oldest
    TransitionBatch sample(std::size_t batch_size, Rng& rng) const;

private:
    std::size_t capacity_;
    std::size_t next_ = 0;  // ring cursor
    std::vector<Transition> storage_;
};

// Regression of both critics onto the single-step target y = reward.
double critic_loss(const CriticPair& pair, const TransitionBatch& batch);
// Same loss, plus gradients for q1 and q2 in Mlp::param_ptrs() order.
double critic_loss_and_grads(const CriticPair& pair, const TransitionBatch& batch,
                             std::vector<nn::Tensor>& q1_grads, std::vector<nn::Tensor>& q2_grads);

struct TrainConfig {
    long long total_steps = 20000;
    int batch_size = 128;
    double lr_actor = 2e-4;
    double lr_critic = 1e-3;
    double tau = 0.005;
    long long warmup_steps = 1000;
    long long eval_every = 500;
    int eval_episodes = 16;
    std::uint64_t seed = 1;
    int denoise_steps = 5;  // policy chain length K
    double beta_start = 1e-4;
    double beta_end = 0.1;
    double explore_noise_start = 0.1;
    double explore_noise_end = 0.01;
    std::size_t replay_capacity = 50000;
    std::vector<std::size_t> actor_hidden{64, 64};
    std::vector<std::size_t> critic_hidden{64, 64};
    SamplerConfig sampler = default_sampler(4);

    void validate() const;
};

struct LearningCurve {
    std::vector<std::pair<long long, double>> points;  // (training step, mean eval reward)
};

struct EvalResult {
    double mean_reward = 0.0;
    double mean_total_qoe = 0.0;
    std::vector<QoEReport> reports;
};

// Evaluates any deterministic state->raw-action policy over the scenarios:
// decode, project onto the budgets, evaluate. Used by every solver so the
// comparison protocol is identical. Results are in scenario order regardless
// of the worker-thread count.
using RawPolicyFn = std::function<std::vector<double>(const std::vector<double>& state)>;
EvalResult evaluate_raw_policy(const RawPolicyFn& policy, std::span<const Scenario> scenarios,
                               const StateNormalizer& norm);

// Deterministic terminal noise for evaluating the diffusion policy on one
// state: derived from the state content, so identical scenarios evaluate
// identically no matter where or how often they appear.
std::vector<double> evaluation_terminal_noise(std::span<const double> state, int action_dim);

EvalResult evaluate_policy(const DiffusionActor& actor, std::span<const Scenario> scenarios,
                           const StateNormalizer& norm);

// Held-out evaluation scenarios; drawn from a stream disjoint from training.
std::vector<Scenario> evaluation_scenarios(const TrainConfig& config);

struct TrainResult {
    DiffusionActor actor;
    CriticPair critics;
    LearningCurve curve;
};

// Actor-critic training of the conditional diffusion policy on the
// contextual-bandit allocation problem. Fully reproducible from config.seed.
TrainResult train(const TrainConfig& config);

}  // namespace aigc
